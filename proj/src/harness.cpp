// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/harness.h"

#include "snk/noise_field.h"
#include "snk/rng.h"
#include "snk/warp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <set>
#include <shared_mutex>
#include <thread>

namespace snk {

namespace {

constexpr std::uint64_t kSlotTag             = 0x5107;
constexpr std::uint64_t kIndependentNoiseTag = 0x1d9e;

std::uint64_t
mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Image
independentNoise(std::uint64_t seed, int epoch, int slot, const CameraView &view, int channels) {
    const int h = view.height(Resolution::Latent);
    const int w = view.width(Resolution::Latent);
    CounterRng rng(seed, {kIndependentNoiseTag, std::uint64_t(epoch), std::uint64_t(slot), std::uint64_t(view.id())});
    Image out(h, w, channels);
    for (auto &v: out.data()) {
        v = float(rng.normal());
    }
    return out;
}

std::optional<double>
scoreOrNone(const ViewBatch &batch, WarpCache &cache) {
    try {
        return consistencyScore(batch, cache);
    } catch (const Error &e) {
        if (std::string(e.what()).find("disjoint views") != std::string::npos) {
            return std::nullopt;
        }
        throw;
    }
}

nlohmann::json
optionalJson(const std::optional<double> &v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json
bufferJson(const BufferStats &s) {
    return {{"produced", s.produced}, {"consumed", s.consumed}, {"evicted", s.evicted}, {"resident", s.resident}};
}

/// Runs body(i) for i in [0, count) on `workers` threads, rethrowing the
/// first failure after all threads finish.
template <typename F>
void
runSlots(int count, int workers, F &&body) {
    const int threads = std::clamp(workers, 1, std::max(count, 1));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
    {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (int i = t; i < count; i += threads) {
                    try {
                        body(i);
                    } catch (...) {
                        errors[std::size_t(i)] = std::current_exception();
                    }
                }
            });
        }
    }
    for (const auto &e: errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace

// EditBuffer

EditBuffer::EditBuffer(std::size_t capacity) : mCapacity(capacity) {
    check(capacity > 0, "buffer capacity must be positive");
}

bool
EditBuffer::push(BufferItem item) {
    bool evicted = false;
    {
        std::lock_guard lock(mMutex);
        check(!mClosed, "push into a closed buffer");
        if (mItems.size() == mCapacity) {
            mItems.pop_front();
            ++mStats.evicted;
            evicted = true;
        }
        mItems.push_back(std::move(item));
        ++mStats.produced;
    }
    mReady.notify_one();
    return evicted;
}

std::optional<BufferItem>
EditBuffer::pop() {
    std::unique_lock lock(mMutex);
    mReady.wait(lock, [&] { return (!mPaused && !mItems.empty()) || (mClosed && mItems.empty()); });
    if (mItems.empty()) {
        return std::nullopt;
    }
    BufferItem item = std::move(mItems.front());
    mItems.pop_front();
    ++mStats.consumed;
    return item;
}

std::optional<BufferItem>
EditBuffer::tryPop() {
    std::lock_guard lock(mMutex);
    if (mItems.empty()) {
        return std::nullopt;
    }
    BufferItem item = std::move(mItems.front());
    mItems.pop_front();
    ++mStats.consumed;
    return item;
}

void
EditBuffer::setPaused(bool paused) {
    {
        std::lock_guard lock(mMutex);
        mPaused = paused;
    }
    mReady.notify_all();
}

void
EditBuffer::close() {
    {
        std::lock_guard lock(mMutex);
        mClosed = true;
        mPaused = false;
    }
    mReady.notify_all();
}

BufferStats
EditBuffer::stats() const {
    std::lock_guard lock(mMutex);
    BufferStats s = mStats;
    s.resident    = mItems.size();
    return s;
}

std::size_t
EditBuffer::size() const {
    std::lock_guard lock(mMutex);
    return mItems.size();
}

// Editors

std::optional<Eigen::Vector3d>
Editor::targetColor(const Color &) const {
    return std::nullopt;
}

Image
IdentityEditor::edit(const EditInputs &inputs) const {
    return inputs.original;
}

std::optional<Eigen::Vector3d>
IdentityEditor::targetColor(const Color &albedo) const {
    return albedo.cast<double>();
}

ColorMatrixEditor::ColorMatrixEditor(const Eigen::Matrix3d &matrix, const Eigen::Vector3d &bias, double noiseGain)
    : mMatrix(matrix), mBias(bias), mGain(noiseGain) {
    check(mMatrix.allFinite() && mBias.allFinite() && std::isfinite(mGain), "colour matrix editor needs finite parameters");
}

Eigen::Matrix3d
ColorMatrixEditor::defaultMatrix() {
    Eigen::Matrix3d m;
    m << 0.90, 0.10, 0.00,
         0.05, 0.80, 0.15,
         0.10, 0.10, 0.60;
    return m;
}

Eigen::Vector3d
ColorMatrixEditor::defaultBias() {
    return {0.05, 0.0, 0.10};
}

Image
ColorMatrixEditor::edit(const EditInputs &inputs) const {
    const Image &src = inputs.original;
    check(src.channels() >= 3 && inputs.noise.sameShape(src), "colour matrix editor needs matching 3-channel inputs");
    const double g = mGain * inputs.noiseLevel;
    Image out(src.height(), src.width(), 3);
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            const Eigen::Vector3d c(src.at(y, x, 0), src.at(y, x, 1), src.at(y, x, 2));
            const Eigen::Vector3d o = mMatrix * c + mBias;
            for (int ch = 0; ch < 3; ++ch) {
                out.at(y, x, ch) = float(o[ch] + g * inputs.noise.at(y, x, ch));
            }
        }
    }
    return out;
}

std::optional<Eigen::Vector3d>
ColorMatrixEditor::targetColor(const Color &albedo) const {
    if (mGain != 0.0) {
        return std::nullopt;
    }
    return mMatrix * albedo.cast<double>() + mBias;
}

std::shared_ptr<const Editor>
makeEditor(const nlohmann::json &spec) {
    const std::string name = spec.is_string() ? spec.get<std::string>() : spec.value("name", "");
    if (name == "identity") {
        return std::make_shared<IdentityEditor>();
    }
    if (name == "color-matrix") {
        Eigen::Matrix3d m = ColorMatrixEditor::defaultMatrix();
        Eigen::Vector3d b = ColorMatrixEditor::defaultBias();
        double gain       = 0.0;
        if (spec.is_object()) {
            if (spec.contains("matrix")) {
                for (int r = 0; r < 3; ++r) {
                    for (int c = 0; c < 3; ++c) {
                        m(r, c) = spec.at("matrix").at(r).at(c).get<double>();
                    }
                }
            }
            if (spec.contains("bias")) {
                for (int r = 0; r < 3; ++r) {
                    b[r] = spec.at("bias").at(r).get<double>();
                }
            }
            gain = spec.value("noise_gain", 0.0);
        }
        return std::make_shared<ColorMatrixEditor>(m, b, gain);
    }
    throw Error("unknown editor '" + name + "'");
}

// TextureFitter

TextureFitter::TextureFitter(const Scene &scene, std::span<const CameraView> views) {
    std::set<int> ids;
    for (const auto &v: views) {
        check(ids.insert(v.id()).second, "duplicate view id " + std::to_string(v.id()));
        mViews.push_back({v, {}, {}});
    }
    rebind(scene);
}

void
TextureFitter::bindView(const Scene &scene, ViewMap &map) {
    const auto &view = map.view;
    map.texel.assign(std::size_t(view.width()) * view.height(), -1);
    map.original = renderAlbedo(scene, view, Resolution::Full);
    for (int y = 0; y < view.height(); ++y) {
        for (int x = 0; x < view.width(); ++x) {
            const auto hit = scene.intersect(view.origin(), view.rayDirection(pixelCenter(x, y)));
            if (!hit) {
                continue;
            }
            const std::int64_t key = scene.texelKey(hit->primitive, hit->point);
            auto [it, inserted]    = mIndex.try_emplace(key, std::int32_t(mTexels.size()));
            if (inserted) {
                Texel t;
                t.key    = key;
                t.albedo = scene.albedoAt(hit->primitive, hit->point);
                mTexels.push_back(t);
            }
            map.texel[std::size_t(y) * view.width() + x] = it->second;
        }
    }
}

void
TextureFitter::rebind(const Scene &scene) {
    for (auto &v: mViews) {
        bindView(scene, v);
    }
}

const TextureFitter::ViewMap &
TextureFitter::viewMap(int viewId) const {
    for (const auto &v: mViews) {
        if (v.view.id() == viewId) {
            return v;
        }
    }
    throw Error("fitter has no view " + std::to_string(viewId));
}

double
TextureFitter::consume(int viewId, const Image &image) {
    const ViewMap &map = viewMap(viewId);
    check(image.width() == map.view.width() && image.height() == map.view.height() && image.channels() >= 3,
          "fitter input must be a full-resolution colour image of its view");
    const int w = map.view.width();
    for (std::size_t p = 0; p < map.texel.size(); ++p) {
        if (map.texel[p] < 0) {
            continue;
        }
        Texel &t = mTexels[std::size_t(map.texel[p])];
        ++t.count;
        const auto px = image.pixel(int(p) / w, int(p) % w);
        for (int c = 0; c < 3; ++c) {
            t.mean[c] += (double(px[std::size_t(c)]) - t.mean[c]) / double(t.count);
        }
    }
    double sum        = 0.0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < map.texel.size(); ++p) {
        if (map.texel[p] < 0) {
            continue;
        }
        const Texel &t = mTexels[std::size_t(map.texel[p])];
        const auto px  = image.pixel(int(p) / w, int(p) % w);
        for (int c = 0; c < 3; ++c) {
            const double d = double(px[std::size_t(c)]) - t.mean[c];
            sum += d * d;
        }
        count += 3;
    }
    return count ? sum / double(count) : 0.0;
}

Image
TextureFitter::render(int viewId) const {
    const ViewMap &map = viewMap(viewId);
    Image out          = map.original;
    const int w        = map.view.width();
    for (std::size_t p = 0; p < map.texel.size(); ++p) {
        if (map.texel[p] < 0) {
            continue;
        }
        const Texel &t = mTexels[std::size_t(map.texel[p])];
        if (t.count == 0) {
            continue;
        }
        for (int c = 0; c < 3; ++c) {
            out.at(int(p) / w, int(p) % w, c) = float(t.mean[c]);
        }
    }
    return out;
}

std::size_t
TextureFitter::observedTexels() const {
    return std::size_t(std::ranges::count_if(mTexels, [](const Texel &t) { return t.count > 0; }));
}

std::optional<double>
TextureFitter::maxTargetError(const Editor &editor) const {
    double worst = 0.0;
    for (const auto &t: mTexels) {
        if (t.count == 0) {
            continue;
        }
        const auto target = editor.targetColor(t.albedo);
        if (!target) {
            return std::nullopt;
        }
        worst = std::max(worst, (t.mean - *target).cwiseAbs().maxCoeff());
    }
    return worst;
}

std::vector<TextureFitter::Texel>
TextureFitter::snapshot() const {
    auto out = mTexels;
    std::ranges::sort(out, {}, &Texel::key);
    return out;
}

std::uint64_t
TextureFitter::digest() const {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (const auto &t: snapshot()) {
        h = mix64(h ^ std::uint64_t(t.key));
        h = mix64(h ^ t.count);
        for (int c = 0; c < 3; ++c) {
            h = mix64(h ^ std::bit_cast<std::uint64_t>(t.mean[c]));
        }
    }
    return h;
}

// Geometry ramp

std::vector<std::pair<int, Scene>>
GeometryRamp::scenes(const Scene &initial) const {
    check(steps >= 1, "geometry ramp needs at least one step");
    check(firstEpoch <= lastEpoch, "geometry ramp epochs are reversed");
    check(primitive >= 0 && primitive < int(initial.primitives().size()), "geometry ramp primitive out of range");
    const auto *sphere = std::get_if<Sphere>(&initial.primitives()[std::size_t(primitive)].shape);
    check(sphere != nullptr, "geometry ramp primitive must be a sphere");
    const double r0 = sphere->radius;
    std::vector<std::pair<int, Scene>> out;
    for (int i = 1; i <= steps; ++i) {
        auto prims = initial.primitives();
        std::get<Sphere>(prims[std::size_t(primitive)].shape).radius = r0 * (1.0 + (factor - 1.0) * i / steps);
        const int epoch =
            steps == 1 ? firstEpoch
                       : firstEpoch + int(std::lround(double(lastEpoch - firstEpoch) * (i - 1) / (steps - 1)));
        out.emplace_back(epoch, Scene(std::move(prims), initial.scale(), initial.texelSize()));
    }
    return out;
}

// RunConfig

RunConfig
RunConfig::fromJson(const nlohmann::json &j) {
    static const std::set<std::string> known = {
        "schedule", "epochs", "k", "slots", "n_workers", "seed", "deterministic_replay", "buffer_capacity",
        "editor", "loss", "structured_noise", "consistency_rounds", "channels", "layout", "embedding",
        "phase_switch_epoch", "geometry_ramp", "scene", "width", "height", "views"};
    check(j.is_object(), "run config must be a JSON object");
    for (const auto &[key, value]: j.items()) {
        check(known.contains(key), "unknown run config key '" + key + "'");
    }
    RunConfig c;
    try {
        if (j.contains("schedule")) {
            c.schedule = DistillSchedule::fromJson(j.at("schedule"));
        } else if (j.contains("epochs")) {
            c.schedule = DistillSchedule::scaled(j.at("epochs").get<int>());
        }
        c.k                   = j.value("k", c.k);
        c.workers             = j.value("n_workers", c.workers);
        c.slots               = j.value("slots", j.contains("n_workers") ? c.workers : c.slots);
        c.seed                = j.value("seed", c.seed);
        c.deterministicReplay = j.value("deterministic_replay", c.deterministicReplay);
        c.bufferCapacity      = j.value("buffer_capacity", c.bufferCapacity);
        if (j.contains("editor")) {
            c.editor = j.at("editor");
        }
        c.loss              = j.value("loss", c.loss);
        c.structuredNoise   = j.value("structured_noise", c.structuredNoise);
        c.consistencyRounds = j.value("consistency_rounds", c.consistencyRounds);
        c.channels          = j.value("channels", c.channels);
        if (j.contains("layout")) {
            const auto &l              = j.at("layout");
            c.layout.refWidth          = l.value("ref_width", c.layout.refWidth);
            c.layout.refHeight         = l.value("ref_height", c.layout.refHeight);
            c.layout.horizontalSplitter = l.value("horizontal_splitter", c.layout.horizontalSplitter);
            c.layout.verticalSplitter  = l.value("vertical_splitter", c.layout.verticalSplitter);
        }
        if (j.contains("embedding")) {
            const auto &e = j.at("embedding");
            if (e.is_boolean()) {
                if (e.get<bool>()) {
                    c.embedding = HashGridConfig{};
                }
            } else {
                c.embedding = HashGridConfig::fromJson(e);
            }
        }
        if (j.contains("phase_switch_epoch")) {
            c.phaseSwitchEpoch = j.at("phase_switch_epoch").get<int>();
        }
        if (j.contains("geometry_ramp")) {
            const auto &g = j.at("geometry_ramp");
            GeometryRamp r;
            r.primitive  = g.value("primitive", r.primitive);
            r.factor     = g.value("factor", r.factor);
            r.steps      = g.value("steps", r.steps);
            r.firstEpoch = g.at("first_epoch").get<int>();
            r.lastEpoch  = g.at("last_epoch").get<int>();
            c.geometry   = r;
        }
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("malformed run config: ") + e.what());
    }
    return c;
}

nlohmann::json
RunConfig::toJson() const {
    nlohmann::json j = {{"schedule", schedule.toJson()},
                        {"k", k},
                        {"slots", slots},
                        {"n_workers", workers},
                        {"seed", seed},
                        {"deterministic_replay", deterministicReplay},
                        {"buffer_capacity", bufferCapacity},
                        {"editor", editor},
                        {"loss", loss},
                        {"structured_noise", structuredNoise},
                        {"consistency_rounds", consistencyRounds},
                        {"channels", channels},
                        {"layout",
                         {{"ref_width", layout.refWidth},
                          {"ref_height", layout.refHeight},
                          {"horizontal_splitter", layout.horizontalSplitter},
                          {"vertical_splitter", layout.verticalSplitter}}}};
    if (embedding) {
        j["embedding"] = embedding->toJson();
    }
    if (phaseSwitchEpoch) {
        j["phase_switch_epoch"] = *phaseSwitchEpoch;
    }
    if (geometry) {
        j["geometry_ramp"] = {{"primitive", geometry->primitive},
                              {"factor", geometry->factor},
                              {"steps", geometry->steps},
                              {"first_epoch", geometry->firstEpoch},
                              {"last_epoch", geometry->lastEpoch}};
    }
    return j;
}

// RunReport

std::vector<nlohmann::json>
RunReport::toJsonLines() const {
    std::vector<nlohmann::json> lines;
    for (const auto &e: epochs) {
        lines.push_back({{"type", "epoch"},
                         {"epoch", e.epoch},
                         {"stage", e.stage},
                         {"phase", e.phase},
                         {"noise_levels", e.noiseLevels},
                         {"train_step", e.trainStep},
                         {"consistency_score", optionalJson(e.consistencyScore)},
                         {"fitter_residual", optionalJson(e.fitterResidual)},
                         {"texel_error", optionalJson(e.texelError)},
                         {"coverage", e.coverage},
                         {"buffer", bufferJson(e.buffer)}});
    }
    for (const auto &r: rounds) {
        lines.push_back({{"type", "round"},
                         {"epoch", r.epoch},
                         {"raw_score", optionalJson(r.rawScore)},
                         {"projected_score", optionalJson(r.projectedScore)},
                         {"loss", r.loss}});
    }
    for (const auto &r: refreshes) {
        lines.push_back(
            {{"type", "refresh"}, {"epoch", r.epoch}, {"values_preserved", r.valuesPreserved}, {"anchored", r.anchored}});
    }
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(textureDigest));
    lines.push_back({{"type", "summary"},
                     {"epochs", epochs.size()},
                     {"rounds", rounds.size()},
                     {"texels", texture.size()},
                     {"texture_digest", digest},
                     {"final_texel_error", optionalJson(finalTexelError)}});
    return lines;
}

// Pipeline

namespace {

class Pipeline {
public:
    Pipeline(const Scene &scene, std::span<const CameraView> views, const RunConfig &config, int phaseSwitch)
        : mConfig(config), mViews(views.begin(), views.end()), mScene(scene),
          mCache(std::make_unique<WarpCache>(scene)), mFitter(scene, views), mBuffer(config.bufferCapacity),
          mEditor(makeEditor(config.editor)), mLoss(makeLoss(config.loss)), mPhaseSwitch(phaseSwitch) {
        check(config.slots >= 1, "slots must be at least 1");
        check(config.workers >= 1, "n_workers must be at least 1");
        check(config.channels >= 3, "noise needs at least three channels");
        mLayout = makeLayout(config.k, Orientation::Landscape, config.layout);
        check(int(mViews.size()) >= 4 * config.k - 3,
              "need at least 4k-3 = " + std::to_string(4 * config.k - 3) + " views, have " +
                  std::to_string(mViews.size()));
        for (std::size_t i = 0; i < mViews.size(); ++i) {
            mIndex[mViews[i].id()] = i;
            mOriginals.push_back(renderAlbedo(scene, mViews[i], Resolution::Full));
        }
        if (config.embedding) {
            const HashGrid grid(*config.embedding);
            for (const auto &v: mViews) {
                mFeatures.push_back(featureImage(grid, scene, v, Resolution::Full));
            }
        }
        if (config.geometry) {
            mGeometry = config.geometry->scenes(scene);
        }
    }

    RunReport
    execute() {
        const auto &schedule = mConfig.schedule;
        std::optional<std::jthread> fitterThread;
        if (!mConfig.deterministicReplay) {
            mBuffer.setPaused(true);
            fitterThread.emplace([this] { fitterLoop(); });
        }
        try {
            for (int epoch = schedule.firstEpoch(); epoch <= schedule.lastEpoch(); ++epoch) {
                runEpoch(epoch);
            }
        } catch (...) {
            mBuffer.close();
            throw;
        }
        mBuffer.close();
        if (fitterThread) {
            fitterThread->join();
        }
        mReport.texture       = mFitter.snapshot();
        mReport.textureDigest = mFitter.digest();
        mReport.finalTexelError = mFitter.maxTargetError(*mEditor);
        for (const auto &v: mViews) {
            mReport.renders.push_back({v, mFitter.render(v.id())});
        }
        return std::move(mReport);
    }

private:
    // Coarse-to-fine forces both components on in phase 2.
    bool coarseToFine() const { return mPhaseSwitch > mConfig.schedule.firstEpoch(); }
    bool structuredActive(int phase) const { return phase == 2 && (coarseToFine() || mConfig.structuredNoise); }
    bool roundsActive(int phase) const { return phase == 2 && (coarseToFine() || mConfig.consistencyRounds); }

    void
    renderStructured() {
        mStructured.clear();
        for (const auto &v: mViews) {
            mStructured.push_back(renderNoise(*mField, mScene, v));
        }
    }

    void
    applyGeometry(int epoch) {
        for (const auto &[when, next]: mGeometry) {
            if (when != epoch) {
                continue;
            }
            std::unique_lock lock(mFitterMutex);
            if (mField) {
                auto refreshed = refreshGeometry(*mField, mScene, next);
                bool preserved = refreshed.views().size() == mField->views().size();
                for (std::size_t i = 0; preserved && i < refreshed.views().size(); ++i) {
                    preserved = refreshed.views()[i].samples == mField->views()[i].samples;
                }
                mField = std::move(refreshed);
                mReport.refreshes.push_back({epoch, preserved, mField->anchoredCount()});
            }
            mScene = next;
            mCache = std::make_unique<WarpCache>(mScene);
            mFitter.rebind(mScene);
            if (mField) {
                renderStructured();
            }
        }
    }

    std::vector<ViewImage>
    generate(int epoch, int slot, double lambda, int phase) {
        CounterRng rng(mConfig.seed, {kSlotTag, std::uint64_t(epoch), std::uint64_t(slot)});
        const std::size_t mainIndex = std::size_t(rng.below(mViews.size()));
        const auto selection =
            selectRefs(mViews[mainIndex], mViews, mScene, 4 * (mConfig.k - 1), rng.next(), mCache.get());

        std::vector<std::size_t> members{mainIndex};
        for (const int id: selection.viewIds) {
            members.push_back(mIndex.at(id));
        }

        const bool structured = structuredActive(phase);
        std::vector<Image> original, rendered, noise, mixed, features;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const auto &view = mViews[members[m]];
            const Rect &slotRect = m == 0 ? mLayout.main.rect : mLayout.refs[m - 1].rect;
            auto fit = [&](const Image &img) { return resizeNearest(img, slotRect.height, slotRect.width); };
            Image render;
            {
                std::shared_lock lock(mFitterMutex);
                render = mFitter.render(view.id());
            }
            const Image latent = structured ? mStructured[members[m]]
                                            : independentNoise(mConfig.seed, epoch, slot, view, mConfig.channels);
            const Image up = upsampleNoise(latent, view.height(), view.width(), 3);
            original.push_back(fit(mOriginals[members[m]]));
            rendered.push_back(fit(render));
            noise.push_back(fit(up));
            mixed.push_back(fit(mixInput(render, up, lambda)));
            if (!mFeatures.empty()) {
                features.push_back(fit(mFeatures[members[m]]));
            }
        }
        auto canvas = [&](const std::vector<Image> &parts) {
            return compose(mLayout, parts.front(), std::span(parts).subspan(1));
        };
        const Image originalCanvas = canvas(original);
        const Image renderedCanvas = canvas(rendered);
        const Image noiseCanvas    = canvas(noise);
        const Image mixedCanvas    = canvas(mixed);
        std::optional<Image> featureCanvas;
        if (!features.empty()) {
            featureCanvas = canvas(features);
        }

        const EditInputs inputs{originalCanvas, renderedCanvas, noiseCanvas, mixedCanvas,
                                featureCanvas ? &*featureCanvas : nullptr, lambda};
        Image edited;
        try {
            edited = mEditor->edit(inputs);
        } catch (const std::exception &e) {
            throw Error(context(epoch) + "editor '" + mEditor->name() + "' failed: " + e.what());
        }
        if (edited.height() != originalCanvas.height() || edited.width() != originalCanvas.width() ||
            edited.channels() < 3) {
            throw Error(context(epoch) + "editor '" + mEditor->name() + "' returned a malformed canvas");
        }
        const Decomposed parts = decompose(mLayout, edited.channels() == 3 ? edited : edited.sliceChannels(0, 3));

        std::vector<ViewImage> out;
        for (std::size_t m = 0; m < members.size(); ++m) {
            const auto &view  = mViews[members[m]];
            const Image &part = m == 0 ? parts.main : parts.refs[m - 1];
            out.push_back({view, resizeNearest(part, view.height(), view.width())});
        }
        return out;
    }

    std::string
    context(int epoch) const {
        return "stage '" + mConfig.schedule.stageAt(epoch).name + "' epoch " + std::to_string(epoch) + ": ";
    }

    void
    runEpoch(int epoch) {
        const auto &stage = mConfig.schedule.stageAt(epoch);
        const int phase   = epoch < mPhaseSwitch ? 1 : 2;
        if (structuredActive(phase) && !mField) {
            std::unique_lock lock(mFitterMutex);
            mField = initField(mScene, mViews, mConfig.seed, mConfig.channels);
            renderStructured();
        }
        applyGeometry(epoch);

        EpochRecord record;
        record.epoch = epoch;
        record.stage = stage.name;
        record.phase = phase;
        for (int s = 0; s < mConfig.slots; ++s) {
            record.noiseLevels.push_back(noiseLevelAt(mConfig.schedule, epoch, mConfig.seed, std::uint64_t(s)));
        }

        std::vector<std::vector<ViewImage>> slotViews(std::size_t(mConfig.slots));
        runSlots(mConfig.slots, mConfig.workers, [&](int s) {
            slotViews[std::size_t(s)] = generate(epoch, s, record.noiseLevels[std::size_t(s)], phase);
        });

        ViewBatch batch;
        batch.meta = {epoch, -1, mConfig.k, mConfig.slots};
        for (auto &views: slotViews) {
            for (auto &v: views) {
                batch.views.push_back(std::move(v));
            }
        }
        batch.validate();

        record.trainStep = roundsActive(phase) && stage.isTrainStep(epoch);
        const ViewBatch *pushed = &batch;
        ViewBatch references;
        if (record.trainStep) {
            RoundRecord round;
            round.epoch    = epoch;
            round.rawScore = scoreOrNone(batch, *mCache);
            references     = buildReferenceViews(batch, *mCache);
            try {
                double total = 0.0;
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    total += (*mLoss)(batch.views[i].image, references.views[i].image);
                }
                round.loss = total / double(batch.size());
            } catch (const std::exception &e) {
                throw Error(context(epoch) + "loss '" + mLoss->name() + "' failed: " + e.what());
            }
            round.projectedScore = scoreOrNone(references, *mCache);
            record.consistencyScore = round.projectedScore;
            mReport.rounds.push_back(round);
            pushed = &references;
        } else {
            record.consistencyScore = scoreOrNone(batch, *mCache);
        }

        if (!mConfig.deterministicReplay) {
            mBuffer.setPaused(!stage.fitterActive);
        }
        for (const auto &v: pushed->views) {
            mBuffer.push({v.view.id(), v.image, epoch});
        }
        if (mConfig.deterministicReplay && stage.fitterActive) {
            std::unique_lock lock(mFitterMutex);
            while (auto item = mBuffer.tryPop()) {
                accumulate(mFitter.consume(item->viewId, item->image));
            }
        }

        {
            std::lock_guard lock(mResidualMutex);
            if (mResidualCount) {
                record.fitterResidual = mResidualSum / double(mResidualCount);
            }
            mResidualSum   = 0.0;
            mResidualCount = 0;
        }
        {
            std::shared_lock lock(mFitterMutex);
            record.texelError = mFitter.maxTargetError(*mEditor);
            record.coverage   = mFitter.texelCount() ? double(mFitter.observedTexels()) / double(mFitter.texelCount())
                                                     : 0.0;
        }
        record.buffer = mBuffer.stats();
        mReport.epochs.push_back(std::move(record));
    }

    void
    accumulate(double residual) {
        std::lock_guard lock(mResidualMutex);
        mResidualSum += residual;
        ++mResidualCount;
    }

    void
    fitterLoop() {
        while (auto item = mBuffer.pop()) {
            double residual;
            {
                std::unique_lock lock(mFitterMutex);
                residual = mFitter.consume(item->viewId, item->image);
            }
            accumulate(residual);
        }
    }

    const RunConfig &mConfig;
    std::vector<CameraView> mViews;
    std::unordered_map<int, std::size_t> mIndex;
    Scene mScene;
    std::unique_ptr<WarpCache> mCache;
    std::vector<Image> mOriginals;
    std::vector<Image> mFeatures;
    std::optional<WeightedNoiseField> mField;
    std::vector<Image> mStructured;
    std::vector<std::pair<int, Scene>> mGeometry;
    SurroundLayout mLayout;

    TextureFitter mFitter;
    std::shared_mutex mFitterMutex;
    EditBuffer mBuffer;
    std::shared_ptr<const Editor> mEditor;
    std::unique_ptr<ImageLoss> mLoss;
    int mPhaseSwitch;

    std::mutex mResidualMutex;
    double mResidualSum        = 0.0;
    std::uint64_t mResidualCount = 0;

    RunReport mReport;
};

} // namespace

RunReport
run(const Scene &scene, std::span<const CameraView> views, const RunConfig &config) {
    Pipeline pipeline(scene, views, config, config.schedule.firstEpoch());
    return pipeline.execute();
}

RunReport
coarseToFine(const Scene &scene, std::span<const CameraView> views, const RunConfig &config) {
    if (!config.geometry) {
        return run(scene, views, config);
    }
    const auto &schedule = config.schedule;
    const int phaseSwitch =
        config.phaseSwitchEpoch.value_or(schedule.firstEpoch() + (schedule.lastEpoch() - schedule.firstEpoch() + 1) / 2);
    check(phaseSwitch > schedule.firstEpoch() && phaseSwitch <= schedule.lastEpoch(),
          "phase switch epoch must fall inside the schedule after its first epoch");
    Pipeline pipeline(scene, views, config, phaseSwitch);
    return pipeline.execute();
}

} // namespace snk
