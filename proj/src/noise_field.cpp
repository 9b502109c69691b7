// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/noise_field.h"

#include "snk/rng.h"
#include "snk/scene_io.h"
#include "snk/stats.h"
#include "snk/tensor_io.h"
#include "snk/warp.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace snk {

namespace {

constexpr double kMinWeightGap    = 1e-12;
constexpr std::uint64_t kSampleTag = 0x5a11;
constexpr std::uint64_t kOrphanTag = 0x0b6a;
constexpr std::uint64_t kChunkMask = (std::uint64_t{1} << 18) - 1;

NoiseSample
drawSample(std::uint64_t seed, int viewId, std::size_t pixel, int channel, std::uint64_t attempt) {
    CounterRng rng(seed, {kSampleTag, std::uint64_t(std::int64_t(viewId)), pixel, std::uint64_t(channel), attempt});
    NoiseSample s;
    s.value  = float(rng.normal());
    s.weight = rng.uniform();
    return s;
}

void
anchorRecord(WeightedNoiseField::ViewRecord &rec, const Scene &scene) {
    const DepthMap depth = renderDepth(scene, rec.view, Resolution::Latent);
    const CameraView cam = rec.view.atResolution(Resolution::Latent);
    rec.anchor.assign(std::size_t(rec.latentWidth) * rec.latentHeight, Vec3::Zero());
    rec.primitive.assign(rec.anchor.size(), -1);
    for (int y = 0; y < rec.latentHeight; ++y) {
        for (int x = 0; x < rec.latentWidth; ++x) {
            if (depth.hit(x, y)) {
                const std::size_t i = std::size_t(y) * rec.latentWidth + x;
                rec.anchor[i]       = unproject(cam, pixelCenter(x, y), depth.at(x, y));
                rec.primitive[i]    = depth.primitiveAt(x, y);
            }
        }
    }
}

} // namespace

float
aggregateMaxWeight(std::span<const NoiseSample> candidates) {
    check(!candidates.empty(), "max-weight aggregation needs at least one candidate");
    return std::ranges::max(candidates, {}, &NoiseSample::weight).value;
}

WeightedNoiseField::WeightedNoiseField(std::uint64_t seed, int channels, std::vector<ViewRecord> views)
    : mSeed(seed), mChannels(channels), mViews(std::move(views)) {
    check(channels >= 1, "noise field needs at least one channel");
}

const WeightedNoiseField::ViewRecord *
WeightedNoiseField::find(int viewId) const {
    for (const auto &rec: mViews) {
        if (rec.view.id() == viewId) {
            return &rec;
        }
    }
    return nullptr;
}

std::size_t
WeightedNoiseField::anchoredCount() const {
    std::size_t n = 0;
    for (const auto &rec: mViews) {
        n += std::size_t(std::ranges::count_if(rec.primitive, [](int p) { return p >= 0; })) * mChannels;
    }
    return n;
}

float
unregisteredBackground(std::uint64_t seed, int viewId, std::size_t pixel, int channel) {
    CounterRng rng(seed, {kOrphanTag, std::uint64_t(std::int64_t(viewId)), pixel, std::uint64_t(channel)});
    return float(rng.normal());
}

WeightedNoiseField
initField(const Scene &scene, std::span<const CameraView> views, std::uint64_t seed, int channels) {
    check(!views.empty(), "noise field needs at least one view");
    check(channels >= 1, "noise field needs at least one channel");
    std::vector<WeightedNoiseField::ViewRecord> records;
    records.reserve(views.size());
    for (const auto &view: views) {
        for (const auto &rec: records) {
            check(rec.view.id() != view.id(), "duplicate view id " + std::to_string(view.id()) + " in noise field");
        }
        WeightedNoiseField::ViewRecord rec{view, view.width(Resolution::Latent), view.height(Resolution::Latent), {}, {}, {}};
        anchorRecord(rec, scene);
        rec.samples.resize(rec.anchor.size() * std::size_t(channels));
        for (std::size_t p = 0; p < rec.anchor.size(); ++p) {
            for (int c = 0; c < channels; ++c) {
                rec.samples[p * channels + c] = drawSample(seed, view.id(), p, c, 0);
            }
        }
        records.push_back(std::move(rec));
    }

    // Weights compete only within a channel; keep them pairwise distinct
    // there. Later entries of a near-duplicate group are redrawn.
    for (int c = 0; c < channels; ++c) {
        for (std::uint64_t attempt = 1;; ++attempt) {
            struct Slot {
                double weight;
                std::size_t view;
                std::size_t pixel;
            };
            std::vector<Slot> slots;
            for (std::size_t v = 0; v < records.size(); ++v) {
                for (std::size_t p = 0; p < records[v].anchor.size(); ++p) {
                    slots.push_back({records[v].samples[p * channels + c].weight, v, p});
                }
            }
            std::ranges::sort(slots, [](const Slot &a, const Slot &b) {
                return std::tie(a.weight, a.view, a.pixel) < std::tie(b.weight, b.view, b.pixel);
            });
            bool redrawn = false;
            for (std::size_t i = 1; i < slots.size(); ++i) {
                if (slots[i].weight - slots[i - 1].weight <= kMinWeightGap) {
                    auto &rec = records[slots[i].view];
                    rec.samples[slots[i].pixel * channels + c] =
                        drawSample(seed, rec.view.id(), slots[i].pixel, c, attempt);
                    redrawn = true;
                }
            }
            if (!redrawn) {
                break;
            }
        }
    }
    return WeightedNoiseField(seed, channels, std::move(records));
}

Image
renderNoise(const WeightedNoiseField &field, const Scene &scene, const CameraView &view,
            std::span<const std::size_t> sourceOrder) {
    const int channels   = field.channels();
    const CameraView cam = view.atResolution(Resolution::Latent);
    const DepthMap depth = renderDepth(scene, view, Resolution::Latent);
    const std::size_t pixels = std::size_t(cam.width()) * cam.height();

    std::vector<std::size_t> order(sourceOrder.begin(), sourceOrder.end());
    if (order.empty()) {
        order.resize(field.views().size());
        std::iota(order.begin(), order.end(), std::size_t{0});
    }
    check(order.size() == field.views().size(), "source order must cover every registered view");

    std::vector<double> bestWeight(pixels * channels, -1.0);
    Image out(cam.height(), cam.width(), channels);
    for (const std::size_t s: order) {
        const auto &rec = field.views().at(s);
        for (std::size_t p = 0; p < rec.anchor.size(); ++p) {
            if (!rec.anchored(p)) {
                continue;
            }
            const auto vis = testVisibility(scene, cam, depth, rec.anchor[p], rec.primitive[p]);
            if (!vis.visible) {
                continue;
            }
            const int cx         = int(std::floor(vis.pixel.x()));
            const int cy         = int(std::floor(vis.pixel.y()));
            const std::size_t q  = std::size_t(cy) * cam.width() + cx;
            for (int c = 0; c < channels; ++c) {
                const NoiseSample &sample = rec.samples[p * channels + c];
                if (sample.weight > bestWeight[q * channels + c]) {
                    bestWeight[q * channels + c] = sample.weight;
                    out.at(cy, cx, c)            = sample.value;
                }
            }
        }
    }

    const auto *own = field.find(view.id());
    if (own) {
        check(own->view == view, "view id " + std::to_string(view.id()) + " registered with a different camera");
    }
    for (int y = 0; y < cam.height(); ++y) {
        for (int x = 0; x < cam.width(); ++x) {
            const std::size_t q = std::size_t(y) * cam.width() + x;
            for (int c = 0; c < channels; ++c) {
                if (bestWeight[q * channels + c] >= 0.0) {
                    continue;
                }
                out.at(y, x, c) = own ? own->samples[q * channels + c].value
                                      : unregisteredBackground(field.seed(), view.id(), q, c);
            }
        }
    }
    return out;
}

WeightedNoiseField
refreshGeometry(const WeightedNoiseField &field, const Scene &oldScene, const Scene &newScene) {
    std::vector<WeightedNoiseField::ViewRecord> records;
    records.reserve(field.views().size());
    for (const auto &old: field.views()) {
        WeightedNoiseField::ViewRecord rec = old;
        const DepthMap before = renderDepth(oldScene, old.view, Resolution::Latent);
        const DepthMap after  = renderDepth(newScene, old.view, Resolution::Latent);
        const CameraView cam  = old.view.atResolution(Resolution::Latent);
        for (int y = 0; y < rec.latentHeight; ++y) {
            for (int x = 0; x < rec.latentWidth; ++x) {
                const std::size_t i = std::size_t(y) * rec.latentWidth + x;
                if (after.hit(x, y)) {
                    if (before.at(x, y) == after.at(x, y) && before.primitiveAt(x, y) == after.primitiveAt(x, y) &&
                        old.anchored(i)) {
                        continue;
                    }
                    rec.anchor[i]    = unproject(cam, pixelCenter(x, y), after.at(x, y));
                    rec.primitive[i] = after.primitiveAt(x, y);
                } else {
                    rec.anchor[i]    = Vec3::Zero();
                    rec.primitive[i] = -1;
                }
            }
        }
        records.push_back(std::move(rec));
    }
    return WeightedNoiseField(field.seed(), field.channels(), std::move(records));
}

void
saveField(const WeightedNoiseField &field, const std::filesystem::path &tensorPath,
          const std::filesystem::path &sidecarPath) {
    Tensor t;
    nlohmann::json cams = nlohmann::json::array();
    for (const auto &rec: field.views()) {
        for (const auto &s: rec.samples) {
            const auto bits = static_cast<std::uint64_t>(std::ldexp(s.weight, 53));
            t.values.push_back(s.value);
            t.values.push_back(float((bits >> 36) & kChunkMask));
            t.values.push_back(float((bits >> 18) & kChunkMask));
            t.values.push_back(float(bits & kChunkMask));
        }
        SceneDocument one;
        one.cameras.push_back(rec.view);
        cams.push_back(sceneDocumentToJson(one).at("cameras")[0]);
    }
    t.dims = {std::uint32_t(t.values.size() / 4), 4};
    writeTensorFile(tensorPath, t);
    std::ofstream out(sidecarPath);
    if (!out) {
        throw Error("cannot open " + sidecarPath.string() + " for writing");
    }
    out << nlohmann::json{{"seed", field.seed()}, {"channels", field.channels()}, {"views", cams}}.dump(2) << '\n';
}

WeightedNoiseField
loadField(const Scene &scene, const std::filesystem::path &tensorPath, const std::filesystem::path &sidecarPath) {
    std::ifstream in(sidecarPath);
    if (!in) {
        throw Error("cannot open " + sidecarPath.string());
    }
    nlohmann::json meta;
    in >> meta;
    const auto seed     = meta.at("seed").get<std::uint64_t>();
    const int channels  = meta.at("channels").get<int>();
    const Tensor t      = readTensorFile(tensorPath);
    check(t.dims.size() == 2 && t.dims[1] == 4, "noise field tensor must have shape [N, 4]");

    nlohmann::json doc = {{"primitives", nlohmann::json::array()}, {"cameras", meta.at("views")}};
    const SceneDocument cams = parseSceneDocument(doc);
    std::vector<WeightedNoiseField::ViewRecord> records;
    std::size_t offset = 0;
    for (const auto &view: cams.cameras) {
        WeightedNoiseField::ViewRecord rec{view, view.width(Resolution::Latent), view.height(Resolution::Latent), {}, {}, {}};
        anchorRecord(rec, scene);
        rec.samples.resize(rec.anchor.size() * std::size_t(channels));
        for (auto &s: rec.samples) {
            check(offset + 4 <= t.values.size(), "noise field tensor too short");
            const auto bits = (std::uint64_t(t.values[offset + 1]) << 36) | (std::uint64_t(t.values[offset + 2]) << 18) |
                              std::uint64_t(t.values[offset + 3]);
            s.value  = t.values[offset];
            s.weight = std::ldexp(double(bits), -53);
            offset += 4;
        }
        records.push_back(std::move(rec));
    }
    check(offset == t.values.size(), "noise field tensor has extra entries");
    return WeightedNoiseField(seed, channels, std::move(records));
}

int
GaussianityReport::minimumPasses() const {
    return passes.empty() ? 0 : *std::ranges::min_element(passes);
}

GaussianityReport
verifyGaussian(const Scene &scene, std::span<const CameraView> views, const CameraView &target,
               std::span<const std::uint64_t> seeds, int channels, double alpha) {
    check(!seeds.empty(), "gaussianity check needs at least one seed");
    GaussianityReport report;
    report.alpha = alpha;
    report.seeds.assign(seeds.begin(), seeds.end());
    report.passes.assign(std::size_t(channels), 0);
    std::vector<double> samples;
    for (const auto seed: seeds) {
        const auto field  = initField(scene, views, seed, channels);
        const Image noise = renderNoise(field, scene, target);
        auto &row         = report.pValues.emplace_back();
        for (int c = 0; c < channels; ++c) {
            samples.clear();
            for (int y = 0; y < noise.height(); ++y) {
                for (int x = 0; x < noise.width(); ++x) {
                    samples.push_back(noise.at(y, x, c));
                }
            }
            const auto ks = stats::ksTestStandardNormal(samples);
            row.push_back(ks.pValue);
            report.passes[std::size_t(c)] += ks.pValue >= alpha ? 1 : 0;
        }
        report.samplesPerChannel = samples.size();
    }
    return report;
}

} // namespace snk
