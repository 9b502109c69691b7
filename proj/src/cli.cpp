// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/cli.h"

#include "snk/consistency.h"
#include "snk/embedding.h"
#include "snk/geometry.h"
#include "snk/harness.h"
#include "snk/noise_field.h"
#include "snk/scene_io.h"
#include "snk/schedule.h"
#include "snk/surround.h"
#include "snk/tensor_io.h"
#include "snk/warp.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>

namespace snk {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct SceneArgs {
    std::string scene = "desk";
    int width         = 64;
    int height        = 64;
    int views         = 8;

    void
    add(CLI::App *app) {
        app->add_option("--scene", scene, "built-in scene name or scene JSON path")->capture_default_str();
        app->add_option("--width", width, "image width for built-in scenes")->capture_default_str();
        app->add_option("--height", height, "image height for built-in scenes")->capture_default_str();
        app->add_option("--views", views, "camera count for built-in scenes")->capture_default_str();
    }

    SceneDocument
    load() const {
        if (fs::exists(scene)) {
            return loadSceneDocument(scene);
        }
        return builtinScene(scene, width, height, views);
    }
};

Resolution
resolutionOf(bool latent) {
    return latent ? Resolution::Latent : Resolution::Full;
}

/// "ID=path" pairs for batch inputs.
std::vector<ViewImage>
loadViewImages(const SceneDocument &doc, const std::vector<std::string> &specs) {
    std::vector<ViewImage> out;
    for (const auto &s: specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("--image", "expected ID=path, got '" + s + "'");
        }
        const int id = std::stoi(s.substr(0, eq));
        out.push_back({doc.camera(id), readImageFile(s.substr(eq + 1))});
    }
    return out;
}

json
readJsonFile(const fs::path &path) {
    std::ifstream in(path);
    check(bool(in), "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw Error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::string
configKey(const CLI::Option *opt) {
    std::string name = opt->get_single_name();
    std::ranges::replace(name, '-', '_');
    return name;
}

/// Fills options the command line left unset from the config object.
void
applyConfig(CLI::App *app, const json &config) {
    for (auto *opt: app->get_options()) {
        if (opt->count() > 0 || opt->get_single_name() == "help" || opt->get_single_name() == "config") {
            continue;
        }
        const auto key = configKey(opt);
        if (!config.contains(key)) {
            continue;
        }
        const auto &value = config.at(key);
        auto add          = [&](const json &v) { opt->add_result(v.is_string() ? v.get<std::string>() : v.dump()); };
        if (value.is_array()) {
            for (const auto &v: value) {
                add(v);
            }
        } else {
            add(value);
        }
        opt->run_callback();
    }
}

class Cli {
public:
    Cli(std::ostream &out, std::ostream &err) : mOut(out), mErr(err) { build(); }

    int
    run(const std::vector<std::string> &args) {
        try {
            std::vector<std::string> reversed(args.rbegin(), args.rend());
            mApp.parse(reversed);
        } catch (const CLI::CallForHelp &e) {
            return mApp.exit(e, mOut, mErr);
        } catch (const CLI::CallForAllHelp &e) {
            return mApp.exit(e, mOut, mErr);
        } catch (const CLI::ParseError &e) {
            mErr << "error: " << e.what() << "\n\n" << usageFor(args);
            return kExitUsage;
        }

        CLI::App *leaf = &mApp;
        std::vector<CLI::App *> chain{leaf};
        while (!leaf->get_subcommands().empty()) {
            leaf = leaf->get_subcommands().front();
            chain.push_back(leaf);
        }
        try {
            if (!mConfigPath.empty()) {
                mConfig = readJsonFile(mConfigPath);
                check(mConfig.is_object(), "config file must hold a JSON object");
                if (!mHarnessCommands.contains(leaf)) {
                    for (auto *app: chain) {
                        applyConfig(app, mConfig);
                    }
                }
            }
            const auto it = mHandlers.find(leaf);
            if (it == mHandlers.end()) {
                mErr << leaf->help();
                return kExitUsage;
            }
            it->second();
            return kExitOk;
        } catch (const CLI::ParseError &e) {
            mErr << "error: " << e.what() << "\n\n" << leaf->help();
            return kExitUsage;
        } catch (const VerificationError &e) {
            mErr << "verification failed: " << e.what() << "\n";
            return kExitVerification;
        } catch (const std::exception &e) {
            mErr << "error: " << e.what() << "\n";
            return kExitRuntime;
        }
    }

private:
    std::string
    usageFor(const std::vector<std::string> &args) {
        // Show the help of the deepest command that was named correctly.
        CLI::App *app = &mApp;
        for (const auto &a: args) {
            CLI::App *next = nullptr;
            for (auto *sub: app->get_subcommands({})) {
                if (sub->get_name() == a) {
                    next = sub;
                }
            }
            if (!next) {
                break;
            }
            app = next;
        }
        return app->help();
    }

    void
    emit(const json &j) {
        if (mJson) {
            mOut << j.dump() << "\n";
            return;
        }
        if (!j.is_object()) {
            mOut << j.dump(2) << "\n";
            return;
        }
        for (const auto &[key, value]: j.items()) {
            mOut << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
        }
    }

    CLI::App *
    leaf(CLI::App *parent, const std::string &name, const std::string &description, std::function<void()> handler) {
        auto *app = parent->add_subcommand(name, description);
        mHandlers.emplace(app, std::move(handler));
        return app;
    }

    void
    build() {
        mApp.description("Surface-anchored multi-view noise, warping, consistency and distillation harness");
        mApp.name("snk");
        mApp.require_subcommand(1);
        mApp.fallthrough();
        mApp.add_option("--seed", mSeed, "seed for every random choice")->capture_default_str();
        mApp.add_flag("--json", mJson, "print results as JSON");
        mApp.add_option("--config", mConfigPath, "JSON config; command-line flags take precedence")
            ->check(CLI::ExistingFile);

        buildScene();
        buildNoise();
        buildWarp();
        buildConsist();
        buildSurround();
        buildEmbed();
        buildHarness();
    }

    void
    buildScene() {
        auto *group = mApp.add_subcommand("scene", "analytic scenes")->require_subcommand(1);
        auto *cmd   = leaf(group, "render-depth", "render a ray-distance depth map", [this] {
            const auto doc   = mSceneArgs.load();
            const auto depth = renderDepth(doc.scene, doc.camera(mViewId), resolutionOf(mLatent));
            writeImageFile(mOutPath, depth.toImage());
            const auto hits = std::ranges::count_if(depth.primitive, [](int p) { return p >= 0; });
            emit({{"view", mViewId},
                  {"width", depth.width},
                  {"height", depth.height},
                  {"hit_pixels", hits},
                  {"out", mOutPath}});
        });
        mSceneArgs.add(cmd);
        cmd->add_option("--view", mViewId, "camera id")->required();
        cmd->add_flag("--latent", mLatent, "render at latent resolution");
        cmd->add_option("--out", mOutPath, "output tensor file")->required();
    }

    WeightedNoiseField
    fieldFor(const SceneDocument &doc) {
        if (!mFieldPath.empty()) {
            return loadField(doc.scene, mFieldPath + ".snkt", mFieldPath + ".json");
        }
        return initField(doc.scene, doc.cameras, mSeed, mChannels);
    }

    void
    buildNoise() {
        auto *group = mApp.add_subcommand("noise", "structured noise fields")->require_subcommand(1);

        auto *render = leaf(group, "render", "render latent noise for one view", [this] {
            const auto doc   = mSceneArgs.load();
            const auto field = fieldFor(doc);
            const Image img  = renderNoise(field, doc.scene, doc.camera(mViewId));
            writeImageFile(mOutPath, img);
            if (!mSaveFieldPath.empty()) {
                saveField(field, mSaveFieldPath + ".snkt", mSaveFieldPath + ".json");
            }
            emit({{"view", mViewId},
                  {"seed", field.seed()},
                  {"shape", {img.height(), img.width(), img.channels()}},
                  {"out", mOutPath}});
        });
        mSceneArgs.add(render);
        render->add_option("--view", mViewId, "camera id")->required();
        render->add_option("--channels", mChannels, "noise channels")->capture_default_str();
        render->add_option("--field", mFieldPath, "load a saved field (path prefix)");
        render->add_option("--save-field", mSaveFieldPath, "save the field (path prefix)");
        render->add_option("--out", mOutPath, "output tensor file")->required();

        auto *verify = leaf(group, "verify-gaussian", "KS-test rendered noise against N(0,1) over seeds", [this] {
            const auto doc = mGaussArgs.load();
            std::vector<std::uint64_t> seeds;
            for (int t = 0; t < mTrials; ++t) {
                seeds.push_back(mSeed + std::uint64_t(t));
            }
            const auto report = verifyGaussian(doc.scene, doc.cameras, doc.camera(mViewId), seeds, mChannels, mAlpha);
            const int needed  = mMinPass >= 0 ? mMinPass : (95 * mTrials + 99) / 100;
            const bool ok     = report.minimumPasses() >= needed;
            emit({{"trials", mTrials},
                  {"alpha", mAlpha},
                  {"samples_per_channel", report.samplesPerChannel},
                  {"passes", report.passes},
                  {"required_passes", needed},
                  {"passed", ok},
                  {"p_values", report.pValues}});
            if (!ok) {
                throw VerificationError("a noise channel passed the KS test in " +
                                        std::to_string(report.minimumPasses()) + " of " + std::to_string(mTrials) +
                                        " trials, need " + std::to_string(needed));
            }
        });
        mGaussArgs.width  = 960;
        mGaussArgs.height = 720;
        mGaussArgs.add(verify);
        verify->add_option("--view", mViewId, "camera id")->capture_default_str();
        verify->add_option("--trials", mTrials, "number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
        verify->add_option("--alpha", mAlpha, "KS significance level")->capture_default_str();
        verify->add_option("--min-pass", mMinPass, "required passing trials per channel (default 95%)");
        verify->add_option("--channels", mChannels, "noise channels")->capture_default_str();

        auto *refresh = leaf(group, "refresh", "move a saved field onto a rescaled sphere", [this] {
            const auto doc = mSceneArgs.load();
            const auto field = fieldFor(doc);
            GeometryRamp ramp;
            ramp.primitive = mPrimitive;
            ramp.factor    = mRadiusFactor;
            ramp.steps     = 1;
            const Scene next = ramp.scenes(doc.scene).front().second;
            const auto refreshed = refreshGeometry(field, doc.scene, next);
            bool preserved = refreshed.views().size() == field.views().size();
            for (std::size_t i = 0; preserved && i < field.views().size(); ++i) {
                preserved = refreshed.views()[i].samples == field.views()[i].samples;
            }
            saveField(refreshed, mOutPath + ".snkt", mOutPath + ".json");
            emit({{"values_preserved", preserved},
                  {"anchored_before", field.anchoredCount()},
                  {"anchored_after", refreshed.anchoredCount()},
                  {"out", mOutPath}});
            if (!preserved) {
                throw VerificationError("noise values changed during refresh");
            }
        });
        mSceneArgs.add(refresh);
        refresh->add_option("--field", mFieldPath, "saved field path prefix (default: fresh field)");
        refresh->add_option("--channels", mChannels, "noise channels")->capture_default_str();
        refresh->add_option("--primitive", mPrimitive, "sphere primitive index")->capture_default_str();
        refresh->add_option("--radius-factor", mRadiusFactor, "new radius / old radius")->capture_default_str();
        refresh->add_option("--out", mOutPath, "output field path prefix")->required();

    }

    void
    buildWarp() {
        auto *group = mApp.add_subcommand("warp", "depth-based warping")->require_subcommand(1);

        auto *map = leaf(group, "map", "correspondence map between two views", [this] {
            const auto doc = mSceneArgs.load();
            const auto m = correspondences(doc.scene, doc.camera(mSrcId), doc.camera(mDstId), resolutionOf(mLatent));
            writeImageFile(mOutPath, m.toImage());
            const auto visible = std::ranges::count(m.visible, std::uint8_t{1});
            emit({{"src", mSrcId},
                  {"dst", mDstId},
                  {"visible", visible},
                  {"pixels", m.visible.size()},
                  {"out", mOutPath}});
        });
        mSceneArgs.add(map);
        map->add_option("--src", mSrcId, "source camera id")->required();
        map->add_option("--dst", mDstId, "destination camera id")->required();
        map->add_flag("--latent", mLatent, "latent resolution");
        map->add_option("--out", mOutPath, "output tensor file [H,W,4]")->required();

        auto *apply = leaf(group, "apply", "warp an image from one view into another", [this] {
            const auto doc   = mSceneArgs.load();
            const Image img  = readImageFile(mInPath);
            const auto &src  = doc.camera(mSrcId);
            const bool latent = img.width() != src.width();
            const auto m     = correspondences(doc.scene, src, doc.camera(mDstId), resolutionOf(latent));
            const auto warped = warpImage(img, m, mSampling == "nearest" ? Sampling::Nearest : Sampling::Bilinear);
            writeImageFile(mOutPath, warped.image);
            if (!mMaskPath.empty()) {
                writeImageFile(mMaskPath, warped.mask);
            }
            emit({{"src", mSrcId}, {"dst", mDstId}, {"sampling", mSampling}, {"out", mOutPath}});
        });
        mSceneArgs.add(apply);
        apply->add_option("--src", mSrcId, "source camera id")->required();
        apply->add_option("--dst", mDstId, "destination camera id")->required();
        apply->add_option("--image", mInPath, "source image tensor")->required()->check(CLI::ExistingFile);
        apply->add_option("--sampling", mSampling, "nearest or bilinear")
            ->capture_default_str()
            ->check(CLI::IsMember({"nearest", "bilinear"}));
        apply->add_option("--mask-out", mMaskPath, "visibility mask output");
        apply->add_option("--out", mOutPath, "output tensor file")->required();

        auto *area = leaf(group, "area", "per-pixel surface area S and weight 1/S", [this] {
            const auto doc = mSceneArgs.load();
            const auto w   = pixelArea(doc.scene, doc.camera(mViewId), resolutionOf(mLatent));
            writeImageFile(mOutPath, w.toImage());
            const auto finite = std::ranges::count_if(w.area, [](double a) { return std::isfinite(a); });
            emit({{"view", mViewId}, {"finite_pixels", finite}, {"out", mOutPath}});
        });
        mSceneArgs.add(area);
        area->add_option("--view", mViewId, "camera id")->required();
        area->add_flag("--latent", mLatent, "latent resolution");
        area->add_option("--out", mOutPath, "output tensor file [H,W,2]")->required();
    }

    ViewBatch
    batchFromArgs(const SceneDocument &doc) {
        ViewBatch batch;
        batch.views = loadViewImages(doc, mImageSpecs);
        if (mK > 0 && mSurroundCount > 0) {
            batch.meta.k             = mK;
            batch.meta.surroundCount = mSurroundCount;
        }
        return batch;
    }

    void
    buildConsist() {
        auto *group = mApp.add_subcommand("consist", "reference views and consistency scores")->require_subcommand(1);

        auto *refs = leaf(group, "build-refs", "weighted-average reference view per input", [this] {
            const auto doc = mSceneArgs.load();
            WarpCache cache(doc.scene);
            const auto references = buildReferenceViews(batchFromArgs(doc), cache);
            fs::create_directories(mOutDir);
            json written = json::array();
            for (const auto &v: references.views) {
                const auto path = fs::path(mOutDir) / ("ref_" + std::to_string(v.view.id()) + ".snkt");
                writeImageFile(path, v.image);
                written.push_back(path.string());
            }
            emit({{"views", references.size()}, {"outputs", written}});
        });
        auto *score = leaf(group, "score", "cross-view consistency score of a batch", [this] {
            const auto doc = mSceneArgs.load();
            WarpCache cache(doc.scene);
            emit({{"score", consistencyScore(batchFromArgs(doc), cache)}, {"views", mImageSpecs.size()}});
        });
        for (auto *cmd: {refs, score}) {
            mSceneArgs.add(cmd);
            cmd->add_option("--image", mImageSpecs, "ID=tensor path, repeatable")->required();
            cmd->add_option("--k", mK, "surround k the batch came from (checks (4k-3)n views)");
            cmd->add_option("--n", mSurroundCount, "number of surrounding canvases");
        }
        refs->add_option("--out-dir", mOutDir, "output directory")->required();
    }

    SurroundLayout
    layoutFromArgs() const {
        if (!mLayoutPath.empty()) {
            return SurroundLayout::fromJson(readJsonFile(mLayoutPath));
        }
        const LayoutParams params{mRefWidth, mRefHeight, mHSplit, mVSplit};
        return makeLayout(mK, mPortrait ? Orientation::Portrait : Orientation::Landscape, params);
    }

    void
    addLayoutOptions(CLI::App *cmd) {
        cmd->add_option("--k", mK, "views per row; 4(k-1) references")->capture_default_str();
        cmd->add_flag("--portrait", mPortrait, "portrait orientation");
        cmd->add_option("--ref-width", mRefWidth, "reference slot width")->capture_default_str();
        cmd->add_option("--ref-height", mRefHeight, "reference slot height")->capture_default_str();
        cmd->add_option("--h-splitter", mHSplit, "splitter height between rows")->capture_default_str();
        cmd->add_option("--v-splitter", mVSplit, "splitter width between columns")->capture_default_str();
    }

    void
    buildSurround() {
        auto *group = mApp.add_subcommand("surround", "surrounding-view canvases")->require_subcommand(1);

        auto *layout = leaf(group, "layout", "print the canvas layout", [this] {
            const auto l = layoutFromArgs();
            mOut << (mJson ? l.toJson().dump() : l.toJson().dump(2)) << "\n";
        });
        addLayoutOptions(layout);

        auto *composeCmd = leaf(group, "compose", "compose main and reference images into a canvas", [this] {
            const auto l     = layoutFromArgs();
            const Image main = readImageFile(mMainPath);
            std::vector<Image> refs;
            for (const auto &p: mRefPaths) {
                refs.push_back(readImageFile(p));
            }
            const Image canvas =
                compose(l, main, refs, mMargin ? std::optional<float>(*mMargin) : std::nullopt);
            writeImageFile(mOutPath, canvas);
            if (!mPreviewPath.empty()) {
                writeViewableImage(mPreviewPath, canvas);
            }
            emit({{"canvas", {canvas.width(), canvas.height()}}, {"out", mOutPath}});
        });
        addLayoutOptions(composeCmd);
        composeCmd->add_option("--layout", mLayoutPath, "layout JSON instead of --k/sizes");
        composeCmd->add_option("--main", mMainPath, "main view tensor")->required();
        composeCmd->add_option("--ref", mRefPaths, "reference tensor, repeatable in slot order")->required();
        composeCmd->add_option("--margin", mMargin, "margin value (default 128/255)");
        composeCmd->add_option("--preview", mPreviewPath, "8-bit PPM preview");
        composeCmd->add_option("--out", mOutPath, "output canvas tensor")->required();

        auto *decomposeCmd = leaf(group, "decompose", "split a canvas into main and reference images", [this] {
            const auto l     = layoutFromArgs();
            const auto parts = decompose(l, readImageFile(mInPath));
            fs::create_directories(mOutDir);
            writeImageFile(fs::path(mOutDir) / "main.snkt", parts.main);
            for (std::size_t i = 0; i < parts.refs.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "ref_%02zu.snkt", i);
                writeImageFile(fs::path(mOutDir) / name, parts.refs[i]);
            }
            emit({{"refs", parts.refs.size()}, {"out_dir", mOutDir}});
        });
        addLayoutOptions(decomposeCmd);
        decomposeCmd->add_option("--layout", mLayoutPath, "layout JSON instead of --k/sizes");
        decomposeCmd->add_option("--canvas", mInPath, "canvas tensor")->required()->check(CLI::ExistingFile);
        decomposeCmd->add_option("--out-dir", mOutDir, "output directory")->required();

        auto *select = leaf(group, "select", "choose reference views for a main view", [this] {
            const auto doc = mSceneArgs.load();
            const int count = mCount >= 0 ? mCount : 4 * (mK - 1);
            const auto sel  = selectRefs(doc.camera(mViewId), doc.cameras, doc.scene, count, mSeed);
            json j = {{"main", mViewId},
                      {"view_ids", sel.viewIds},
                      {"random_count", sel.randomCount},
                      {"overlap_count", sel.overlapCount},
                      {"overlaps", sel.overlaps}};
            j["warning"] = sel.warning ? json(*sel.warning) : json(nullptr);
            emit(j);
        });
        mSceneArgs.add(select);
        select->add_option("--main", mViewId, "main camera id")->required();
        select->add_option("--count", mCount, "number of references (default 4(k-1))");
        select->add_option("--k", mK, "surround k")->capture_default_str();
    }

    void
    buildEmbed() {
        auto *group = mApp.add_subcommand("embed", "hash-grid positional embedding")->require_subcommand(1);
        auto *image = leaf(group, "image", "per-pixel embedding of visible surface points", [this] {
            const auto doc = mSceneArgs.load();
            HashGridConfig config;
            if (!mGridPath.empty()) {
                config = HashGridConfig::fromJson(readJsonFile(mGridPath));
            }
            if (mSeedGiven()) {
                config.seed = mSeed;
            }
            const HashGrid grid(config);
            const Image features = featureImage(grid, doc.scene, doc.camera(mViewId), resolutionOf(mLatent));
            writeImageFile(mOutPath, features);
            emit({{"view", mViewId},
                  {"shape", {features.height(), features.width(), features.channels()}},
                  {"out", mOutPath}});
        });
        mSceneArgs.add(image);
        image->add_option("--view", mViewId, "camera id")->required();
        image->add_flag("--latent", mLatent, "latent resolution");
        image->add_option("--grid", mGridPath, "grid config JSON")->check(CLI::ExistingFile);
        image->add_option("--out", mOutPath, "output tensor file")->required();
    }

    bool mSeedGiven() const { return mApp.get_option("--seed")->count() > 0 || mConfig.contains("seed"); }

    void
    runHarness(bool c2f) {
        json config = mConfig.is_object() ? mConfig : json::object();
        SceneArgs scene = mHarnessArgs;
        auto pick = [&](const char *flag, const char *key, auto &value) {
            if (mCurrent->get_option(flag)->count() > 0) {
                config[key] = value;
            }
        };
        pick("--scene", "scene", scene.scene);
        pick("--width", "width", scene.width);
        pick("--height", "height", scene.height);
        pick("--views", "views", scene.views);
        pick("--epochs", "epochs", mEpochs);
        pick("--k", "k", mK);
        pick("--slots", "slots", mSlots);
        pick("--n-workers", "n_workers", mWorkers);
        pick("--editor", "editor", mEditorName);
        if (mApp.get_option("--seed")->count() > 0) {
            config["seed"] = mSeed;
        }
        if (mCurrent->get_option("--async")->count() > 0) {
            config["deterministic_replay"] = false;
        }
        if (config.contains("epochs")) {
            config.erase("schedule");
        }
        scene.scene  = config.value("scene", scene.scene);
        scene.width  = config.value("width", scene.width);
        scene.height = config.value("height", scene.height);
        scene.views  = config.value("views", scene.views);

        RunConfig run = RunConfig::fromJson(config);
        if (std::getenv("SNK_THREADS")) {
            run.workers = std::min<int>(run.workers, int(maxThreads()));
        }
        const auto doc    = scene.load();
        const auto report = c2f ? coarseToFine(doc.scene, doc.cameras, run) : snk::run(doc.scene, doc.cameras, run);

        const auto lines = report.toJsonLines();
        if (!mOutDir.empty()) {
            fs::create_directories(mOutDir);
            std::ofstream jl(fs::path(mOutDir) / "report.jsonl");
            for (const auto &l: lines) {
                jl << l.dump() << "\n";
            }
            for (const auto &r: report.renders) {
                writeImageFile(fs::path(mOutDir) / ("render_" + std::to_string(r.view.id()) + ".snkt"), r.image);
            }
        }
        if (mJson) {
            mOut << json(lines).dump() << "\n";
        } else {
            for (const auto &l: lines) {
                if (l["type"] != "epoch") {
                    mOut << l.dump() << "\n";
                }
            }
        }
        if (c2f) {
            for (const auto &r: report.refreshes) {
                if (!r.valuesPreserved) {
                    throw VerificationError("noise values changed at the refresh in epoch " + std::to_string(r.epoch));
                }
            }
        }
    }

    void
    buildHarness() {
        auto *group = mApp.add_subcommand("harness", "distillation pipeline simulation")->require_subcommand(1);
        auto *runCmd = leaf(group, "run", "run the staged schedule", [this] { runHarness(false); });
        auto *c2fCmd = leaf(group, "c2f", "coarse-to-fine run with a scripted geometry change", [this] {
            runHarness(true);
        });
        mHarnessArgs.scene = "desk-solid";
        mHarnessArgs.views = 12;
        for (auto *cmd: {runCmd, c2fCmd}) {
            mHarnessArgs.add(cmd);
            cmd->add_option("--epochs", mEpochs, "total epochs (standard schedule scaled)");
            cmd->add_option("--k", mK, "surround k");
            cmd->add_option("--slots", mSlots, "surrounding canvases per epoch (n)");
            cmd->add_option("--n-workers", mWorkers, "generation threads");
            cmd->add_option("--editor", mEditorName, "identity or color-matrix");
            cmd->add_flag("--async", "run the fitter on its own thread instead of deterministic replay");
            cmd->add_option("--out-dir", mOutDir, "write report.jsonl and final renders here");
            cmd->parse_complete_callback([this, cmd] { mCurrent = cmd; });
            mHarnessCommands.insert(cmd);
        }
    }

    std::ostream &mOut;
    std::ostream &mErr;
    CLI::App mApp;
    std::map<CLI::App *, std::function<void()>> mHandlers;
    std::set<CLI::App *> mHarnessCommands;
    CLI::App *mCurrent = nullptr;
    json mConfig       = json::object();

    std::uint64_t mSeed = 0;
    bool mJson          = false;
    std::string mConfigPath;

    SceneArgs mSceneArgs;
    SceneArgs mGaussArgs;
    SceneArgs mHarnessArgs;
    int mViewId = 0;
    int mSrcId  = 0;
    int mDstId  = 1;
    bool mLatent = false;
    std::string mOutPath;
    std::string mInPath;
    std::string mMaskPath;
    std::string mOutDir;
    std::string mSampling = "bilinear";

    int mChannels = 4;
    std::string mFieldPath;
    std::string mSaveFieldPath;
    int mTrials   = 100;
    double mAlpha = 0.01;
    int mMinPass  = -1;
    int mPrimitive = 1;
    double mRadiusFactor = 1.1;

    std::vector<std::string> mImageSpecs;
    int mK             = 5;
    int mSurroundCount = 0;

    bool mPortrait = false;
    int mRefWidth  = 224;
    int mRefHeight = 168;
    int mHSplit    = 6;
    int mVSplit    = 8;
    std::string mLayoutPath;
    std::string mMainPath;
    std::vector<std::string> mRefPaths;
    std::optional<float> mMargin;
    std::string mPreviewPath;
    int mCount = -1;

    std::string mGridPath;

    int mEpochs  = 200;
    int mSlots   = 2;
    int mWorkers = 2;
    std::string mEditorName = "color-matrix";
};

} // namespace

int
dispatch(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    Cli cli(out, err);
    return cli.run(args);
}

} // namespace snk
