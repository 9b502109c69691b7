// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/consistency.h"

#include <algorithm>

namespace snk {

void
ViewBatch::validate() const {
    if (views.empty()) {
        throw Error("empty view batch");
    }
    const int channels = views.front().image.channels();
    for (const auto &v: views) {
        check(v.image.channels() == channels, "batch images must share a channel count");
        imageResolution(v);
    }
    if (meta.k && meta.surroundCount) {
        const std::size_t expected = std::size_t(4 * *meta.k - 3) * std::size_t(*meta.surroundCount);
        check(views.size() == expected, "batch holds " + std::to_string(views.size()) + " views, expected (4k-3)n = " +
                                            std::to_string(expected));
    }
}

Resolution
imageResolution(const ViewImage &entry) {
    const auto &v = entry.view;
    const auto &i = entry.image;
    if (i.width() == v.width() && i.height() == v.height()) {
        return Resolution::Full;
    }
    if (i.width() == v.width(Resolution::Latent) && i.height() == v.height(Resolution::Latent)) {
        return Resolution::Latent;
    }
    throw Error("image for view " + std::to_string(v.id()) + " matches neither its full nor latent resolution");
}

ViewBatch
buildReferenceViews(const ViewBatch &batch, const Scene &scene, std::span<const PixelWeightMap> weights,
                    WarpCache *cache) {
    batch.validate();
    check(weights.size() == batch.size(), "one weight map per batch entry required");
    std::optional<WarpCache> local;
    if (!cache) {
        local.emplace(scene);
        cache = &*local;
    }
    const Resolution res = imageResolution(batch.views.front());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        check(imageResolution(batch.views[i]) == res, "batch mixes full and latent resolution images");
        check(weights[i].width == batch.views[i].image.width() && weights[i].height == batch.views[i].image.height(),
              "weight map does not match its image");
    }

    ViewBatch out;
    out.meta = batch.meta;
    out.views.resize(batch.size(), batch.views.front());
    parallelFor(batch.size(), [&](std::size_t t) {
        const auto &target   = batch.views[t];
        const Image &own     = target.image;
        const int channels   = own.channels();
        const auto ownDepth  = cache->depth(target.view, res);
        std::vector<double> weightSum(own.pixelCount(), 0.0);
        std::vector<double> shifted(own.pixelCount() * channels, 0.0);

        for (std::size_t u = 0; u < batch.size(); ++u) {
            if (u == t) {
                continue;
            }
            const auto &source = batch.views[u];
            const auto map     = cache->map(source.view, target.view, res);
            const auto &srcW   = weights[u];
            for (int y = 0; y < own.height(); ++y) {
                for (int x = 0; x < own.width(); ++x) {
                    const std::size_t q = map->dstIndex(x, y);
                    if (!map->pullVisible[q]) {
                        continue;
                    }
                    const auto taps     = BilinearTaps::at(map->pullCoord[q]);
                    const auto ok       = map->pullTaps[q];
                    const double w      = taps.interpolate(ok, [&](int sx, int sy) { return srcW.weightAt(sx, sy); });
                    if (!(w > 0.0)) {
                        continue;
                    }
                    weightSum[q] += w;
                    for (int c = 0; c < channels; ++c) {
                        const double v = taps.interpolate(
                            ok, [&](int sx, int sy) { return double(source.image.at(sy, sx, c)); });
                        shifted[q * channels + c] += w * (v - own.at(y, x, c));
                    }
                }
            }
        }

        Image ref = own;
        for (int y = 0; y < own.height(); ++y) {
            for (int x = 0; x < own.width(); ++x) {
                const std::size_t q = std::size_t(y) * own.width() + x;
                if (weightSum[q] <= 0.0 || !ownDepth->hit(x, y)) {
                    continue;
                }
                const double total = weightSum[q] + weights[t].weightAt(x, y);
                for (int c = 0; c < channels; ++c) {
                    ref.at(y, x, c) = float(own.at(y, x, c) + shifted[q * channels + c] / total);
                }
            }
        }
        out.views[t] = ViewImage{target.view, std::move(ref)};
    });
    return out;
}

ViewBatch
buildReferenceViews(const ViewBatch &batch, WarpCache &cache) {
    batch.validate();
    std::vector<PixelWeightMap> weights;
    weights.reserve(batch.size());
    for (const auto &v: batch.views) {
        weights.push_back(*cache.weights(v.view, imageResolution(v)));
    }
    return buildReferenceViews(batch, cache.scene(), weights, &cache);
}

std::vector<Image>
reassembleSurround(const ViewBatch &references, std::span<const SurroundLayout> layouts) {
    auto lookup = [&](int viewId, const Rect &slot) {
        for (const auto &v: references.views) {
            if (v.view.id() == viewId) {
                if (v.image.width() == slot.width && v.image.height() == slot.height) {
                    return v.image;
                }
                return resizeNearest(v.image, slot.height, slot.width);
            }
        }
        throw Error("reference view " + std::to_string(viewId) + " missing from batch");
    };
    std::vector<Image> canvases;
    canvases.reserve(layouts.size());
    for (const auto &layout: layouts) {
        const Image main = lookup(layout.main.viewId, layout.main.rect);
        std::vector<Image> refs;
        refs.reserve(layout.refs.size());
        for (const auto &slot: layout.refs) {
            refs.push_back(lookup(slot.viewId, slot.rect));
        }
        canvases.push_back(compose(layout, main, refs));
    }
    return canvases;
}

double
consistencyScore(const ViewBatch &batch, WarpCache &cache) {
    batch.validate();
    check(batch.size() >= 2, "consistency score needs at least two views");
    const Resolution res = imageResolution(batch.views.front());
    double weighted = 0.0;
    double total    = 0.0;
    for (std::size_t t = 0; t < batch.size(); ++t) {
        const auto &target = batch.views[t];
        check(imageResolution(target) == res, "batch mixes full and latent resolution images");
        const auto weights = cache.weights(target.view, res);
        const int channels = target.image.channels();
        for (std::size_t u = 0; u < batch.size(); ++u) {
            if (u == t) {
                continue;
            }
            const auto &source = batch.views[u];
            const auto map     = cache.map(source.view, target.view, res);
            for (int y = 0; y < target.image.height(); ++y) {
                for (int x = 0; x < target.image.width(); ++x) {
                    const std::size_t q = map->dstIndex(x, y);
                    const double w      = weights->weightAt(x, y);
                    if (!map->pullVisible[q] || !(w > 0.0)) {
                        continue;
                    }
                    const auto taps = BilinearTaps::at(map->pullCoord[q]);
                    double sq       = 0.0;
                    for (int c = 0; c < channels; ++c) {
                        const double v = taps.interpolate(
                            map->pullTaps[q], [&](int sx, int sy) { return double(source.image.at(sy, sx, c)); });
                        const double d = target.image.at(y, x, c) - v;
                        sq += d * d;
                    }
                    weighted += w * sq / channels;
                    total += w;
                }
            }
        }
    }
    if (total <= 0.0) {
        throw Error("disjoint views");
    }
    return weighted / total;
}

double
consistencyScore(const ViewBatch &batch, const Scene &scene) {
    WarpCache cache(scene);
    return consistencyScore(batch, cache);
}

double
MseLoss::operator()(const Image &a, const Image &b) const {
    return meanSquaredError(a, b);
}

Image
boxDownsample(const Image &image) {
    const int h = image.height() / 2;
    const int w = image.width() / 2;
    Image out(h, w, image.channels());
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                out.at(y, x, c) = 0.25f * (image.at(2 * y, 2 * x, c) + image.at(2 * y, 2 * x + 1, c) +
                                           image.at(2 * y + 1, 2 * x, c) + image.at(2 * y + 1, 2 * x + 1, c));
            }
        }
    }
    return out;
}

double
PyramidLoss::operator()(const Image &a, const Image &b) const {
    check(a.sameShape(b), "loss inputs must have the same shape");
    Image la = a;
    Image lb = b;
    double sum = 0.0;
    int used   = 0;
    for (int level = 0; level < mLevels && la.width() > 0 && la.height() > 0; ++level) {
        sum += meanSquaredError(la, lb);
        ++used;
        la = boxDownsample(la);
        lb = boxDownsample(lb);
    }
    return used == 0 ? 0.0 : sum / used;
}

std::unique_ptr<ImageLoss>
makeLoss(const std::string &name) {
    if (name == "mse") {
        return std::make_unique<MseLoss>();
    }
    if (name == "pyramid") {
        return std::make_unique<PyramidLoss>(3);
    }
    throw Error("unknown loss '" + name + "'");
}

} // namespace snk
