// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/surround.h"

#include "snk/rng.h"
#include "snk/warp.h"

#include <algorithm>
#include <numeric>

namespace snk {

namespace {

constexpr std::uint64_t kSelectTag = 0x5e1ec7;

Rect
transposed(const Rect &r) {
    return {r.y, r.x, r.height, r.width};
}

template <typename T>
void
shuffle(std::vector<T> &items, CounterRng &rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.below(i)]);
    }
}

} // namespace

nlohmann::json
SurroundLayout::toJson() const {
    auto rect = [](const Rect &r) { return nlohmann::json::array({r.x, r.y, r.width, r.height}); };
    nlohmann::json refsJson = nlohmann::json::array();
    for (const auto &slot: refs) {
        refsJson.push_back({{"rect", rect(slot.rect)}, {"view_id", slot.viewId}});
    }
    return {{"k", k},
            {"orientation", orientation == Orientation::Landscape ? "landscape" : "portrait"},
            {"canvas", {canvasWidth, canvasHeight}},
            {"main", {{"rect", rect(main.rect)}, {"view_id", main.viewId}}},
            {"refs", refsJson},
            {"horizontal_splitter", horizontalSplitter},
            {"vertical_splitter", verticalSplitter},
            {"margin_color", marginColor}};
}

SurroundLayout
SurroundLayout::fromJson(const nlohmann::json &j) {
    auto rect = [](const nlohmann::json &a) {
        return Rect{a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>(), a.at(3).get<int>()};
    };
    try {
        SurroundLayout l;
        l.k           = j.at("k").get<int>();
        l.orientation = j.at("orientation").get<std::string>() == "portrait" ? Orientation::Portrait
                                                                           : Orientation::Landscape;
        l.canvasWidth  = j.at("canvas").at(0).get<int>();
        l.canvasHeight = j.at("canvas").at(1).get<int>();
        l.main         = {rect(j.at("main").at("rect")), j.at("main").value("view_id", -1)};
        for (const auto &s: j.at("refs")) {
            l.refs.push_back({rect(s.at("rect")), s.value("view_id", -1)});
        }
        l.horizontalSplitter = j.at("horizontal_splitter").get<int>();
        l.verticalSplitter   = j.at("vertical_splitter").get<int>();
        l.marginColor        = j.value("margin_color", kDefaultMarginColor);
        return l;
    } catch (const nlohmann::json::exception &e) {
        throw Error(std::string("malformed layout: ") + e.what());
    }
}

SurroundLayout
makeLayout(int k, Orientation orientation, const LayoutParams &params) {
    if (k < 3) {
        throw Error("surround layout needs k >= 3");
    }
    check(params.refWidth > 0 && params.refHeight > 0 && params.horizontalSplitter >= 0 &&
              params.verticalSplitter >= 0,
          "invalid layout parameters");
    const int rw = params.refWidth;
    const int rh = params.refHeight;
    const int sv = params.verticalSplitter;
    const int sh = params.horizontalSplitter;

    SurroundLayout l;
    l.k                  = k;
    l.orientation        = Orientation::Landscape;
    l.canvasWidth        = k * rw + (k - 1) * sv;
    l.canvasHeight       = k * rh + (k - 1) * sh;
    l.horizontalSplitter = sh;
    l.verticalSplitter   = sv;
    l.main.rect = {rw + sv, rh + sh, (k - 2) * rw + (k - 3) * sv, (k - 2) * rh + (k - 3) * sh};
    for (int i = 0; i < k; ++i) {
        l.refs.push_back({{i * (rw + sv), 0, rw, rh}, -1});
    }
    for (int i = 0; i < k; ++i) {
        l.refs.push_back({{i * (rw + sv), l.canvasHeight - rh, rw, rh}, -1});
    }
    for (int j = 0; j < k - 2; ++j) {
        l.refs.push_back({{0, rh + sh + j * (rh + sh), rw, rh}, -1});
    }
    for (int j = 0; j < k - 2; ++j) {
        l.refs.push_back({{l.canvasWidth - rw, rh + sh + j * (rh + sh), rw, rh}, -1});
    }

    if (orientation == Orientation::Portrait) {
        l.orientation = Orientation::Portrait;
        std::swap(l.canvasWidth, l.canvasHeight);
        std::swap(l.horizontalSplitter, l.verticalSplitter);
        l.main.rect = transposed(l.main.rect);
        for (auto &slot: l.refs) {
            slot.rect = transposed(slot.rect);
        }
    }
    return l;
}

Image
compose(const SurroundLayout &layout, const Image &main, std::span<const Image> refs, std::optional<float> marginColor) {
    if (refs.size() != layout.refs.size()) {
        throw Error("compose: expected " + std::to_string(layout.refs.size()) + " reference images, got " +
                    std::to_string(refs.size()));
    }
    auto fits = [](const Image &img, const Rect &r) { return img.width() == r.width && img.height() == r.height; };
    if (!fits(main, layout.main.rect)) {
        throw Error("compose: main image does not match its slot size");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (!fits(refs[i], layout.refs[i].rect) || refs[i].channels() != main.channels()) {
            throw Error("compose: reference image " + std::to_string(i) + " does not match its slot");
        }
    }
    Image canvas(layout.canvasHeight, layout.canvasWidth, main.channels(), marginColor.value_or(layout.marginColor));
    canvas.paste(main, layout.main.rect.x, layout.main.rect.y);
    for (std::size_t i = 0; i < refs.size(); ++i) {
        canvas.paste(refs[i], layout.refs[i].rect.x, layout.refs[i].rect.y);
    }
    return canvas;
}

Decomposed
decompose(const SurroundLayout &layout, const Image &canvas) {
    if (canvas.width() != layout.canvasWidth || canvas.height() != layout.canvasHeight) {
        throw Error("decompose: canvas size does not match layout");
    }
    Decomposed out;
    const Rect &m = layout.main.rect;
    out.main      = canvas.crop(m.x, m.y, m.width, m.height);
    out.refs.reserve(layout.refs.size());
    for (const auto &slot: layout.refs) {
        out.refs.push_back(canvas.crop(slot.rect.x, slot.rect.y, slot.rect.width, slot.rect.height));
    }
    return out;
}

RefSelection
selectRefs(const CameraView &main, std::span<const CameraView> pool, const Scene &scene, int count,
           std::uint64_t seed, WarpCache *cache) {
    check(count >= 0, "reference count must be non-negative");
    std::vector<const CameraView *> candidates;
    for (const auto &v: pool) {
        if (v.id() != main.id()) {
            candidates.push_back(&v);
        }
    }
    if (int(candidates.size()) < count) {
        throw Error("reference pool has " + std::to_string(candidates.size()) + " views, need " +
                    std::to_string(count));
    }

    std::optional<WarpCache> localCache;
    if (!cache) {
        localCache.emplace(scene);
        cache = &*localCache;
    }
    const auto mainDepth = cache->depth(main, Resolution::Latent);
    std::vector<double> overlap(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        overlap[i] = overlapFraction(*cache->map(main, *candidates[i], Resolution::Latent), *mainDepth);
    }

    CounterRng rng(seed, {kSelectTag, std::uint64_t(std::int64_t(main.id())), std::uint64_t(count)});
    RefSelection out;
    out.randomCount = (2 * count + 4) / 5; // ceil(0.4 * count)

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, rng);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + out.randomCount);
    std::vector<std::size_t> rest(order.begin() + out.randomCount, order.end());

    std::vector<std::size_t> eligible;
    std::vector<std::size_t> ineligible;
    for (const auto i: rest) {
        (overlap[i] >= kMinRefOverlap ? eligible : ineligible).push_back(i);
    }
    const std::size_t needed = std::size_t(count - out.randomCount);
    // `rest` is already a uniform permutation, so its prefix is a uniform draw.
    const std::size_t take = std::min(needed, eligible.size());
    chosen.insert(chosen.end(), eligible.begin(), eligible.begin() + std::ptrdiff_t(take));
    out.overlapCount = int(take);
    if (take < needed) {
        std::ranges::stable_sort(ineligible, [&](std::size_t a, std::size_t b) {
            return overlap[a] != overlap[b] ? overlap[a] > overlap[b] : candidates[a]->id() < candidates[b]->id();
        });
        chosen.insert(chosen.end(), ineligible.begin(), ineligible.begin() + std::ptrdiff_t(needed - take));
        out.warning = "only " + std::to_string(take) + " of " + std::to_string(needed) +
                      " overlap-constrained references reached 20% overlap; filled by highest overlap";
    }

    shuffle(chosen, rng);
    for (const auto i: chosen) {
        out.viewIds.push_back(candidates[i]->id());
        out.overlaps.push_back(overlap[i]);
    }
    return out;
}

} // namespace snk
