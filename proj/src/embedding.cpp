// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/embedding.h"

#include "snk/rng.h"

#include <cmath>

namespace snk {

namespace {

constexpr std::uint32_t kPrimeY = 2654435761u;
constexpr std::uint32_t kPrimeZ = 805459861u;
constexpr float kFeatureRange   = 1e-2f;

Vec3
readVec(const nlohmann::json &j, const char *key, const Vec3 &fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    return {j.at(key)[0].get<double>(), j.at(key)[1].get<double>(), j.at(key)[2].get<double>()};
}

} // namespace

HashGridConfig
HashGridConfig::fromJson(const nlohmann::json &j) {
    HashGridConfig c;
    c.levels         = j.value("levels", c.levels);
    c.baseResolution = j.value("base_resolution", c.baseResolution);
    c.growth         = j.value("growth", c.growth);
    c.tableSize      = j.value("table_size", c.tableSize);
    c.featureDim     = j.value("feature_dim", c.featureDim);
    c.boundsMin      = readVec(j, "bounds_min", c.boundsMin);
    c.boundsMax      = readVec(j, "bounds_max", c.boundsMax);
    c.seed           = j.value("seed", c.seed);
    return c;
}

nlohmann::json
HashGridConfig::toJson() const {
    return {{"levels", levels},
            {"base_resolution", baseResolution},
            {"growth", growth},
            {"table_size", tableSize},
            {"feature_dim", featureDim},
            {"bounds_min", {boundsMin.x(), boundsMin.y(), boundsMin.z()}},
            {"bounds_max", {boundsMax.x(), boundsMax.y(), boundsMax.z()}},
            {"seed", seed}};
}

HashGrid::HashGrid(const HashGridConfig &config) : mConfig(config) {
    check(config.levels >= 1, "hash grid needs at least one level");
    check(config.featureDim >= 1, "hash grid feature dimension must be >= 1");
    check(config.tableSize >= 1 && (config.tableSize & (config.tableSize - 1)) == 0,
          "hash table size must be a power of two");
    check(config.baseResolution >= 1 && config.growth >= 1.0, "invalid hash grid resolutions");
    check((config.boundsMax - config.boundsMin).minCoeff() > 0.0, "hash grid bounds must be non-degenerate");
    for (int l = 0; l < config.levels; ++l) {
        mResolutions.push_back(int(std::floor(config.baseResolution * std::pow(config.growth, l))));
    }
    mTable.resize(std::size_t(config.levels) * config.tableSize * config.featureDim);
    for (int l = 0; l < config.levels; ++l) {
        for (std::uint32_t e = 0; e < config.tableSize; ++e) {
            CounterRng rng(config.seed, {0xe3bedULL, std::uint64_t(l), e});
            for (int f = 0; f < config.featureDim; ++f) {
                mTable[(std::size_t(l) * config.tableSize + e) * config.featureDim + f] =
                    float((2.0 * rng.uniform() - 1.0) * kFeatureRange);
            }
        }
    }
}

std::uint32_t
HashGrid::hash(std::int64_t x, std::int64_t y, std::int64_t z) const {
    const std::uint32_t h = std::uint32_t(x) ^ (std::uint32_t(y) * kPrimeY) ^ (std::uint32_t(z) * kPrimeZ);
    return h & (mConfig.tableSize - 1);
}

std::vector<float>
HashGrid::cornerFeature(int level, std::int64_t x, std::int64_t y, std::int64_t z) const {
    const std::size_t base = (std::size_t(level) * mConfig.tableSize + hash(x, y, z)) * mConfig.featureDim;
    return {mTable.begin() + std::ptrdiff_t(base), mTable.begin() + std::ptrdiff_t(base + mConfig.featureDim)};
}

Vec3
HashGrid::gridCoordinate(int level, const Vec3 &point) const {
    return (point - mConfig.boundsMin).cwiseQuotient(mConfig.boundsMax - mConfig.boundsMin) *
           double(mResolutions.at(std::size_t(level)));
}

std::vector<float>
HashGrid::query(const Vec3 &point) const {
    check(point.allFinite(), "hash grid query needs a finite point");
    const int F = mConfig.featureDim;
    std::vector<float> out(std::size_t(outputDim()), 0.0f);
    for (int l = 0; l < mConfig.levels; ++l) {
        const Vec3 g = gridCoordinate(l, point);
        const Vec3 cell(std::floor(g.x()), std::floor(g.y()), std::floor(g.z()));
        const Vec3 t = g - cell;
        std::vector<double> acc(std::size_t(F), 0.0);
        for (int corner = 0; corner < 8; ++corner) {
            const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
            const double w = (dx ? t.x() : 1.0 - t.x()) * (dy ? t.y() : 1.0 - t.y()) * (dz ? t.z() : 1.0 - t.z());
            if (w == 0.0) {
                continue;
            }
            const std::size_t base =
                (std::size_t(l) * mConfig.tableSize +
                 hash(std::int64_t(cell.x()) + dx, std::int64_t(cell.y()) + dy, std::int64_t(cell.z()) + dz)) *
                F;
            for (int f = 0; f < F; ++f) {
                acc[std::size_t(f)] += w * mTable[base + std::size_t(f)];
            }
        }
        for (int f = 0; f < F; ++f) {
            out[std::size_t(l * F + f)] = float(acc[std::size_t(f)]);
        }
    }
    return out;
}

Image
featureImage(const HashGrid &grid, const Scene &scene, const CameraView &view, Resolution resolution) {
    const DepthMap depth = renderDepth(scene, view, resolution);
    const CameraView cam = view.atResolution(resolution);
    Image out(cam.height(), cam.width(), grid.outputDim());
    parallelFor(std::size_t(cam.height()), [&](std::size_t row) {
        const int y = int(row);
        for (int x = 0; x < cam.width(); ++x) {
            if (!depth.hit(x, y)) {
                continue;
            }
            const auto f = grid.query(unproject(cam, pixelCenter(x, y), depth.at(x, y)));
            std::ranges::copy(f, out.pixel(y, x).begin());
        }
    });
    return out;
}

} // namespace snk
