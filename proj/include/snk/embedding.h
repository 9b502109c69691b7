// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/geometry.h"
#include "snk/image.h"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <vector>

namespace snk {

struct HashGridConfig {
    int levels             = 8;
    int baseResolution     = 16;
    double growth          = 1.5;
    std::uint32_t tableSize = 1u << 14;
    int featureDim         = 2;
    Vec3 boundsMin         = Vec3::Constant(-4.0);
    Vec3 boundsMax         = Vec3::Constant(4.0);
    std::uint64_t seed     = 0;

    static HashGridConfig fromJson(const nlohmann::json &j);
    nlohmann::json toJson() const;
};

/// Fixed (never trained) multiresolution hash grid. Level l has resolution
/// floor(N0 * b^l) cells across the bounds; voxel corners are hashed into a
/// table of T entries with
///   (x * 1) ^ (y * 2654435761) ^ (z * 805459861)  mod T
/// on 32-bit unsigned arithmetic. Features are uniform in [-1e-2, 1e-2].
class HashGrid {
public:
    explicit HashGrid(const HashGridConfig &config = {});

    const HashGridConfig &config() const { return mConfig; }
    int outputDim() const { return mConfig.levels * mConfig.featureDim; }
    int levelResolution(int level) const { return mResolutions.at(std::size_t(level)); }

    /// Table slot of integer voxel corner (x, y, z).
    std::uint32_t hash(std::int64_t x, std::int64_t y, std::int64_t z) const;

    /// Stored feature of a corner at one level.
    std::vector<float> cornerFeature(int level, std::int64_t x, std::int64_t y, std::int64_t z) const;

    /// Concatenated trilinear features over all levels. Throws on
    /// non-finite input.
    std::vector<float> query(const Vec3 &point) const;

    /// Continuous grid coordinate of a world point at one level.
    Vec3 gridCoordinate(int level, const Vec3 &point) const;

private:
    HashGridConfig mConfig;
    std::vector<int> mResolutions;
    std::vector<float> mTable; ///< [level][entry][feature]
};

/// Per-pixel features of the unprojected surface point; zeros on miss.
Image featureImage(const HashGrid &grid, const Scene &scene, const CameraView &view, Resolution resolution);

} // namespace snk
