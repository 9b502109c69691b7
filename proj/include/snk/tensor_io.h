// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/image.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace snk {

/// On-disk tensor container ("SNKT"):
///
///   offset  size  field
///   0       4     magic "SNKT"
///   4       2     version (u16 LE, currently 1)
///   6       1     dtype code (1 = f32)
///   7       1     rank
///   8       4*r   dims (u32 LE each)
///   ...           payload, row-major little-endian f32
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    std::size_t elementCount() const;
    bool operator==(const Tensor &) const = default;
};

inline constexpr char kTensorMagic[4]      = {'S', 'N', 'K', 'T'};
inline constexpr std::uint16_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeF32       = 1;

void writeTensor(std::ostream &out, const Tensor &tensor);
Tensor readTensor(std::istream &in);

void writeTensorFile(const std::filesystem::path &path, const Tensor &tensor);
Tensor readTensorFile(const std::filesystem::path &path);

/// Images map to rank-3 tensors [H, W, C].
Tensor toTensor(const Image &image);
Image toImage(const Tensor &tensor);

void writeImageFile(const std::filesystem::path &path, const Image &image);
Image readImageFile(const std::filesystem::path &path);

/// 8-bit binary PPM (3 channels) or PGM (1 channel) for viewing; values are
/// clamped to [0, 1] before quantisation. Other channel counts use the first
/// three channels.
void writeViewableImage(const std::filesystem::path &path, const Image &image);

} // namespace snk
