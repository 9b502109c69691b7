// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "snk/common.h"

#include <cstdint>
#include <span>
#include <vector>

namespace snk {

/// Dense float image, row-major HWC. Also used for depth, noise, masks and
/// feature maps; the channel count carries the meaning.
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, float fill = 0.0f);

    int height() const { return mHeight; }
    int width() const { return mWidth; }
    int channels() const { return mChannels; }
    std::size_t pixelCount() const { return static_cast<std::size_t>(mHeight) * mWidth; }
    bool empty() const { return mData.empty(); }

    float &
    at(int y, int x, int c = 0) {
        return mData[index(y, x, c)];
    }
    float
    at(int y, int x, int c = 0) const {
        return mData[index(y, x, c)];
    }

    std::span<float> pixel(int y, int x) { return {mData.data() + index(y, x, 0), std::size_t(mChannels)}; }
    std::span<const float> pixel(int y, int x) const {
        return {mData.data() + index(y, x, 0), std::size_t(mChannels)};
    }

    std::span<float> data() { return mData; }
    std::span<const float> data() const { return mData; }

    bool sameShape(const Image &other) const {
        return mHeight == other.mHeight && mWidth == other.mWidth && mChannels == other.mChannels;
    }

    bool operator==(const Image &other) const = default;

    /// Copy of the rectangle [x, x+w) x [y, y+h).
    Image crop(int x, int y, int w, int h) const;

    /// Writes src with its top-left corner at (x, y). src must fit.
    void paste(const Image &src, int x, int y);

    /// Keeps channels [first, first+count).
    Image sliceChannels(int first, int count) const;

private:
    std::size_t
    index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * mWidth + x) * mChannels + c;
    }

    int mHeight   = 0;
    int mWidth    = 0;
    int mChannels = 0;
    std::vector<float> mData;
};

/// Nearest-neighbour resize sampling at pixel centres. Down- then up-sizing
/// between the same pair of sizes returns the original when scaling up first.
Image resizeNearest(const Image &src, int height, int width);

/// Mean squared error over all samples of two same-shaped images.
double meanSquaredError(const Image &a, const Image &b);

/// PSNR in dB for signals with peak 1. Optional mask (1 channel, nonzero =
/// include) restricts the comparison.
double psnr(const Image &a, const Image &b, const Image *mask = nullptr);

} // namespace snk
