// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/image.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace snk {

Image::Image(int height, int width, int channels, float fill)
    : mHeight(height), mWidth(width), mChannels(channels) {
    check(height >= 0 && width >= 0 && channels >= 0, "image dimensions must be non-negative");
    mData.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image
Image::crop(int x, int y, int w, int h) const {
    check(x >= 0 && y >= 0 && w >= 0 && h >= 0 && x + w <= mWidth && y + h <= mHeight,
          "crop rectangle outside image");
    Image out(h, w, mChannels);
    for (int row = 0; row < h; ++row) {
        const auto *src = mData.data() + index(y + row, x, 0);
        std::copy(src, src + std::size_t(w) * mChannels, &out.at(row, 0, 0));
    }
    return out;
}

void
Image::paste(const Image &src, int x, int y) {
    check(src.mChannels == mChannels, "paste channel mismatch");
    check(x >= 0 && y >= 0 && x + src.mWidth <= mWidth && y + src.mHeight <= mHeight,
          "paste rectangle outside image");
    for (int row = 0; row < src.mHeight; ++row) {
        const auto *from = src.mData.data() + src.index(row, 0, 0);
        std::copy(from, from + std::size_t(src.mWidth) * mChannels, mData.data() + index(y + row, x, 0));
    }
}

Image
Image::sliceChannels(int first, int count) const {
    check(first >= 0 && count >= 0 && first + count <= mChannels, "channel slice out of range");
    Image out(mHeight, mWidth, count);
    for (int y = 0; y < mHeight; ++y) {
        for (int x = 0; x < mWidth; ++x) {
            for (int c = 0; c < count; ++c) {
                out.at(y, x, c) = at(y, x, first + c);
            }
        }
    }
    return out;
}

Image
resizeNearest(const Image &src, int height, int width) {
    check(height > 0 && width > 0, "resize target must be non-empty");
    check(!src.empty(), "cannot resize an empty image");
    Image out(height, width, src.channels());
    const double sy = double(src.height()) / height;
    const double sx = double(src.width()) / width;
    for (int y = 0; y < height; ++y) {
        const int ys = std::min(src.height() - 1, int(std::floor((y + 0.5) * sy)));
        for (int x = 0; x < width; ++x) {
            const int xs = std::min(src.width() - 1, int(std::floor((x + 0.5) * sx)));
            std::ranges::copy(src.pixel(ys, xs), out.pixel(y, x).begin());
        }
    }
    return out;
}

double
meanSquaredError(const Image &a, const Image &b) {
    check(a.sameShape(b), "image shape mismatch");
    double sum = 0.0;
    const auto da = a.data();
    const auto db = b.data();
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double d = double(da[i]) - db[i];
        sum += d * d;
    }
    return da.empty() ? 0.0 : sum / double(da.size());
}

double
psnr(const Image &a, const Image &b, const Image *mask) {
    check(a.sameShape(b), "image shape mismatch");
    double sum       = 0.0;
    std::size_t used = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            if (mask && mask->at(y, x) == 0.0f) {
                continue;
            }
            for (int c = 0; c < a.channels(); ++c) {
                const double d = double(a.at(y, x, c)) - b.at(y, x, c);
                sum += d * d;
                ++used;
            }
        }
    }
    if (used == 0 || sum == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / (sum / double(used)));
}

} // namespace snk
