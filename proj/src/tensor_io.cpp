// Copyright Contributors to the snk Project
// SPDX-License-Identifier: Apache-2.0

#include "snk/tensor_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

namespace snk {

static_assert(std::endian::native == std::endian::little, "tensor IO assumes a little-endian host");

namespace {

template <typename T>
void
put(std::ostream &out, T value) {
    out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
T
get(std::istream &in) {
    T value{};
    in.read(reinterpret_cast<char *>(&value), sizeof(T));
    if (!in) {
        throw Error("truncated tensor header");
    }
    return value;
}

} // namespace

std::size_t
Tensor::elementCount() const {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void
writeTensor(std::ostream &out, const Tensor &tensor) {
    check(tensor.dims.size() <= 255, "tensor rank exceeds 255");
    check(tensor.values.size() == tensor.elementCount(), "tensor payload does not match dims");
    out.write(kTensorMagic, 4);
    put<std::uint16_t>(out, kTensorVersion);
    put<std::uint8_t>(out, kDtypeF32);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.dims.size()));
    for (const auto d: tensor.dims) {
        put<std::uint32_t>(out, d);
    }
    out.write(reinterpret_cast<const char *>(tensor.values.data()),
              static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
    if (!out) {
        throw Error("failed to write tensor");
    }
}

Tensor
readTensor(std::istream &in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTensorMagic, 4) != 0) {
        throw Error("bad tensor magic");
    }
    if (get<std::uint16_t>(in) != kTensorVersion) {
        throw Error("unsupported tensor version");
    }
    if (get<std::uint8_t>(in) != kDtypeF32) {
        throw Error("unsupported tensor dtype");
    }
    const auto rank = get<std::uint8_t>(in);
    Tensor tensor;
    tensor.dims.resize(rank);
    for (auto &d: tensor.dims) {
        d = get<std::uint32_t>(in);
    }
    tensor.values.resize(tensor.elementCount());
    in.read(reinterpret_cast<char *>(tensor.values.data()),
            static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(tensor.values.size() * sizeof(float))) {
        throw Error("truncated tensor payload");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throw Error("trailing bytes after tensor payload");
    }
    return tensor;
}

void
writeTensorFile(const std::filesystem::path &path, const Tensor &tensor) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    writeTensor(out, tensor);
}

Tensor
readTensorFile(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return readTensor(in);
}

Tensor
toTensor(const Image &image) {
    Tensor t;
    t.dims = {std::uint32_t(image.height()), std::uint32_t(image.width()), std::uint32_t(image.channels())};
    t.values.assign(image.data().begin(), image.data().end());
    return t;
}

Image
toImage(const Tensor &tensor) {
    if (tensor.dims.size() == 2) {
        Image img(int(tensor.dims[0]), int(tensor.dims[1]), 1);
        std::ranges::copy(tensor.values, img.data().begin());
        return img;
    }
    check(tensor.dims.size() == 3, "image tensors must have rank 2 or 3");
    Image img(int(tensor.dims[0]), int(tensor.dims[1]), int(tensor.dims[2]));
    std::ranges::copy(tensor.values, img.data().begin());
    return img;
}

void
writeImageFile(const std::filesystem::path &path, const Image &image) {
    writeTensorFile(path, toTensor(image));
}

Image
readImageFile(const std::filesystem::path &path) {
    return toImage(readTensorFile(path));
}

void
writeViewableImage(const std::filesystem::path &path, const Image &image) {
    check(image.channels() >= 1, "image has no channels");
    const bool gray = image.channels() < 3;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << (gray ? "P5" : "P6") << '\n' << image.width() << ' ' << image.height() << "\n255\n";
    const int channels = gray ? 1 : 3;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < channels; ++c) {
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f))));
            }
        }
    }
}

} // namespace snk
