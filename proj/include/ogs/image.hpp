// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/common.hpp"

#include <vector>

namespace ogs {

// Channel-major float image: data[c*w*h + y*w + x].
template <typename S> struct ImageT {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<S> data;

    ImageT() = default;
    ImageT(int w, int h, int c, S fill = S(0))
        : width(w), height(h), channels(c),
          data(static_cast<std::size_t>(w) * h * c, fill) {}

    S& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    S at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    S* plane(int c) { return data.data() + static_cast<std::size_t>(c) * width * height; }
    const S* plane(int c) const {
        return data.data() + static_cast<std::size_t>(c) * width * height;
    }
    std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }

    bool same_shape(const ImageT& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }

    template <typename T> ImageT<T> cast() const {
        ImageT<T> out(width, height, channels);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }

    // channels [c0, c0+n) as a new image
    ImageT slice(int c0, int n) const {
        ImageT out(width, height, n);
        std::copy(plane(c0), plane(c0) + pixels() * n, out.data.begin());
        return out;
    }
};

using Image = ImageT<float>;
using ImageD = ImageT<double>;

// Channel layout shared by render buffers and view targets.
enum RenderChannel : int {
    kChR = 0,
    kChG = 1,
    kChB = 2,
    kChAlpha = 3,
    kChRough = 4,
    kChMetal = 5,
    kRenderChannels = 6
};

} // namespace ogs
