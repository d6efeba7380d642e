// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/baking.hpp"

#include <cstdint>
#include <vector>

namespace ogs::detail {

template <typename S> struct BilinearTap {
    int idx[4];
    S w[4];
};

// texture lookup at UV with clamped texel centers; v=0 is the bottom row
template <typename S> inline BilinearTap<S> bilinear_tap(S u, S v, int size) {
    const S x = u * S(size) - S(0.5);
    const S y = (S(1) - v) * S(size) - S(0.5);
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    const S fx = x - S(x0);
    const S fy = y - S(y0);
    auto clampi = [size](int i) { return i < 0 ? 0 : (i >= size ? size - 1 : i); };
    const int x1 = clampi(x0 + 1), y1 = clampi(y0 + 1);
    x0 = clampi(x0);
    y0 = clampi(y0);
    BilinearTap<S> tap;
    tap.idx[0] = y0 * size + x0;
    tap.idx[1] = y0 * size + x1;
    tap.idx[2] = y1 * size + x0;
    tap.idx[3] = y1 * size + x1;
    tap.w[0] = (S(1) - fx) * (S(1) - fy);
    tap.w[1] = fx * (S(1) - fy);
    tap.w[2] = (S(1) - fx) * fy;
    tap.w[3] = fx * fy;
    return tap;
}

// One view of the texel least-squares objective. tex/target are 5-channel
// plane-major (albedo rgb, rough, metal); returns the raw squared-error sum
// and the raw residual-weighted gradient (caller applies 2/N scaling).
template <typename S>
double bake_view_pass(const std::vector<S>& tex, int size, const UvRaster& raster,
                      const std::vector<S>& target5, const std::vector<std::uint8_t>& mask,
                      std::vector<S>* grad, std::size_t& supervised) {
    const std::size_t plane = static_cast<std::size_t>(size) * size;
    const std::size_t npx = raster.pixels();
    double sq = 0;
    for (std::size_t p = 0; p < npx; ++p) {
        if (!raster.covered(p) || !mask[p]) continue;
        ++supervised;
        const auto tap = bilinear_tap(S(raster.uv[p * 2 + 0]), S(raster.uv[p * 2 + 1]), size);
        for (int c = 0; c < 5; ++c) {
            const S* plane_c = tex.data() + static_cast<std::size_t>(c) * plane;
            S pred = S(0);
            for (int k = 0; k < 4; ++k) pred += tap.w[k] * plane_c[tap.idx[k]];
            const S diff = pred - target5[static_cast<std::size_t>(c) * npx + p];
            sq += static_cast<double>(diff) * static_cast<double>(diff);
            if (grad) {
                S* gplane = grad->data() + static_cast<std::size_t>(c) * plane;
                for (int k = 0; k < 4; ++k) gplane[tap.idx[k]] += tap.w[k] * diff;
            }
        }
    }
    return sq;
}

} // namespace ogs::detail
