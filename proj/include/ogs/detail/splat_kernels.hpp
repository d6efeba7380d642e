// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar-templated rasterizer kernels. The float instantiation is the
// production path; tests instantiate double for finite-difference checks.

#include "ogs/camera.hpp"
#include "ogs/parallel.hpp"
#include "ogs/splat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace ogs::detail {

inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kTransmitMin = 1e-4;
inline constexpr double kPowerMax = 4.5; // 3 sigma
inline constexpr double kDilation = 0.3; // px^2 added to the 2D covariance

template <typename S> struct CameraK {
    S fx, fy, cx, cy;
    int width, height;
    S near, far;
    Mat3<S> R;
    Vec3<S> t;

    static CameraK from(const Camera& c) {
        CameraK k;
        k.fx = S(c.fx);
        k.fy = S(c.fy);
        k.cx = S(c.cx);
        k.cy = S(c.cy);
        k.width = c.width;
        k.height = c.height;
        k.near = S(c.near);
        k.far = S(c.far);
        k.R = c.R.template cast<S>();
        k.t = c.t.template cast<S>();
        return k;
    }
};

template <typename S> inline Mat3<S> quat_to_matrix(const Vec4<S>& q) {
    const S w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3<S> R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

template <typename S>
ActivatedGaussians<S> activate_params_impl(const S* raw, int count) {
    const auto n = static_cast<std::size_t>(count);
    for (int ch = 0; ch < GaussianSet::kChannels; ++ch)
        for (std::size_t i = 0; i < n; ++i) {
            const S v = raw[static_cast<std::size_t>(ch) * n + i];
            OGS_REQUIRE(std::isfinite(static_cast<double>(v)),
                        "non-finite parameter at gaussian " + std::to_string(i) + " channel " +
                            std::to_string(ch));
        }

    ActivatedGaussians<S> act;
    act.count = count;
    act.opacity.resize(n);
    act.scale.resize(n * 3);
    act.quat.resize(n * 4);
    act.albedo.resize(n * 3);
    act.rough.resize(n);
    act.metal.resize(n);
    act.cov.resize(n * 6);

    for (std::size_t i = 0; i < n; ++i) {
        act.opacity[i] = sigmoid(raw[GaussianSet::kOpacity * n + i]);
        for (int k = 0; k < 3; ++k) {
            act.scale[i * 3 + static_cast<std::size_t>(k)] =
                S(0.01) * softplus(raw[(GaussianSet::kScaleX + k) * n + i]);
            act.albedo[i * 3 + static_cast<std::size_t>(k)] =
                sigmoid(raw[(GaussianSet::kAlbedoR + k) * n + i]);
        }
        act.rough[i] = sigmoid(raw[GaussianSet::kRough * n + i]);
        act.metal[i] = sigmoid(raw[GaussianSet::kMetal * n + i]);

        Vec4<S> q(raw[GaussianSet::kQuatW * n + i], raw[GaussianSet::kQuatX * n + i],
                  raw[GaussianSet::kQuatY * n + i], raw[GaussianSet::kQuatZ * n + i]);
        const S qn = q.norm();
        OGS_REQUIRE(qn > S(1e-12), "zero-norm quaternion at gaussian " + std::to_string(i));
        q /= qn;
        for (int k = 0; k < 4; ++k) act.quat[i * 4 + static_cast<std::size_t>(k)] = q(k);

        const Mat3<S> R = quat_to_matrix(q);
        Mat3<S> M = R;
        for (int col = 0; col < 3; ++col)
            M.col(col) *= act.scale[i * 3 + static_cast<std::size_t>(col)];
        const Mat3<S> sigma = M * M.transpose();
        act.cov[i * 6 + 0] = sigma(0, 0);
        act.cov[i * 6 + 1] = sigma(0, 1);
        act.cov[i * 6 + 2] = sigma(0, 2);
        act.cov[i * 6 + 3] = sigma(1, 1);
        act.cov[i * 6 + 4] = sigma(1, 2);
        act.cov[i * 6 + 5] = sigma(2, 2);
    }
    return act;
}

// rows of V = J * R_cam, with J the projection Jacobian at tview
template <typename S>
inline void projection_rows(const CameraK<S>& cam, const Vec3<S>& tview, Vec3<S>& v0,
                            Vec3<S>& v1) {
    const S inv_z = S(1) / tview.z();
    const S inv_z2 = inv_z * inv_z;
    v0 = cam.fx * inv_z * cam.R.row(0).transpose() -
         cam.fx * tview.x() * inv_z2 * cam.R.row(2).transpose();
    v1 = cam.fy * inv_z * cam.R.row(1).transpose() -
         cam.fy * tview.y() * inv_z2 * cam.R.row(2).transpose();
}

template <typename S>
inline Vec3<S> cov_quadratic(const S* cov6, const Vec3<S>& v0, const Vec3<S>& v1) {
    Mat3<S> sigma;
    sigma << cov6[0], cov6[1], cov6[2], cov6[1], cov6[3], cov6[4], cov6[2], cov6[4], cov6[5];
    return Vec3<S>(v0.dot(sigma * v0), v0.dot(sigma * v1), v1.dot(sigma * v1));
}

template <typename S>
ProjectedGaussian<S> project_gaussian_impl(const CameraK<S>& cam, const Vec3<S>& position,
                                           const S* cov6) {
    ProjectedGaussian<S> out;
    out.tview = cam.R * position + cam.t;
    if (!(out.tview.z() > cam.near && out.tview.z() < cam.far)) return out;
    out.valid = true;
    out.depth = out.tview.z();
    out.mean2d.x() = cam.fx * out.tview.x() / out.tview.z() + cam.cx;
    out.mean2d.y() = cam.fy * out.tview.y() / out.tview.z() + cam.cy;

    Vec3<S> v0, v1;
    projection_rows(cam, out.tview, v0, v1);
    out.cov2d = cov_quadratic(cov6, v0, v1);
    out.cov2d.x() += S(kDilation);
    out.cov2d.z() += S(kDilation);

    const S det = out.cov2d.x() * out.cov2d.z() - out.cov2d.y() * out.cov2d.y();
    out.conic = Vec3<S>(out.cov2d.z() / det, -out.cov2d.y() / det, out.cov2d.x() / det);
    return out;
}

// Gaussian indices in front-to-back order; depth ties broken by index
// (ascending Morton order) so coincident leaves composite deterministically.
template <typename S>
std::vector<std::int32_t> sorted_order(const std::vector<ProjectedGaussian<S>>& proj) {
    std::vector<std::int32_t> order;
    order.reserve(proj.size());
    for (std::size_t i = 0; i < proj.size(); ++i)
        if (proj[i].valid) order.push_back(static_cast<std::int32_t>(i));
    std::sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) {
        const auto da = proj[static_cast<std::size_t>(a)].depth;
        const auto db = proj[static_cast<std::size_t>(b)].depth;
        return da < db || (da == db && a < b);
    });
    return order;
}

template <typename S> struct PixelState {
    S T = S(1);
    S ch[5] = {S(0), S(0), S(0), S(0), S(0)};
};

// One candidate against one pixel. Returns true when the pixel saturates.
// Shared verbatim by the tiled and reference paths so both composite
// identical contribution sequences.
template <typename S, typename Record>
inline bool composite_one(const ProjectedGaussian<S>& pg, const ActivatedGaussians<S>& act,
                          std::int32_t g, S px, S py, PixelState<S>& st, Record&& record) {
    const S dx = px - pg.mean2d.x();
    const S dy = py - pg.mean2d.y();
    const S power = S(0.5) * (pg.conic.x() * dx * dx + pg.conic.z() * dy * dy) +
                    pg.conic.y() * dx * dy;
    if (!(power <= S(kPowerMax))) return false;
    S alpha = act.opacity[static_cast<std::size_t>(g)] * std::exp(-power);
    if (alpha > S(kAlphaClamp)) alpha = S(kAlphaClamp);
    if (alpha < S(kAlphaMin)) return false;

    const S w = alpha * st.T;
    const auto gi = static_cast<std::size_t>(g);
    st.ch[0] += w * act.albedo[gi * 3 + 0];
    st.ch[1] += w * act.albedo[gi * 3 + 1];
    st.ch[2] += w * act.albedo[gi * 3 + 2];
    st.ch[3] += w * act.rough[gi];
    st.ch[4] += w * act.metal[gi];
    st.T *= (S(1) - alpha);
    record(g, alpha);
    return st.T < S(kTransmitMin);
}

template <typename S>
inline void write_pixel(FrameBufferT<S>& fb, int y, int x, const PixelState<S>& st,
                        const Vec3<S>& background) {
    S* px = fb.pixel(y, x);
    px[kChR] = st.ch[0] + background.x() * st.T;
    px[kChG] = st.ch[1] + background.y() * st.T;
    px[kChB] = st.ch[2] + background.z() * st.T;
    px[kChAlpha] = S(1) - st.T;
    px[kChRough] = st.ch[3];
    px[kChMetal] = st.ch[4];
    fb.transmittance[static_cast<std::size_t>(y) * fb.width + x] = st.T;
}

template <typename S>
std::vector<ProjectedGaussian<S>> project_all(const ActivatedGaussians<S>& act,
                                              const MatX3f& positions, const CameraK<S>& cam) {
    std::vector<ProjectedGaussian<S>> proj(static_cast<std::size_t>(act.count));
    parallel_chunks(act.count, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t i = begin; i < end; ++i) {
            const Vec3<S> p = positions.row(static_cast<Eigen::Index>(i)).template cast<S>();
            proj[static_cast<std::size_t>(i)] =
                project_gaussian_impl(cam, p, act.cov.data() + i * 6);
        }
    });
    return proj;
}

template <typename S> struct TileBinning {
    int tiles_x = 0, tiles_y = 0, tile = 16;
    std::vector<std::vector<std::int32_t>> lists; // gaussian indices, front-to-back
};

template <typename S>
TileBinning<S> bin_tiles(const std::vector<ProjectedGaussian<S>>& proj,
                         const std::vector<std::int32_t>& order, int width, int height,
                         int tile) {
    TileBinning<S> bins;
    bins.tile = tile;
    bins.tiles_x = (width + tile - 1) / tile;
    bins.tiles_y = (height + tile - 1) / tile;
    bins.lists.resize(static_cast<std::size_t>(bins.tiles_x) * bins.tiles_y);
    for (const std::int32_t g : order) {
        const auto& pg = proj[static_cast<std::size_t>(g)];
        const S rx = S(3) * std::sqrt(pg.cov2d.x());
        const S ry = S(3) * std::sqrt(pg.cov2d.z());
        const int x0 = std::max(0, static_cast<int>(std::floor((pg.mean2d.x() - rx))) / tile);
        const int y0 = std::max(0, static_cast<int>(std::floor((pg.mean2d.y() - ry))) / tile);
        const int x1 = std::min(bins.tiles_x - 1,
                                static_cast<int>(std::floor((pg.mean2d.x() + rx))) / tile);
        const int y1 = std::min(bins.tiles_y - 1,
                                static_cast<int>(std::floor((pg.mean2d.y() + ry))) / tile);
        if (pg.mean2d.x() + rx < S(0) || pg.mean2d.y() + ry < S(0)) continue;
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx)
                bins.lists[static_cast<std::size_t>(ty) * bins.tiles_x + tx].push_back(g);
    }
    return bins;
}

template <typename S>
FrameBufferT<S> rasterize_forward_impl(const ActivatedGaussians<S>& act, const MatX3f& positions,
                                       const CameraK<S>& cam, const Vec3<S>& background,
                                       int tile_size, RenderCache<S>* cache) {
    FrameBufferT<S> fb(cam.width, cam.height);
    const auto proj = project_all(act, positions, cam);
    const auto order = sorted_order(proj);
    const auto bins = bin_tiles(proj, order, cam.width, cam.height, tile_size);
    const std::int64_t n_tiles = static_cast<std::int64_t>(bins.lists.size());

    const bool want_cache = cache != nullptr;
    std::vector<std::uint32_t> counts;
    std::vector<std::vector<std::pair<std::int32_t, S>>> tile_contribs;
    if (want_cache) {
        counts.assign(fb.transmittance.size(), 0);
        tile_contribs.resize(static_cast<std::size_t>(n_tiles));
    }

    parallel_chunks(n_tiles, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t ti = begin; ti < end; ++ti) {
            const auto& list = bins.lists[static_cast<std::size_t>(ti)];
            const int tx = static_cast<int>(ti % bins.tiles_x);
            const int ty = static_cast<int>(ti / bins.tiles_x);
            const int x_end = std::min(cam.width, (tx + 1) * tile_size);
            const int y_end = std::min(cam.height, (ty + 1) * tile_size);
            auto* contribs = want_cache ? &tile_contribs[static_cast<std::size_t>(ti)] : nullptr;
            for (int y = ty * tile_size; y < y_end; ++y)
                for (int x = tx * tile_size; x < x_end; ++x) {
                    PixelState<S> st;
                    const S px = S(x) + S(0.5), py = S(y) + S(0.5);
                    std::uint32_t n_rec = 0;
                    for (const std::int32_t g : list) {
                        const bool done = composite_one(
                            proj[static_cast<std::size_t>(g)], act, g, px, py, st,
                            [&](std::int32_t gi, S alpha) {
                                if (contribs) {
                                    contribs->emplace_back(gi, alpha);
                                    ++n_rec;
                                }
                            });
                        if (done) break;
                    }
                    write_pixel(fb, y, x, st, background);
                    if (want_cache)
                        counts[static_cast<std::size_t>(y) * cam.width + x] = n_rec;
                }
        }
    });

    if (want_cache) {
        cache->proj = proj;
        cache->offsets.assign(fb.transmittance.size() + 1, 0);
        for (std::size_t p = 0; p < fb.transmittance.size(); ++p)
            cache->offsets[p + 1] = cache->offsets[p] + counts[p];
        cache->contribs.resize(cache->offsets.back());
        parallel_chunks(n_tiles, [&](std::int64_t begin, std::int64_t end, int) {
            for (std::int64_t ti = begin; ti < end; ++ti) {
                const auto& buf = tile_contribs[static_cast<std::size_t>(ti)];
                const int tx = static_cast<int>(ti % bins.tiles_x);
                const int ty = static_cast<int>(ti / bins.tiles_x);
                const int x_end = std::min(cam.width, (tx + 1) * tile_size);
                const int y_end = std::min(cam.height, (ty + 1) * tile_size);
                std::size_t cursor = 0;
                for (int y = ty * tile_size; y < y_end; ++y)
                    for (int x = tx * tile_size; x < x_end; ++x) {
                        const std::size_t p = static_cast<std::size_t>(y) * cam.width + x;
                        const std::uint32_t cnt = counts[p];
                        std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(cursor), cnt,
                                    cache->contribs.begin() + cache->offsets[p]);
                        cursor += cnt;
                    }
            }
        });
    }
    return fb;
}

template <typename S>
FrameBufferT<S> rasterize_reference_impl(const ActivatedGaussians<S>& act,
                                         const MatX3f& positions, const CameraK<S>& cam,
                                         const Vec3<S>& background) {
    FrameBufferT<S> fb(cam.width, cam.height);
    const auto proj = project_all(act, positions, cam);
    const auto order = sorted_order(proj);

    parallel_chunks(cam.height, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t y = begin; y < end; ++y)
            for (int x = 0; x < cam.width; ++x) {
                PixelState<S> st;
                const S px = S(x) + S(0.5), py = S(y) + S(0.5);
                for (const std::int32_t g : order) {
                    if (composite_one(proj[static_cast<std::size_t>(g)], act, g, px, py, st,
                                      [](std::int32_t, S) {}))
                        break;
                }
                write_pixel(fb, static_cast<int>(y), x, st, background);
            }
    });
    return fb;
}

// ---- backward -------------------------------------------------------------

// per-gaussian accumulation slots: [albedo rgb, rough, metal, opacity, conic A B C]
inline constexpr int kAccSlots = 9;

template <typename S>
void backward_accumulate(const ActivatedGaussians<S>& act, const RenderCache<S>& cache,
                         const FrameBufferT<S>& fb, const Vec3<S>& background,
                         const std::vector<S>& upstream, std::vector<S>& acc) {
    const std::int64_t pixels = static_cast<std::int64_t>(fb.transmittance.size());
    const int nthreads = global_pool().size();
    const std::size_t acc_size = static_cast<std::size_t>(act.count) * kAccSlots;
    std::vector<std::vector<S>> partial(static_cast<std::size_t>(nthreads));

    parallel_chunks(pixels, [&](std::int64_t begin, std::int64_t end, int thread) {
        auto& local = partial[static_cast<std::size_t>(thread)];
        local.assign(acc_size, S(0));
        for (std::int64_t p = begin; p < end; ++p) {
            const std::uint32_t c0 = cache.offsets[static_cast<std::size_t>(p)];
            const std::uint32_t c1 = cache.offsets[static_cast<std::size_t>(p) + 1];
            if (c0 == c1) continue;
            const S* up = upstream.data() + p * kRenderChannels;
            const int x = static_cast<int>(p % fb.width);
            const int y = static_cast<int>(p / fb.width);
            const S px = S(x) + S(0.5), py = S(y) + S(0.5);
            const S t_final = fb.transmittance[static_cast<std::size_t>(p)];

            // suffix of composited contributions beyond the current one;
            // albedo channels start at the background term
            S suffix[5] = {background.x() * t_final, background.y() * t_final,
                           background.z() * t_final, S(0), S(0)};
            S t_next = t_final;
            for (std::uint32_t ci = c1; ci-- > c0;) {
                const auto [g, alpha] = cache.contribs[ci];
                const auto gi = static_cast<std::size_t>(g);
                const S one_minus = S(1) - alpha;
                const S t_i = t_next / one_minus; // transmittance before this one
                const S w = alpha * t_i;

                const S color[5] = {act.albedo[gi * 3 + 0], act.albedo[gi * 3 + 1],
                                    act.albedo[gi * 3 + 2], act.rough[gi], act.metal[gi]};
                S* slots = local.data() + gi * kAccSlots;
                S d_alpha = up[kChAlpha] * t_final / one_minus;
                for (int ch = 0; ch < 5; ++ch) {
                    const S u = ch < 3 ? up[ch] : (ch == 3 ? up[kChRough] : up[kChMetal]);
                    slots[ch] += w * u;
                    d_alpha += u * (color[ch] * t_i - suffix[ch] / one_minus);
                    suffix[ch] += color[ch] * w;
                }

                if (alpha < S(kAlphaClamp)) { // clamped alphas get no geometry gradient
                    const S gval = alpha / act.opacity[gi];
                    slots[5] += gval * d_alpha;
                    const S d_power = -alpha * d_alpha;
                    const S dx = px - cache.proj[gi].mean2d.x();
                    const S dy = py - cache.proj[gi].mean2d.y();
                    slots[6] += d_power * S(0.5) * dx * dx;
                    slots[7] += d_power * dx * dy;
                    slots[8] += d_power * S(0.5) * dy * dy;
                }
                t_next = t_i;
            }
        }
    });

    acc.assign(acc_size, S(0));
    for (const auto& local : partial) {
        if (local.empty()) continue;
        for (std::size_t i = 0; i < acc_size; ++i) acc[i] += local[i];
    }
}

// chain conic -> cov2d -> Sigma -> (scale, quaternion) -> raw, plus the
// sigmoid chains for color-like channels
template <typename S>
void backward_convert(const S* raw, const ActivatedGaussians<S>& act, const CameraK<S>& cam,
                      const RenderCache<S>& cache, const std::vector<S>& acc, S* grad_raw) {
    const auto n = static_cast<std::size_t>(act.count);
    parallel_chunks(act.count, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t ii = begin; ii < end; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const S* slots = acc.data() + i * kAccSlots;
            bool any = false;
            for (int k = 0; k < kAccSlots; ++k) any = any || slots[k] != S(0);
            if (!any || !cache.proj[i].valid) continue;

            // color-like channels: d sigmoid
            const S alb[3] = {act.albedo[i * 3 + 0], act.albedo[i * 3 + 1],
                              act.albedo[i * 3 + 2]};
            for (int k = 0; k < 3; ++k)
                grad_raw[(GaussianSet::kAlbedoR + k) * n + i] +=
                    slots[k] * alb[k] * (S(1) - alb[k]);
            grad_raw[GaussianSet::kRough * n + i] +=
                slots[3] * act.rough[i] * (S(1) - act.rough[i]);
            grad_raw[GaussianSet::kMetal * n + i] +=
                slots[4] * act.metal[i] * (S(1) - act.metal[i]);
            grad_raw[GaussianSet::kOpacity * n + i] +=
                slots[5] * act.opacity[i] * (S(1) - act.opacity[i]);

            const S ga = slots[6], gb = slots[7], gc = slots[8];
            if (ga == S(0) && gb == S(0) && gc == S(0)) continue;

            // conic -> cov2d (closed-form 2x2 inverse derivative)
            const Vec3<S>& c2 = cache.proj[i].cov2d; // (xx, xy, yy)
            const S xx = c2.x(), xy = c2.y(), yy = c2.z();
            const S det = xx * yy - xy * xy;
            const S inv_det = S(1) / det;
            const S inv_det2 = inv_det * inv_det;
            // A = yy/det, B = -xy/det, C = xx/det
            const S dA_dxx = -yy * yy * inv_det2;
            const S dA_dxy = S(2) * yy * xy * inv_det2;
            const S dA_dyy = inv_det - yy * xx * inv_det2;
            const S dB_dxx = xy * yy * inv_det2;
            const S dB_dxy = -inv_det - S(2) * xy * xy * inv_det2;
            const S dB_dyy = xy * xx * inv_det2;
            const S dC_dxx = inv_det - xx * yy * inv_det2;
            const S dC_dxy = S(2) * xx * xy * inv_det2;
            const S dC_dyy = -xx * xx * inv_det2;
            const S g_xx = ga * dA_dxx + gb * dB_dxx + gc * dC_dxx;
            const S g_xy = ga * dA_dxy + gb * dB_dxy + gc * dC_dxy;
            const S g_yy = ga * dA_dyy + gb * dB_dyy + gc * dC_dyy;

            // cov2d -> Sigma through the fixed rows of V = J * R_cam
            Vec3<S> v0, v1;
            projection_rows(cam, cache.proj[i].tview, v0, v1);
            S g_sigma[3][3]; // symmetric parameter gradient, upper triangle used
            for (int a = 0; a < 3; ++a)
                for (int b = a; b < 3; ++b) {
                    const S f_xx = a == b ? v0(a) * v0(b) : S(2) * v0(a) * v0(b);
                    const S f_xy = a == b ? v0(a) * v1(a) : v0(a) * v1(b) + v0(b) * v1(a);
                    const S f_yy = a == b ? v1(a) * v1(b) : S(2) * v1(a) * v1(b);
                    g_sigma[a][b] = g_xx * f_xx + g_xy * f_xy + g_yy * f_yy;
                }

            // Sigma = M M^T with M = R diag(s)
            Vec4<S> q(act.quat[i * 4 + 0], act.quat[i * 4 + 1], act.quat[i * 4 + 2],
                      act.quat[i * 4 + 3]);
            const Mat3<S> R = quat_to_matrix(q);
            Mat3<S> M = R;
            const S s0 = act.scale[i * 3 + 0], s1 = act.scale[i * 3 + 1],
                    s2 = act.scale[i * 3 + 2];
            M.col(0) *= s0;
            M.col(1) *= s1;
            M.col(2) *= s2;

            Mat3<S> g_M = Mat3<S>::Zero();
            for (int p = 0; p < 3; ++p)
                for (int m = 0; m < 3; ++m) {
                    S v = S(0);
                    for (int l = p; l < 3; ++l) v += g_sigma[p][l] * M(l, m);
                    for (int k = 0; k <= p; ++k) v += g_sigma[k][p] * M(k, m);
                    g_M(p, m) = v;
                }

            const S scale[3] = {s0, s1, s2};
            for (int m = 0; m < 3; ++m) {
                S g_scale = S(0);
                for (int p = 0; p < 3; ++p) g_scale += g_M(p, m) * R(p, m);
                // scale = 0.01 * softplus(raw)
                const S sraw = raw[(GaussianSet::kScaleX + m) * n + i];
                grad_raw[(GaussianSet::kScaleX + m) * n + i] +=
                    g_scale * S(0.01) * sigmoid(sraw);
            }

            Mat3<S> g_R;
            for (int p = 0; p < 3; ++p)
                for (int m = 0; m < 3; ++m) g_R(p, m) = g_M(p, m) * scale[m];

            // dR/dq for unit quaternion (w,x,y,z)
            const S w = q(0), x = q(1), y = q(2), z = q(3);
            Mat3<S> dR[4];
            dR[0] << 0, -2 * z, 2 * y, 2 * z, 0, -2 * x, -2 * y, 2 * x, 0;
            dR[1] << 0, 2 * y, 2 * z, 2 * y, -4 * x, -2 * w, 2 * z, 2 * w, -4 * x;
            dR[2] << -4 * y, 2 * x, 2 * w, 2 * x, 0, 2 * z, -2 * w, 2 * z, -4 * y;
            dR[3] << -4 * z, -2 * w, 2 * x, 2 * w, -4 * z, 2 * y, 2 * x, 2 * y, 0;
            Vec4<S> g_qhat;
            for (int k = 0; k < 4; ++k) g_qhat(k) = (g_R.array() * dR[k].array()).sum();

            // through normalization
            Vec4<S> qr(raw[GaussianSet::kQuatW * n + i], raw[GaussianSet::kQuatX * n + i],
                       raw[GaussianSet::kQuatY * n + i], raw[GaussianSet::kQuatZ * n + i]);
            const S qn = qr.norm();
            const Vec4<S> g_q = (g_qhat - g_qhat.dot(q) * q) / qn;
            for (int k = 0; k < 4; ++k)
                grad_raw[(GaussianSet::kQuatW + k) * n + i] += g_q(k);
        }
    });
}

template <typename S>
void rasterize_backward_impl(const S* raw, const ActivatedGaussians<S>& act,
                             const CameraK<S>& cam, const Vec3<S>& background,
                             const FrameBufferT<S>& fb, const RenderCache<S>& cache,
                             const std::vector<S>& upstream, S* grad_raw) {
    OGS_REQUIRE(upstream.size() == fb.color.size(),
                "rasterize_backward: upstream buffer size mismatch");
    OGS_REQUIRE(cache.offsets.size() == fb.transmittance.size() + 1,
                "rasterize_backward: cache does not match framebuffer");
    std::vector<S> acc;
    backward_accumulate(act, cache, fb, background, upstream, acc);
    backward_convert(raw, act, cam, cache, acc, grad_raw);
}

} // namespace ogs::detail
