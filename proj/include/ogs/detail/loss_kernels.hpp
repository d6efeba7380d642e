// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/image.hpp"
#include "ogs/losses.hpp"
#include "ogs/parallel.hpp"

#include <cmath>
#include <vector>

namespace ogs::detail {

// ---- separable gaussian window with zero padding + renormalization --------
//
// Windows are clipped at the image border and renormalized so constant
// images keep exact statistics at any size (SSIM stays defined for images
// smaller than the window).

template <typename S> std::vector<S> gaussian_kernel(int window, S sigma) {
    std::vector<S> k(static_cast<std::size_t>(window));
    const int half = window / 2;
    S sum = S(0);
    for (int i = 0; i < window; ++i) {
        const S d = S(i - half);
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (S(2) * sigma * sigma));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// zero-padded separable convolution of one plane
template <typename S>
void conv_plane(const S* src, int w, int h, const std::vector<S>& k, std::vector<S>& tmp,
                S* dst) {
    const int half = static_cast<int>(k.size()) / 2;
    tmp.resize(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const S* row = src + static_cast<std::size_t>(y) * w;
        S* out = tmp.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            S acc = S(0);
            const int lo = std::max(-half, -x), hi = std::min(half, w - 1 - x);
            for (int d = lo; d <= hi; ++d)
                acc += k[static_cast<std::size_t>(d + half)] * row[x + d];
            out[x] = acc;
        }
    }
    for (int x = 0; x < w; ++x)
        for (int y = 0; y < h; ++y) {
            S acc = S(0);
            const int lo = std::max(-half, -y), hi = std::min(half, h - 1 - y);
            for (int d = lo; d <= hi; ++d)
                acc += k[static_cast<std::size_t>(d + half)] *
                       tmp[static_cast<std::size_t>(y + d) * w + x];
            dst[static_cast<std::size_t>(y) * w + x] = acc;
        }
}

// per-pixel window weight (conv of ones factors into two 1D sums)
template <typename S>
std::vector<S> window_norm(int w, int h, const std::vector<S>& k) {
    const int half = static_cast<int>(k.size()) / 2;
    auto axis_norm = [&](int n) {
        std::vector<S> out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            S acc = S(0);
            const int lo = std::max(-half, -i), hi = std::min(half, n - 1 - i);
            for (int d = lo; d <= hi; ++d) acc += k[static_cast<std::size_t>(d + half)];
            out[static_cast<std::size_t>(i)] = acc;
        }
        return out;
    };
    const auto nx = axis_norm(w);
    const auto ny = axis_norm(h);
    std::vector<S> norm(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            norm[static_cast<std::size_t>(y) * w + x] =
                ny[static_cast<std::size_t>(y)] * nx[static_cast<std::size_t>(x)];
    return norm;
}

// ---- SSIM ------------------------------------------------------------------

inline constexpr double kSsimC1 = 0.01 * 0.01; // unit dynamic range
inline constexpr double kSsimC2 = 0.03 * 0.03;

// mean SSIM over all pixels and channels; optionally d(meanSSIM)/da
template <typename S>
double ssim_impl(const ImageT<S>& a, const ImageT<S>& b, int window, S sigma,
                 ImageT<S>* grad) {
    OGS_REQUIRE(a.same_shape(b), "ssim: image shapes differ");
    OGS_REQUIRE(window >= 1 && window % 2 == 1, "ssim: window must be odd");
    const int w = a.width, h = a.height;
    const std::size_t np = a.pixels();
    const auto kernel = gaussian_kernel(window, sigma);
    const auto norm = window_norm<S>(w, h, kernel);
    const double denom = static_cast<double>(np) * a.channels;

    if (grad) *grad = ImageT<S>(w, h, a.channels);

    std::vector<S> tmp, pa(np), qa(np), rab(np), pb(np), qb(np), buf(np);
    std::vector<S> gP, gQ, gR, cP, cQ, cR;
    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        const S* pa_src = a.plane(c);
        const S* pb_src = b.plane(c);
        conv_plane(pa_src, w, h, kernel, tmp, pa.data());
        conv_plane(pb_src, w, h, kernel, tmp, pb.data());
        for (std::size_t i = 0; i < np; ++i) buf[i] = pa_src[i] * pa_src[i];
        conv_plane(buf.data(), w, h, kernel, tmp, qa.data());
        for (std::size_t i = 0; i < np; ++i) buf[i] = pb_src[i] * pb_src[i];
        conv_plane(buf.data(), w, h, kernel, tmp, qb.data());
        for (std::size_t i = 0; i < np; ++i) buf[i] = pa_src[i] * pb_src[i];
        conv_plane(buf.data(), w, h, kernel, tmp, rab.data());

        if (grad) {
            gP.assign(np, S(0));
            gQ.assign(np, S(0));
            gR.assign(np, S(0));
        }
        for (std::size_t i = 0; i < np; ++i) {
            const S inv_n = S(1) / norm[i];
            const S mu_a = pa[i] * inv_n;
            const S mu_b = pb[i] * inv_n;
            const S ex_aa = qa[i] * inv_n;
            const S ex_bb = qb[i] * inv_n;
            const S ex_ab = rab[i] * inv_n;
            const S var_a = ex_aa - mu_a * mu_a;
            const S var_b = ex_bb - mu_b * mu_b;
            const S cov = ex_ab - mu_a * mu_b;
            const S m1 = 2 * mu_a * mu_b + S(kSsimC1);
            const S m2 = mu_a * mu_a + mu_b * mu_b + S(kSsimC1);
            const S s1 = 2 * cov + S(kSsimC2);
            const S s2 = var_a + var_b + S(kSsimC2);
            const S val = (m1 * s1) / (m2 * s2);
            total += static_cast<double>(val);
            if (grad) {
                const S u = S(1.0 / denom);
                const S d_m1 = s1 / (m2 * s2);
                const S d_s1 = m1 / (m2 * s2);
                const S d_m2 = -val / m2;
                const S d_s2 = -val / s2;
                // P = mu_a, Q = E[a^2], R = E[ab] as independent intermediates
                const S d_P = d_m1 * 2 * mu_b + d_m2 * 2 * mu_a + d_s1 * (-2 * mu_b) +
                              d_s2 * (-2 * mu_a);
                gP[i] = u * d_P * inv_n;
                gQ[i] = u * d_s2 * inv_n;
                gR[i] = u * d_s1 * S(2) * inv_n;
            }
        }
        if (grad) {
            cP.resize(np);
            cQ.resize(np);
            cR.resize(np);
            conv_plane(gP.data(), w, h, kernel, tmp, cP.data());
            conv_plane(gQ.data(), w, h, kernel, tmp, cQ.data());
            conv_plane(gR.data(), w, h, kernel, tmp, cR.data());
            S* gout = grad->plane(c);
            for (std::size_t i = 0; i < np; ++i)
                gout[i] = cP[i] + S(2) * pa_src[i] * cQ[i] + pb_src[i] * cR[i];
        }
    }
    return total / denom;
}

template <typename S>
std::pair<double, ImageT<S>> dssim_impl(const ImageT<S>& a, const ImageT<S>& b, int window,
                                        S sigma) {
    ImageT<S> grad;
    const double v = ssim_impl(a, b, window, sigma, &grad);
    for (auto& g : grad.data) g *= S(-0.5);
    return {0.5 * (1.0 - v), std::move(grad)};
}

// ---- elementwise losses ----------------------------------------------------

template <typename S>
double l1_with_grad(const ImageT<S>& a, const ImageT<S>& b, ImageT<S>* grad) {
    OGS_REQUIRE(a.same_shape(b), "l1: image shapes differ");
    const double n = static_cast<double>(a.data.size());
    double total = 0;
    if (grad) *grad = ImageT<S>(a.width, a.height, a.channels);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const S d = a.data[i] - b.data[i];
        total += std::abs(static_cast<double>(d));
        if (grad) grad->data[i] = d > S(0) ? S(1.0 / n) : (d < S(0) ? S(-1.0 / n) : S(0));
    }
    return total / n;
}

template <typename S>
double mse_with_grad(const ImageT<S>& a, const ImageT<S>& b, ImageT<S>* grad) {
    OGS_REQUIRE(a.same_shape(b), "mse: image shapes differ");
    const double n = static_cast<double>(a.data.size());
    double total = 0;
    if (grad) *grad = ImageT<S>(a.width, a.height, a.channels);
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        total += d * d;
        if (grad) grad->data[i] = S(2.0 * d / n);
    }
    return total / n;
}

template <typename S> double psnr_impl(const ImageT<S>& a, const ImageT<S>& b) {
    const double mse = mse_with_grad<S>(a, b, nullptr);
    if (mse < 1e-10) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

// ---- channel-group plumbing -------------------------------------------------

// extract group channels [c0, c0+n) of an interleaved framebuffer
template <typename S>
ImageT<S> fb_group(const FrameBufferT<S>& fb, int c0, int n) {
    ImageT<S> out(fb.width, fb.height, n);
    for (int c = 0; c < n; ++c) {
        S* plane = out.plane(c);
        const S* src = fb.color.data() + c0 + c;
        for (std::size_t p = 0; p < fb.transmittance.size(); ++p)
            plane[p] = src[p * kRenderChannels];
    }
    return out;
}

template <typename S>
ImageT<S> image_group(const ImageT<S>& img, int c0, int n) {
    return img.slice(c0, n);
}

// scatter a group gradient back into interleaved upstream, scaled
template <typename S>
void add_group_grad(std::vector<S>& upstream, const ImageT<S>& grad, int c0, S scale) {
    for (int c = 0; c < grad.channels; ++c) {
        const S* plane = grad.plane(c);
        S* dst = upstream.data() + c0 + c;
        for (std::size_t p = 0; p < grad.pixels(); ++p)
            dst[p * kRenderChannels] += scale * plane[p];
    }
}

struct GroupSpec {
    int c0;
    int channels;
};
inline constexpr GroupSpec kAlbedoGroup{kChR, 3};
inline constexpr GroupSpec kRoughGroup{kChRough, 1};
inline constexpr GroupSpec kMetalGroup{kChMetal, 1};
inline constexpr GroupSpec kAlphaGroup{kChAlpha, 1};

// Eq-1 style fit loss over one group of one view
template <typename S>
double fit_group_loss(const FrameBufferT<S>& fb, const ImageT<S>& target, const GroupSpec& g,
                      S lambda, int window, S sigma, std::vector<S>* upstream, S view_scale) {
    const ImageT<S> ra = fb_group(fb, g.c0, g.channels);
    const ImageT<S> ta = image_group(target, g.c0, g.channels);
    ImageT<S> l1_grad;
    const double l1 = l1_with_grad(ra, ta, upstream ? &l1_grad : nullptr);
    ImageT<S> ds_grad;
    double ds;
    if (upstream) {
        auto [v, gr] = dssim_impl(ra, ta, window, sigma);
        ds = v;
        ds_grad = std::move(gr);
    } else {
        ds = 0.5 * (1.0 - ssim_impl<S>(ra, ta, window, sigma, nullptr));
    }
    if (upstream) {
        add_group_grad(*upstream, l1_grad, g.c0, (S(1) - lambda) * view_scale);
        add_group_grad(*upstream, ds_grad, g.c0, lambda * view_scale);
    }
    return (1.0 - static_cast<double>(lambda)) * l1 + static_cast<double>(lambda) * ds;
}

template <typename S>
double total_group_mse(const FrameBufferT<S>& fb, const ImageT<S>& target, const GroupSpec& g,
                       std::vector<S>* upstream, S view_scale) {
    const ImageT<S> ra = fb_group(fb, g.c0, g.channels);
    const ImageT<S> ta = image_group(target, g.c0, g.channels);
    ImageT<S> grad;
    const double v = mse_with_grad(ra, ta, upstream ? &grad : nullptr);
    if (upstream) add_group_grad(*upstream, grad, g.c0, view_scale);
    return v;
}

} // namespace ogs::detail
