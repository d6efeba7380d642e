// SPDX-License-Identifier: Apache-2.0
#pragma once

// Scalar-templated U-Net layer kernels with hand-derived reverse mode.

#include "ogs/parallel.hpp"
#include "ogs/regressor.hpp"

#include <cblas.h>

#include <cmath>
#include <vector>

namespace ogs::detail {

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const float* a, const float* b,
                 float* c) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.f, a,
                trans_a ? m : k, b, trans_b ? k : n, 0.f, c, n);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, const double* a,
                 const double* b, double* c) {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0, a,
                trans_a ? m : k, b, trans_b ? k : n, 0.0, c, n);
}

inline constexpr double kGnEps = 1e-5;

// gather [nodes x cin] into [nodes x 27*cin]; absent neighbors are zero
template <typename S>
void build_col(const std::vector<std::int32_t>& nbr, const S* in, int nodes, int cin,
               std::vector<S>& col) {
    col.assign(static_cast<std::size_t>(nodes) * 27 * cin, S(0));
    parallel_chunks(nodes, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t n = begin; n < end; ++n) {
            S* row = col.data() + static_cast<std::size_t>(n) * 27 * cin;
            const std::int32_t* nb = nbr.data() + static_cast<std::size_t>(n) * 27;
            for (int k = 0; k < 27; ++k) {
                if (nb[k] < 0) continue;
                const S* src = in + static_cast<std::size_t>(nb[k]) * cin;
                S* dst = row + static_cast<std::size_t>(k) * cin;
                for (int c = 0; c < cin; ++c) dst[c] = src[c];
            }
        }
    });
}

// out[n, co] = sum_k sum_ci W[k*cin+ci, co] * in[nbr(n,k), ci]
template <typename S>
void conv_forward(const std::vector<std::int32_t>& nbr, const S* in, int nodes, int cin,
                  const S* w, int cout, std::vector<S>& out, std::vector<S>& col_scratch) {
    build_col(nbr, in, nodes, cin, col_scratch);
    out.resize(static_cast<std::size_t>(nodes) * cout);
    gemm(false, false, nodes, cout, 27 * cin, col_scratch.data(), w, out.data());
}

// d_in gather uses the mirrored offset (nbr(n,k) == m iff nbr(m,26-k) == n)
template <typename S>
void conv_backward(const std::vector<std::int32_t>& nbr, const S* in, const S* d_out, int nodes,
                   int cin, const S* w, int cout, S* d_w, std::vector<S>& d_in,
                   std::vector<S>& col_scratch) {
    build_col(nbr, in, nodes, cin, col_scratch);
    gemm(true, false, 27 * cin, cout, nodes, col_scratch.data(), d_out, d_w);

    // d_in[m, ci] = sum_k sum_co d_out[nbr(m,26-k), co] * W[k*cin+ci, co]
    d_in.assign(static_cast<std::size_t>(nodes) * cin, S(0));
    parallel_chunks(nodes, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t m = begin; m < end; ++m) {
            S* dst = d_in.data() + static_cast<std::size_t>(m) * cin;
            const std::int32_t* nb = nbr.data() + static_cast<std::size_t>(m) * 27;
            for (int k = 0; k < 27; ++k) {
                const std::int32_t n = nb[26 - k];
                if (n < 0) continue;
                const S* dout_row = d_out + static_cast<std::size_t>(n) * cout;
                const S* wrow = w + static_cast<std::size_t>(k) * cin * cout;
                for (int ci = 0; ci < cin; ++ci) {
                    S acc = S(0);
                    const S* wr = wrow + static_cast<std::size_t>(ci) * cout;
                    for (int co = 0; co < cout; ++co) acc += dout_row[co] * wr[co];
                    dst[ci] += acc;
                }
            }
        }
    });
}

// ---- group norm ------------------------------------------------------------

template <typename S> struct GnStats {
    std::vector<S> mean, inv_std; // per group
};

template <typename S>
void gn_forward(const S* x, int nodes, int channels, int groups, const S* gamma, const S* beta,
                std::vector<S>& y, GnStats<S>& stats) {
    const int cg = channels / groups;
    const double count = static_cast<double>(nodes) * cg;
    stats.mean.resize(static_cast<std::size_t>(groups));
    stats.inv_std.resize(static_cast<std::size_t>(groups));
    y.resize(static_cast<std::size_t>(nodes) * channels);
    for (int g = 0; g < groups; ++g) {
        double sum = 0, sq = 0;
        for (int n = 0; n < nodes; ++n)
            for (int c = g * cg; c < (g + 1) * cg; ++c) {
                const double v = static_cast<double>(x[static_cast<std::size_t>(n) * channels + c]);
                sum += v;
                sq += v * v;
            }
        const double mean = sum / count;
        const double var = std::max(0.0, sq / count - mean * mean);
        stats.mean[static_cast<std::size_t>(g)] = S(mean);
        stats.inv_std[static_cast<std::size_t>(g)] = S(1.0 / std::sqrt(var + kGnEps));
    }
    parallel_chunks(nodes, [&](std::int64_t begin, std::int64_t end, int) {
        for (std::int64_t n = begin; n < end; ++n)
            for (int c = 0; c < channels; ++c) {
                const int g = c / cg;
                const std::size_t i = static_cast<std::size_t>(n) * channels + c;
                const S xhat = (x[i] - stats.mean[static_cast<std::size_t>(g)]) *
                               stats.inv_std[static_cast<std::size_t>(g)];
                y[i] = gamma[c] * xhat + beta[c];
            }
    });
}

template <typename S>
void gn_backward(const S* x, const S* dy, int nodes, int channels, int groups, const S* gamma,
                 const GnStats<S>& stats, S* d_gamma, S* d_beta, std::vector<S>& dx) {
    const int cg = channels / groups;
    const double count = static_cast<double>(nodes) * cg;
    dx.resize(static_cast<std::size_t>(nodes) * channels);
    for (int c = 0; c < channels; ++c) {
        d_gamma[c] = S(0);
        d_beta[c] = S(0);
    }
    for (int g = 0; g < groups; ++g) {
        const S mean = stats.mean[static_cast<std::size_t>(g)];
        const S inv_std = stats.inv_std[static_cast<std::size_t>(g)];
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int n = 0; n < nodes; ++n)
            for (int c = g * cg; c < (g + 1) * cg; ++c) {
                const std::size_t i = static_cast<std::size_t>(n) * channels + c;
                const S xhat = (x[i] - mean) * inv_std;
                const S dxhat = dy[i] * gamma[c];
                d_gamma[c] += dy[i] * xhat;
                d_beta[c] += dy[i];
                sum_dxhat += static_cast<double>(dxhat);
                sum_dxhat_xhat += static_cast<double>(dxhat) * static_cast<double>(xhat);
            }
        const S mean_dxhat = S(sum_dxhat / count);
        const S mean_dxhat_xhat = S(sum_dxhat_xhat / count);
        for (int n = 0; n < nodes; ++n)
            for (int c = g * cg; c < (g + 1) * cg; ++c) {
                const std::size_t i = static_cast<std::size_t>(n) * channels + c;
                const S xhat = (x[i] - mean) * inv_std;
                const S dxhat = dy[i] * gamma[c];
                dx[i] = inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
            }
    }
}

// ---- pool / unpool over octree parent links --------------------------------

template <typename S>
void pool_forward(const Octree& tree, int fine_depth, const S* x, int channels,
                  std::vector<S>& out, std::vector<int>& counts) {
    const auto& fine = tree.levels[static_cast<std::size_t>(fine_depth)];
    const std::size_t parents = tree.levels[static_cast<std::size_t>(fine_depth - 1)].codes.size();
    out.assign(parents * static_cast<std::size_t>(channels), S(0));
    counts.assign(parents, 0);
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        counts[p] += 1;
        const S* src = x + i * static_cast<std::size_t>(channels);
        S* dst = out.data() + p * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[c] += src[c];
    }
    for (std::size_t p = 0; p < parents; ++p) {
        S* dst = out.data() + p * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[c] /= S(counts[p]);
    }
}

template <typename S>
void pool_backward(const Octree& tree, int fine_depth, const S* d_out, int channels,
                   const std::vector<int>& counts, std::vector<S>& dx) {
    const auto& fine = tree.levels[static_cast<std::size_t>(fine_depth)];
    dx.resize(fine.codes.size() * static_cast<std::size_t>(channels));
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        const S inv = S(1) / S(counts[p]);
        const S* src = d_out + p * static_cast<std::size_t>(channels);
        S* dst = dx.data() + i * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[c] = src[c] * inv;
    }
}

template <typename S>
void unpool_forward(const Octree& tree, int fine_depth, const S* parent_x, int channels,
                    std::vector<S>& out) {
    const auto& fine = tree.levels[static_cast<std::size_t>(fine_depth)];
    out.resize(fine.codes.size() * static_cast<std::size_t>(channels));
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        const S* src = parent_x + p * static_cast<std::size_t>(channels);
        S* dst = out.data() + i * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[c] = src[c];
    }
}

template <typename S>
void unpool_backward(const Octree& tree, int fine_depth, const S* d_children, int channels,
                     std::size_t parents, std::vector<S>& d_parent) {
    const auto& fine = tree.levels[static_cast<std::size_t>(fine_depth)];
    d_parent.assign(parents * static_cast<std::size_t>(channels), S(0));
    for (std::size_t i = 0; i < fine.codes.size(); ++i) {
        const auto p = static_cast<std::size_t>(fine.parent[i]);
        const S* src = d_children + i * static_cast<std::size_t>(channels);
        S* dst = d_parent.data() + p * static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) dst[c] += src[c];
    }
}

// ---- full network -----------------------------------------------------------

template <typename S> struct LevelCacheT {
    std::vector<S> input;    // conv input
    std::vector<S> conv;     // pre-norm
    GnStats<S> stats;
    std::vector<S> act;      // post-ReLU
    std::vector<int> pool_counts; // children per parent for the pool into this level
};

template <typename S> struct UNetCacheT {
    std::vector<LevelCacheT<S>> enc;
    std::vector<LevelCacheT<S>> dec;
    std::vector<S> out;
};

template <typename S>
std::vector<S> unet_forward_impl(const UNetConfig& cfg, const NetLayout& layout, const S* params,
                                 const Octree& tree, const ConvContext& ctx,
                                 const std::vector<S>& feats, UNetCacheT<S>* cache) {
    const int K = cfg.levels();
    OGS_REQUIRE(tree.depth >= K, "unet: octree depth smaller than the network level count");
    OGS_REQUIRE(feats.size() ==
                    static_cast<std::size_t>(ctx.nodes[0]) * static_cast<std::size_t>(cfg.in_channels),
                "unet: feature size does not match the finest level");

    UNetCacheT<S> local;
    UNetCacheT<S>& c = cache ? *cache : local;
    c.enc.assign(static_cast<std::size_t>(K), {});
    c.dec.assign(static_cast<std::size_t>(K > 1 ? K - 1 : 0), {});

    std::vector<S> col;
    std::vector<S> norm_out;

    // encoder
    for (int i = 0; i < K; ++i) {
        auto& lc = c.enc[static_cast<std::size_t>(i)];
        const int cin = i == 0 ? cfg.in_channels : cfg.widths[static_cast<std::size_t>(i - 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        if (i == 0) {
            lc.input = feats;
        } else {
            pool_forward(tree, ctx.depth - (i - 1),
                         c.enc[static_cast<std::size_t>(i - 1)].act.data(), cin, lc.input,
                         lc.pool_counts);
        }
        conv_forward(ctx.nbr[static_cast<std::size_t>(i)], lc.input.data(),
                     ctx.nodes[static_cast<std::size_t>(i)], cin,
                     params + layout.enc_w[static_cast<std::size_t>(i)].offset, cout, lc.conv,
                     col);
        gn_forward(lc.conv.data(), ctx.nodes[static_cast<std::size_t>(i)], cout, cfg.groups,
                   params + layout.enc_gamma[static_cast<std::size_t>(i)].offset,
                   params + layout.enc_beta[static_cast<std::size_t>(i)].offset, norm_out,
                   lc.stats);
        lc.act.resize(norm_out.size());
        for (std::size_t j = 0; j < norm_out.size(); ++j)
            lc.act[j] = norm_out[j] > S(0) ? norm_out[j] : S(0);
    }

    // decoder with additive skips
    const std::vector<S>* below = &c.enc[static_cast<std::size_t>(K - 1)].act;
    for (int i = K - 2; i >= 0; --i) {
        auto& lc = c.dec[static_cast<std::size_t>(i)];
        const int cin = cfg.widths[static_cast<std::size_t>(i + 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        unpool_forward(tree, ctx.depth - i, below->data(), cin, lc.input);
        conv_forward(ctx.nbr[static_cast<std::size_t>(i)], lc.input.data(),
                     ctx.nodes[static_cast<std::size_t>(i)], cin,
                     params + layout.dec_w[static_cast<std::size_t>(i)].offset, cout, lc.conv,
                     col);
        gn_forward(lc.conv.data(), ctx.nodes[static_cast<std::size_t>(i)], cout, cfg.groups,
                   params + layout.dec_gamma[static_cast<std::size_t>(i)].offset,
                   params + layout.dec_beta[static_cast<std::size_t>(i)].offset, norm_out,
                   lc.stats);
        const auto& skip = c.enc[static_cast<std::size_t>(i)].act;
        lc.act.resize(norm_out.size());
        for (std::size_t j = 0; j < norm_out.size(); ++j) {
            const S pre = norm_out[j] + skip[j];
            lc.act[j] = pre > S(0) ? pre : S(0);
        }
        below = &lc.act;
    }

    // head: plain conv + bias
    const std::vector<S>& head_in = K > 1 ? c.dec[0].act : c.enc[0].act;
    std::vector<S> out;
    conv_forward(ctx.nbr[0], head_in.data(), ctx.nodes[0], cfg.widths[0],
                 params + layout.head_w.offset, cfg.out_channels, out, col);
    const S* bias = params + layout.head_b.offset;
    for (int n = 0; n < ctx.nodes[0]; ++n)
        for (int o = 0; o < cfg.out_channels; ++o)
            out[static_cast<std::size_t>(n) * cfg.out_channels + o] += bias[o];
    if (cache) c.out = out;
    return out;
}

template <typename S>
std::vector<S> unet_backward_impl(const UNetConfig& cfg, const NetLayout& layout, const S* params,
                                  const Octree& tree, const ConvContext& ctx,
                                  const UNetCacheT<S>& c, const std::vector<S>& upstream,
                                  std::vector<S>* feat_grad) {
    const int K = cfg.levels();
    OGS_REQUIRE(!c.enc.empty(), "unet_backward: missing forward cache");
    OGS_REQUIRE(upstream.size() == static_cast<std::size_t>(ctx.nodes[0]) *
                                       static_cast<std::size_t>(cfg.out_channels),
                "unet_backward: upstream size mismatch");

    std::vector<S> grads(layout.total, S(0));
    std::vector<S> col;

    // head
    const std::vector<S>& head_in = K > 1 ? c.dec[0].act : c.enc[0].act;
    S* d_head_b = grads.data() + layout.head_b.offset;
    for (int n = 0; n < ctx.nodes[0]; ++n)
        for (int o = 0; o < cfg.out_channels; ++o)
            d_head_b[o] += upstream[static_cast<std::size_t>(n) * cfg.out_channels + o];
    std::vector<S> d_below;
    conv_backward(ctx.nbr[0], head_in.data(), upstream.data(), ctx.nodes[0], cfg.widths[0],
                  params + layout.head_w.offset, cfg.out_channels,
                  grads.data() + layout.head_w.offset, d_below, col);

    // d_act per encoder level, filled by skip edges and the decoder chain
    std::vector<std::vector<S>> d_enc_act(static_cast<std::size_t>(K));

    // decoder chain (finest first)
    std::vector<S> d_act = std::move(d_below); // gradient of dec[0].act (or enc[0] when K == 1)
    for (int i = 0; i <= K - 2; ++i) {
        const auto& lc = c.dec[static_cast<std::size_t>(i)];
        const int cin = cfg.widths[static_cast<std::size_t>(i + 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        // relu over (norm + skip)
        std::vector<S> d_pre(d_act.size());
        for (std::size_t j = 0; j < d_act.size(); ++j)
            d_pre[j] = lc.act[j] > S(0) ? d_act[j] : S(0);
        // skip edge
        auto& dskip = d_enc_act[static_cast<std::size_t>(i)];
        if (dskip.empty()) dskip.assign(d_pre.size(), S(0));
        for (std::size_t j = 0; j < d_pre.size(); ++j) dskip[j] += d_pre[j];
        // group norm
        std::vector<S> d_conv;
        gn_backward(lc.conv.data(), d_pre.data(), ctx.nodes[static_cast<std::size_t>(i)], cout,
                    cfg.groups, params + layout.dec_gamma[static_cast<std::size_t>(i)].offset,
                    lc.stats, grads.data() + layout.dec_gamma[static_cast<std::size_t>(i)].offset,
                    grads.data() + layout.dec_beta[static_cast<std::size_t>(i)].offset, d_conv);
        // conv
        std::vector<S> d_up;
        conv_backward(ctx.nbr[static_cast<std::size_t>(i)], lc.input.data(), d_conv.data(),
                      ctx.nodes[static_cast<std::size_t>(i)], cin,
                      params + layout.dec_w[static_cast<std::size_t>(i)].offset, cout,
                      grads.data() + layout.dec_w[static_cast<std::size_t>(i)].offset, d_up, col);
        // unpool
        std::vector<S> d_parent;
        unpool_backward(tree, ctx.depth - i, d_up.data(), cin,
                        static_cast<std::size_t>(ctx.nodes[static_cast<std::size_t>(i + 1)]),
                        d_parent);
        if (i + 1 <= K - 2) {
            d_act = std::move(d_parent);
        } else {
            d_enc_act[static_cast<std::size_t>(K - 1)] = std::move(d_parent);
        }
    }
    if (K == 1) d_enc_act[0] = std::move(d_act);

    // encoder chain (bottom first)
    for (int i = K - 1; i >= 0; --i) {
        const auto& lc = c.enc[static_cast<std::size_t>(i)];
        const int cin = i == 0 ? cfg.in_channels : cfg.widths[static_cast<std::size_t>(i - 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        auto& d_out_act = d_enc_act[static_cast<std::size_t>(i)];
        if (d_out_act.empty()) d_out_act.assign(lc.act.size(), S(0));
        std::vector<S> d_pre(d_out_act.size());
        for (std::size_t j = 0; j < d_out_act.size(); ++j)
            d_pre[j] = lc.act[j] > S(0) ? d_out_act[j] : S(0);
        std::vector<S> d_conv;
        gn_backward(lc.conv.data(), d_pre.data(), ctx.nodes[static_cast<std::size_t>(i)], cout,
                    cfg.groups, params + layout.enc_gamma[static_cast<std::size_t>(i)].offset,
                    lc.stats, grads.data() + layout.enc_gamma[static_cast<std::size_t>(i)].offset,
                    grads.data() + layout.enc_beta[static_cast<std::size_t>(i)].offset, d_conv);
        std::vector<S> d_in;
        conv_backward(ctx.nbr[static_cast<std::size_t>(i)], lc.input.data(), d_conv.data(),
                      ctx.nodes[static_cast<std::size_t>(i)], cin,
                      params + layout.enc_w[static_cast<std::size_t>(i)].offset, cout,
                      grads.data() + layout.enc_w[static_cast<std::size_t>(i)].offset, d_in, col);
        if (i > 0) {
            std::vector<S> d_pool;
            pool_backward(tree, ctx.depth - (i - 1), d_in.data(), cin, lc.pool_counts, d_pool);
            auto& dst = d_enc_act[static_cast<std::size_t>(i - 1)];
            if (dst.empty()) {
                dst = std::move(d_pool);
            } else {
                for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += d_pool[j];
            }
        } else if (feat_grad) {
            *feat_grad = std::move(d_in);
        }
    }
    return grads;
}

} // namespace ogs::detail
