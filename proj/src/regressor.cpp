// SPDX-License-Identifier: Apache-2.0
#include "ogs/regressor.hpp"

#include "ogs/detail/unet_kernels.hpp"
#include "ogs/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ogs {

UNetConfig UNetConfig::toy() {
    UNetConfig cfg;
    cfg.input_depth = 6;
    cfg.widths = {16, 32, 64, 64};
    cfg.groups = 8;
    return cfg;
}

UNetConfig UNetConfig::paper_shape(bool albedo_only) {
    UNetConfig cfg;
    cfg.input_depth = 8;
    cfg.widths = {32, 64, 128, 256, 256};
    cfg.groups = 8;
    cfg.out_channels = albedo_only ? 11 : 13;
    return cfg;
}

NetLayout make_layout(const UNetConfig& cfg) {
    OGS_REQUIRE(cfg.levels() >= 1, "unet: at least one level required");
    for (const int w : cfg.widths)
        OGS_REQUIRE(w >= 1 && w % cfg.groups == 0,
                    "unet: every width must be a positive multiple of the group count");
    NetLayout layout;
    std::size_t cursor = 0;
    auto add = [&cursor](std::size_t n) {
        const ParamEntry e{cursor, n};
        cursor += n;
        return e;
    };
    const int K = cfg.levels();
    for (int i = 0; i < K; ++i) {
        const int cin = i == 0 ? cfg.in_channels : cfg.widths[static_cast<std::size_t>(i - 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        layout.enc_w.push_back(add(static_cast<std::size_t>(27) * cin * cout));
        layout.enc_gamma.push_back(add(static_cast<std::size_t>(cout)));
        layout.enc_beta.push_back(add(static_cast<std::size_t>(cout)));
    }
    layout.dec_w.resize(static_cast<std::size_t>(K > 1 ? K - 1 : 0));
    layout.dec_gamma.resize(layout.dec_w.size());
    layout.dec_beta.resize(layout.dec_w.size());
    for (int i = K - 2; i >= 0; --i) {
        const int cin = cfg.widths[static_cast<std::size_t>(i + 1)];
        const int cout = cfg.widths[static_cast<std::size_t>(i)];
        layout.dec_w[static_cast<std::size_t>(i)] = add(static_cast<std::size_t>(27) * cin * cout);
        layout.dec_gamma[static_cast<std::size_t>(i)] = add(static_cast<std::size_t>(cout));
        layout.dec_beta[static_cast<std::size_t>(i)] = add(static_cast<std::size_t>(cout));
    }
    layout.head_w = add(static_cast<std::size_t>(27) * cfg.widths[0] * cfg.out_channels);
    layout.head_b = add(static_cast<std::size_t>(cfg.out_channels));
    layout.total = cursor;
    return layout;
}

OctreeNet OctreeNet::create(const UNetConfig& cfg, std::uint64_t seed) {
    OctreeNet net;
    net.cfg = cfg;
    net.layout = make_layout(cfg);
    net.params.assign(net.layout.total, 0.f);
    Rng rng = Rng(seed).fork(0x6e6574);

    auto he_init = [&](const ParamEntry& e, int fan_in) {
        const float std = std::sqrt(2.f / static_cast<float>(fan_in));
        for (std::size_t i = 0; i < e.count; ++i)
            net.params[e.offset + i] = static_cast<float>(rng.normal()) * std;
    };
    const int K = cfg.levels();
    for (int i = 0; i < K; ++i) {
        const int cin = i == 0 ? cfg.in_channels : cfg.widths[static_cast<std::size_t>(i - 1)];
        he_init(net.layout.enc_w[static_cast<std::size_t>(i)], 27 * cin);
        std::fill_n(net.params.begin() +
                        static_cast<std::ptrdiff_t>(net.layout.enc_gamma[static_cast<std::size_t>(i)].offset),
                    net.layout.enc_gamma[static_cast<std::size_t>(i)].count, 1.f);
    }
    for (int i = 0; i < K - 1; ++i) {
        he_init(net.layout.dec_w[static_cast<std::size_t>(i)],
                27 * cfg.widths[static_cast<std::size_t>(i + 1)]);
        std::fill_n(net.params.begin() +
                        static_cast<std::ptrdiff_t>(net.layout.dec_gamma[static_cast<std::size_t>(i)].offset),
                    net.layout.dec_gamma[static_cast<std::size_t>(i)].count, 1.f);
    }
    // small head so initial predictions sit near the raw-parameter origin
    const float head_std = 0.01f / std::sqrt(static_cast<float>(27 * cfg.widths[0]));
    for (std::size_t i = 0; i < net.layout.head_w.count; ++i)
        net.params[net.layout.head_w.offset + i] = static_cast<float>(rng.normal()) * head_std;
    return net;
}

namespace {
constexpr char kNetMagic[6] = {'O', 'N', 'E', 'T', 'V', '1'};
}

void save_net(const std::string& path, const OctreeNet& net) {
    std::ofstream out(path, std::ios::binary);
    OGS_REQUIRE(out.good(), "cannot write network checkpoint: " + path);
    out.write(kNetMagic, sizeof(kNetMagic));
    auto w32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    w32(static_cast<std::uint32_t>(net.cfg.input_depth));
    w32(static_cast<std::uint32_t>(net.cfg.levels()));
    w32(static_cast<std::uint32_t>(net.cfg.groups));
    w32(static_cast<std::uint32_t>(net.cfg.in_channels));
    w32(static_cast<std::uint32_t>(net.cfg.out_channels));
    for (const int w : net.cfg.widths) w32(static_cast<std::uint32_t>(w));
    const std::uint64_t count = net.params.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    out.write(reinterpret_cast<const char*>(net.params.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
    OGS_REQUIRE(out.good(), "write failed: " + path);
}

OctreeNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    OGS_REQUIRE(in.good(), "cannot open network checkpoint: " + path);
    char magic[6];
    in.read(magic, 6);
    OGS_REQUIRE(in.good() && std::memcmp(magic, kNetMagic, 6) == 0,
                "not a network checkpoint: " + path);
    auto r32 = [&in]() {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    UNetConfig cfg;
    cfg.input_depth = static_cast<int>(r32());
    const int levels = static_cast<int>(r32());
    cfg.groups = static_cast<int>(r32());
    cfg.in_channels = static_cast<int>(r32());
    cfg.out_channels = static_cast<int>(r32());
    cfg.widths.resize(static_cast<std::size_t>(levels));
    for (auto& w : cfg.widths) w = static_cast<int>(r32());

    OctreeNet net;
    net.cfg = cfg;
    net.layout = make_layout(cfg);
    std::uint64_t count;
    in.read(reinterpret_cast<char*>(&count), 8);
    OGS_REQUIRE(count == net.layout.total, "network checkpoint size mismatch: " + path);
    net.params.resize(count);
    in.read(reinterpret_cast<char*>(net.params.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    OGS_REQUIRE(in.good(), "truncated network checkpoint: " + path);
    return net;
}

ConvContext make_conv_context(const Octree& tree, const UNetConfig& cfg) {
    OGS_REQUIRE(tree.depth >= cfg.levels(),
                "unet: octree depth smaller than the network level count");
    ConvContext ctx;
    ctx.depth = tree.depth;
    for (int i = 0; i < cfg.levels(); ++i) {
        const int level = tree.depth - i;
        ctx.nodes.push_back(tree.node_count(level));
        ctx.nbr.push_back(neighbor_indices(tree, level));
    }
    return ctx;
}

struct UNetCache {
    detail::UNetCacheT<float> impl;
};

UNetCache* new_unet_cache() { return new UNetCache(); }
void free_unet_cache(UNetCache* p) { delete p; }

std::vector<float> unet_forward(const OctreeNet& net, const Octree& tree, const ConvContext& ctx,
                                const std::vector<float>& feats, UNetCache* cache) {
    return detail::unet_forward_impl<float>(net.cfg, net.layout, net.params.data(), tree, ctx,
                                            feats, cache ? &cache->impl : nullptr);
}

std::vector<float> unet_backward(const OctreeNet& net, const Octree& tree,
                                 const ConvContext& ctx, const UNetCache& cache,
                                 const std::vector<float>& upstream,
                                 std::vector<float>* feat_grad) {
    return detail::unet_backward_impl<float>(net.cfg, net.layout, net.params.data(), tree, ctx,
                                             cache.impl, upstream, feat_grad);
}

namespace {

// leaf-major network output -> channel-major gaussian raws
GaussianSet prediction_to_set(const Octree& tree, const std::vector<float>& out, int out_ch) {
    GaussianSet set;
    set.depth = tree.depth;
    set.codes = tree.finest().codes;
    set.positions = leaf_centers(tree);
    const std::size_t n = set.codes.size();
    set.raw.assign(static_cast<std::size_t>(GaussianSet::kChannels) * n, 0.f);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < out_ch; ++c)
            set.raw[static_cast<std::size_t>(c) * n + i] =
                out[i * static_cast<std::size_t>(out_ch) + static_cast<std::size_t>(c)];
    return set;
}

} // namespace

GaussianSet predict_gaussians(const OctreeNet& net, const Octree& tree,
                              const LeafFeatures& feats) {
    const auto ctx = make_conv_context(tree, net.cfg);
    const auto packed = feats.packed();
    std::vector<float> in(packed.data(), packed.data() + packed.size());
    const auto out = unet_forward(net, tree, ctx, in, nullptr);
    return prediction_to_set(tree, out, net.cfg.out_channels);
}

TrainResult train_regressor(const UNetConfig& netcfg, const std::vector<TrainObject>& dataset,
                            const TrainConfig& cfg) {
    OGS_REQUIRE(!dataset.empty(), "train: empty dataset");
    for (const auto& obj : dataset) {
        OGS_REQUIRE(obj.prefit.codes == obj.tree.finest().codes,
                    "train: pre-fit checkpoint does not match the octree for " + obj.name);
        OGS_REQUIRE(obj.views.count() > 0, "train: object has no views: " + obj.name);
    }

    TrainResult result;
    result.net = OctreeNet::create(netcfg, cfg.seed);
    OctreeNet& net = result.net;

    AdamConfig acfg;
    acfg.lr = cfg.lr;
    acfg.beta1 = cfg.beta1;
    acfg.beta2 = cfg.beta2;
    acfg.weight_decay = cfg.weight_decay;
    acfg.clip_norm = cfg.clip_norm;
    Adam adam(net.params.size(), acfg);
    adam.set_label([](std::size_t i) { return "network parameter " + std::to_string(i); });

    std::vector<ConvContext> contexts;
    std::vector<std::vector<float>> features;
    contexts.reserve(dataset.size());
    for (const auto& obj : dataset) {
        contexts.push_back(make_conv_context(obj.tree, netcfg));
        const auto packed = obj.feats.packed();
        features.emplace_back(packed.data(), packed.data() + packed.size());
    }

    Rng rng = Rng(cfg.seed).fork(0x747261696e);
    UNetCachePtr cache;
    const int out_ch = netcfg.out_channels;

    for (int step = 1; step <= cfg.steps; ++step) {
        const auto oi = static_cast<std::size_t>(rng.below(dataset.size()));
        const TrainObject& obj = dataset[oi];
        const int v_total = obj.views.count();
        std::vector<int> view_ids;
        if (cfg.views_per_step >= v_total) {
            for (int v = 0; v < v_total; ++v) view_ids.push_back(v);
        } else {
            view_ids.resize(static_cast<std::size_t>(cfg.views_per_step));
            for (auto& id : view_ids) id = static_cast<int>(rng.below(v_total));
            std::sort(view_ids.begin(), view_ids.end());
            view_ids.erase(std::unique(view_ids.begin(), view_ids.end()), view_ids.end());
        }

        const auto out = unet_forward(net, obj.tree, contexts[oi], features[oi], cache.ptr);
        GaussianSet pred = prediction_to_set(obj.tree, out, out_ch);

        RenderConfig rcfg;
        rcfg.background = obj.views.background;
        const auto act = activate_params(pred);
        std::vector<FrameBuffer> rendered;
        std::vector<RenderCache<float>> rcaches(view_ids.size());
        std::vector<Image> step_targets;
        for (std::size_t k = 0; k < view_ids.size(); ++k) {
            const int v = view_ids[k];
            rendered.push_back(rasterize_forward(act, pred.positions,
                                                 obj.views.cams[static_cast<std::size_t>(v)],
                                                 rcfg, &rcaches[k]));
            step_targets.push_back(obj.views.images[static_cast<std::size_t>(v)]);
        }

        std::vector<std::vector<float>> upstream;
        std::vector<float> grad_raw(pred.raw.size(), 0.f);
        const LossReport report =
            loss_total(rendered, step_targets, pred, obj.prefit, cfg.losses, &upstream, &grad_raw);
        for (std::size_t k = 0; k < view_ids.size(); ++k)
            rasterize_backward(pred, act, obj.views.cams[static_cast<std::size_t>(view_ids[k])],
                               rcfg, rendered[k], rcaches[k], upstream[k], grad_raw);

        // channel-major raw grads -> leaf-major upstream for the net
        const std::size_t n = pred.codes.size();
        std::vector<float> net_upstream(n * static_cast<std::size_t>(out_ch));
        for (std::size_t i = 0; i < n; ++i)
            for (int c = 0; c < out_ch; ++c)
                net_upstream[i * static_cast<std::size_t>(out_ch) + static_cast<std::size_t>(c)] =
                    grad_raw[static_cast<std::size_t>(c) * n + i];

        auto grads = unet_backward(net, obj.tree, contexts[oi], *cache.ptr, net_upstream);

        if (cfg.cosine_anneal) {
            const float progress = static_cast<float>(step - 1) / static_cast<float>(cfg.steps);
            adam.set_lr(cfg.lr * 0.5f * (1.f + std::cos(3.14159265358979323846f * progress)));
        }
        adam.step(net.params, grads);

        if (step == 1 || step % cfg.log_every == 0 || step == cfg.steps) {
            FitHistoryRow row;
            row.step = step;
            row.report = report;
            row.psnr = buffer_psnr(rendered[0], step_targets[0], kChR, 3);
            result.history.push_back(row);
            if (cfg.verbose)
                std::fprintf(stderr, "train step %6d  obj %zu  loss %.6f  psnr %.2f\n", step, oi,
                             report.total, row.psnr);
        }
    }
    return result;
}

} // namespace ogs
