// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/fitting.hpp"
#include "ogs/losses.hpp"
#include "ogs/octree.hpp"
#include "ogs/splat.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ogs {

// Encoder-decoder over octree levels: per level a 27-neighborhood sparse
// convolution + group norm + ReLU, mean-pool down / broadcast up, additive
// skips, and a linear conv head. widths[0] is the finest level.
struct UNetConfig {
    int input_depth = 6;
    std::vector<int> widths = {16, 32, 64, 64};
    int groups = 8;
    int in_channels = 4;
    int out_channels = 13; // 11 in albedo-only mode

    int levels() const { return static_cast<int>(widths.size()); }

    static UNetConfig toy();
    static UNetConfig paper_shape(bool albedo_only = false);
};

struct ParamEntry {
    std::size_t offset = 0;
    std::size_t count = 0;
};

// flat-parameter layout: enc conv/gamma/beta per level, dec conv/gamma/beta
// per level (finest first), then head weight + bias
struct NetLayout {
    std::vector<ParamEntry> enc_w, enc_gamma, enc_beta;
    std::vector<ParamEntry> dec_w, dec_gamma, dec_beta;
    ParamEntry head_w, head_b;
    std::size_t total = 0;
};

NetLayout make_layout(const UNetConfig& cfg);

struct OctreeNet {
    UNetConfig cfg;
    NetLayout layout;
    std::vector<float> params;

    static OctreeNet create(const UNetConfig& cfg, std::uint64_t seed);
};

void save_net(const std::string& path, const OctreeNet& net);
OctreeNet load_net(const std::string& path);

// Neighbor tables for every level the net touches; reusable across steps.
struct ConvContext {
    int depth = 0;                                // finest octree level
    std::vector<int> nodes;                       // per net level
    std::vector<std::vector<std::int32_t>> nbr;   // per net level, nodes*27
};

ConvContext make_conv_context(const Octree& tree, const UNetConfig& cfg);

struct UNetCache; // defined in the detail header

// feats: leaf-major rows [leaf][in_channels]; returns leaf-major
// [leaf][out_channels].
std::vector<float> unet_forward(const OctreeNet& net, const Octree& tree,
                                const ConvContext& ctx, const std::vector<float>& feats,
                                UNetCache* cache = nullptr);

// upstream is leaf-major [leaf][out_channels]; returns flat parameter grads
// and optionally input-feature grads.
std::vector<float> unet_backward(const OctreeNet& net, const Octree& tree,
                                 const ConvContext& ctx, const UNetCache& cache,
                                 const std::vector<float>& upstream,
                                 std::vector<float>* feat_grad = nullptr);

UNetCache* new_unet_cache();
void free_unet_cache(UNetCache*);

// convenience owning wrapper
struct UNetCachePtr {
    UNetCache* ptr;
    UNetCachePtr() : ptr(new_unet_cache()) {}
    ~UNetCachePtr() { free_unet_cache(ptr); }
    UNetCachePtr(const UNetCachePtr&) = delete;
    UNetCachePtr& operator=(const UNetCachePtr&) = delete;
};

// network prediction as a gaussian checkpoint (albedo-only nets leave
// roughness/metallic raws at zero)
GaussianSet predict_gaussians(const OctreeNet& net, const Octree& tree,
                              const LeafFeatures& feats);

struct TrainObject {
    std::string name;
    Octree tree;
    LeafFeatures feats;
    GaussianSet prefit;
    ViewSet views;
};

struct TrainConfig {
    int steps = 2000;
    int views_per_step = 8;
    float lr = 4e-4f;
    float weight_decay = 0.05f;
    float beta1 = 0.9f;
    float beta2 = 0.95f;
    float clip_norm = 1.0f;
    bool cosine_anneal = true;
    std::uint64_t seed = 0;
    int log_every = 25;
    bool verbose = false;
    LossConfig losses;
};

struct TrainResult {
    OctreeNet net;
    std::vector<FitHistoryRow> history;
};

TrainResult train_regressor(const UNetConfig& netcfg, const std::vector<TrainObject>& dataset,
                            const TrainConfig& cfg);

} // namespace ogs
