// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ogs/camera.hpp"
#include "ogs/losses.hpp"
#include "ogs/octree.hpp"
#include "ogs/splat.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ogs {

struct AdamConfig {
    float lr = 1e-2f;
    float beta1 = 0.9f;
    float beta2 = 0.95f;
    float eps = 1e-8f;
    float weight_decay = 0.f; // decoupled (AdamW) when nonzero
    float clip_norm = 0.f;    // global-norm clip before the update; 0 = off
};

class Adam {
  public:
    Adam(std::size_t n, const AdamConfig& cfg) : cfg_(cfg), m_(n, 0.f), v_(n, 0.f) {}

    // per-element learning-rate multiplier (channel groups)
    void set_lr_scale(std::vector<float> scale) { lr_scale_ = std::move(scale); }
    void set_lr(float lr) { cfg_.lr = lr; }
    // used in error messages for non-finite gradients
    void set_label(std::function<std::string(std::size_t)> label) { label_ = std::move(label); }

    void step(std::vector<float>& params, std::vector<float>& grads);

    int steps() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

  private:
    AdamConfig cfg_;
    std::vector<float> m_, v_;
    std::vector<float> lr_scale_;
    std::function<std::string(std::size_t)> label_;
    int t_ = 0;
};

// Multi-view render targets: images use the FrameBuffer channel layout.
struct ViewSet {
    std::vector<Camera> cams;
    std::vector<Image> images;
    Vec3f background = Vec3f::Ones();

    int count() const { return static_cast<int>(cams.size()); }
};

struct FitConfig {
    int iterations = 3000;
    int views_per_step = 1;
    float lr_color = 0.01f;  // opacity / albedo / roughness / metallic raws
    float lr_geom = 0.005f;  // scale / rotation raws
    float lambda = 0.2f;
    float beta1 = 0.9f;
    float beta2 = 0.95f;
    float clip_norm = 0.f;
    std::uint64_t seed = 0;
    int log_every = 50;
    bool verbose = false;
};

struct FitHistoryRow {
    int step = 0;
    LossReport report;
    double psnr = 0; // albedo PSNR on the step's first training view
};

struct FitResult {
    GaussianSet gaussians;
    std::vector<FitHistoryRow> history;
};

// Pre-fit of octant-aligned gaussians against multi-view targets.
FitResult fit_gaussians(const Octree& tree, const ViewSet& targets, const FitConfig& cfg);

// Same optimization over a dense grid (every cell of resolution^3 occupied).
FitResult fit_voxel_baseline(int resolution, const ViewSet& targets, const FitConfig& cfg);

// Shared inner loop; mutates `set` in place.
std::vector<FitHistoryRow> fit_gaussian_set(GaussianSet& set, const ViewSet& targets,
                                            const FitConfig& cfg);

void write_loss_csv(const std::string& path, const std::vector<FitHistoryRow>& rows);

// albedo-channel PSNR of a rendered buffer against a target image
double buffer_psnr(const FrameBuffer& fb, const Image& target, int c0, int channels);

} // namespace ogs
