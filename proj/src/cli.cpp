// SPDX-License-Identifier: Apache-2.0
#include "ogs/cli.hpp"

#include "ogs/baking.hpp"
#include "ogs/evalrender.hpp"
#include "ogs/fitting.hpp"
#include "ogs/geometry.hpp"
#include "ogs/io_image.hpp"
#include "ogs/parallel.hpp"
#include "ogs/regressor.hpp"
#include "ogs/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ogs::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct GlobalOpts {
    std::uint64_t seed = 0;
    int threads = 0; // 0 = OGS_THREADS or hardware
    bool deterministic = true;
    std::string out;
};

void add_globals(CLI::App* cmd, GlobalOpts& g, bool out_required = true) {
    cmd->add_option("--seed", g.seed, "global rng seed");
    cmd->add_option("--threads", g.threads, "worker threads (0 = auto)");
    cmd->add_flag("--deterministic,!--no-deterministic", g.deterministic,
                  "bit-reproducible reductions (default on)");
    auto* out = cmd->add_option("--out", g.out, "output directory");
    if (out_required) out->required();
    cmd->set_config("--config");
}

void apply_globals(const GlobalOpts& g) {
    if (g.threads > 0) set_global_threads(g.threads);
    if (!g.out.empty()) fs::create_directories(g.out);
}

void write_manifest(const std::string& dir, const std::string& command, int argc,
                    const char* const* argv, const GlobalOpts& g, const json& metrics) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = g.seed;
    m["threads_requested"] = g.threads;
    m["threads_effective"] = global_pool().size();
    m["deterministic"] = g.deterministic;
    json args = json::array();
    for (int i = 0; i < argc; ++i) args.push_back(argv[i]);
    m["argv"] = args;
    m["metrics"] = metrics;
    std::ofstream(dir + "/manifest.json") << m.dump(2) << "\n";
}

Mesh make_primitive(const std::string& name) {
    if (name == "sphere") return make_uv_sphere(96, 192);
    if (name == "cube") return make_cube();
    if (name == "torus") return make_torus(96, 64, 0.7f, 0.28f);
    if (name == "quad") return make_quad();
    throw Error("unknown primitive: " + name);
}

Mat3f euler_rotation(const Vec3f& degrees) {
    const float d2r = 3.14159265358979323846f / 180.f;
    return (Eigen::AngleAxisf(degrees.z() * d2r, Vec3f::UnitZ()) *
            Eigen::AngleAxisf(degrees.y() * d2r, Vec3f::UnitY()) *
            Eigen::AngleAxisf(degrees.x() * d2r, Vec3f::UnitX()))
        .toRotationMatrix();
}

Vec3f parse_vec3(const std::string& csv, const char* what) {
    Vec3f v;
    if (std::sscanf(csv.c_str(), "%f,%f,%f", &v.x(), &v.y(), &v.z()) != 3)
        throw Error(std::string("expected `x,y,z` for ") + what + ": " + csv);
    return v;
}

std::vector<float> parse_float_list(const std::string& csv) {
    std::vector<float> out;
    std::string token;
    std::istringstream ss(csv);
    while (std::getline(ss, token, ',')) out.push_back(std::stof(token));
    return out;
}

// shared mesh -> normalized mesh -> octree plumbing
struct MeshPipeline {
    Mesh mesh;
    SurfaceSamples samples;
    Octree tree;
};

MeshPipeline prepare_mesh(const std::string& path, int depth, int n_samples,
                          std::uint64_t seed) {
    MeshPipeline p;
    p.mesh = normalize_mesh(load_mesh(path));
    p.samples = sample_surface(p.mesh, n_samples, seed);
    p.tree = build_octree(p.samples, depth);
    return p;
}

std::vector<Image> read_png_dir(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") names.push_back(e.path().string());
    std::sort(names.begin(), names.end());
    OGS_REQUIRE(!names.empty(), "no .png files in " + dir);
    std::vector<Image> out;
    out.reserve(names.size());
    for (const auto& n : names) out.push_back(read_png(n));
    return out;
}

Image assemble_grid(const std::vector<Image>& tiles) {
    OGS_REQUIRE(!tiles.empty(), "grid: no images");
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(tiles.size()))));
    const int rows = static_cast<int>((tiles.size() + cols - 1) / cols);
    const int tw = tiles[0].width, th = tiles[0].height, ch = tiles[0].channels;
    Image grid(tw * cols, th * rows, ch);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        const int gx = static_cast<int>(i) % cols, gy = static_cast<int>(i) / cols;
        for (int c = 0; c < ch; ++c)
            for (int y = 0; y < th; ++y)
                for (int x = 0; x < tw; ++x)
                    grid.at(c, gy * th + y, gx * tw + x) = tiles[i].at(c, y, x);
    }
    return grid;
}

// ---- subcommand bodies ------------------------------------------------------

struct SynthOpts {
    GlobalOpts g;
    std::string mesh, primitive = "sphere", material = "bands", rotate = "0,0,0";
    std::string background = "1,1,1", elevations = "20,-20", mode = "uniform";
    int views = 32, resolution = 256;
    float radius = 2.4f;
};

int run_synth(const SynthOpts& o, int argc, const char* const* argv) {
    Mesh mesh = o.mesh.empty() ? make_primitive(o.primitive) : load_mesh(o.mesh);
    const Vec3f rot = parse_vec3(o.rotate, "--rotate");
    if (rot.norm() > 0) mesh = rotate_mesh(mesh, euler_rotation(rot));
    mesh = normalize_mesh(mesh);

    OrbitConfig oc;
    oc.count = o.views;
    oc.resolution = o.resolution;
    oc.elevations_deg = parse_float_list(o.elevations);
    oc.radius = o.radius;
    oc.seed = o.g.seed;
    oc.mode = o.mode == "random" ? OrbitMode::Random : OrbitMode::Uniform;

    const Vec3f bg = parse_vec3(o.background, "--background");
    const ViewSet views =
        synthesize_views(mesh, material_preset_from_name(o.material), make_orbit_cameras(oc), bg);
    save_viewset(o.g.out, views);
    save_obj(mesh, o.g.out + "/mesh.obj");
    write_manifest(o.g.out, "synth", argc, argv, o.g,
                   {{"views", o.views}, {"resolution", o.resolution}});
    std::printf("synth: %d views of %dx%d -> %s\n", views.count(), o.resolution, o.resolution,
                o.g.out.c_str());
    return 0;
}

struct FitOpts {
    GlobalOpts g;
    std::string mesh, targets;
    int depth = 6, samples = 100000, iters = 3000, views_per_step = 1;
    float lambda = 0.2f, lr_color = 0.01f, lr_geom = 0.005f;
    bool verbose = false;
};

int run_fit(const FitOpts& o, int argc, const char* const* argv) {
    const MeshPipeline p = prepare_mesh(o.mesh, o.depth, o.samples, o.g.seed);
    const ViewSet targets = load_viewset(o.targets);

    FitConfig fc;
    fc.iterations = o.iters;
    fc.views_per_step = o.views_per_step;
    fc.lambda = o.lambda;
    fc.lr_color = o.lr_color;
    fc.lr_geom = o.lr_geom;
    fc.seed = o.g.seed;
    fc.verbose = o.verbose;
    FitResult result = fit_gaussians(p.tree, targets, fc);

    save_gaussians(o.g.out + "/checkpoint.ogs", result.gaussians);
    write_loss_csv(o.g.out + "/loss.csv", result.history);
    const double final_psnr = result.history.empty() ? 0.0 : result.history.back().psnr;
    write_manifest(o.g.out, "fit", argc, argv, o.g,
                   {{"gaussians", result.gaussians.count()},
                    {"final_loss", result.history.empty() ? 0.0 : result.history.back().report.total},
                    {"final_train_psnr", final_psnr}});
    std::printf("fit: %d gaussians, final train psnr %.2f dB -> %s\n", result.gaussians.count(),
                final_psnr, o.g.out.c_str());
    return 0;
}

struct AblateOpts {
    GlobalOpts g;
    std::string mesh, primitive = "sphere", material = "bands", rotate = "0,0,0";
    int depth = 6, voxel_res = 64, samples = 100000, iters = 800, views = 24, holdout = 6,
        resolution = 128;
    bool verbose = false;
};

int run_ablate(const AblateOpts& o, int argc, const char* const* argv) {
    Mesh mesh = o.mesh.empty() ? make_primitive(o.primitive) : load_mesh(o.mesh);
    const Vec3f rot = parse_vec3(o.rotate, "--rotate");
    if (rot.norm() > 0) mesh = rotate_mesh(mesh, euler_rotation(rot));
    mesh = normalize_mesh(mesh);

    OrbitConfig oc;
    oc.count = o.views + o.holdout;
    oc.resolution = o.resolution;
    oc.elevations_deg = {30.f, 0.f, -30.f};
    auto cams = make_orbit_cameras(oc);
    // interleave: every (views+holdout)/holdout-th view held out
    std::vector<Camera> train_cams, hold_cams;
    const int stride = std::max(1, (o.views + o.holdout) / std::max(1, o.holdout));
    for (std::size_t i = 0; i < cams.size(); ++i) {
        if (o.holdout > 0 && i % static_cast<std::size_t>(stride) == static_cast<std::size_t>(stride - 1) &&
            static_cast<int>(hold_cams.size()) < o.holdout)
            hold_cams.push_back(cams[i]);
        else
            train_cams.push_back(cams[i]);
    }

    const auto preset = material_preset_from_name(o.material);
    const Vec3f bg = Vec3f::Ones();
    const ViewSet train_views = synthesize_views(mesh, preset, train_cams, bg);
    const ViewSet hold_views = synthesize_views(mesh, preset, hold_cams, bg);

    const SurfaceSamples samples = sample_surface(mesh, o.samples, o.g.seed);
    const Octree tree = build_octree(samples, o.depth);

    FitConfig fc;
    fc.iterations = o.iters;
    fc.seed = o.g.seed;
    fc.verbose = o.verbose;

    auto holdout_metrics = [&](const GaussianSet& set) {
        RenderConfig rc;
        rc.background = bg;
        const auto rendered = render_views(set, hold_cams, rc);
        double p = 0, s = 0;
        for (std::size_t v = 0; v < rendered.size(); ++v) {
            const Image got = rendered[v].to_image().slice(kChR, 3);
            const Image want = hold_views.images[v].slice(kChR, 3);
            p += psnr(got, want);
            s += ssim(got, want);
        }
        return std::make_pair(p / static_cast<double>(rendered.size()),
                              s / static_cast<double>(rendered.size()));
    };

    std::printf("ablate: octant-aligned fit (depth %d, %d leaves)\n", o.depth, tree.leaf_count());
    FitResult octant = fit_gaussians(tree, train_views, fc);
    const auto [opsnr, ossim] = holdout_metrics(octant.gaussians);

    std::printf("ablate: dense voxel fit (%d^3 = %d cells)\n", o.voxel_res,
                o.voxel_res * o.voxel_res * o.voxel_res);
    FitResult voxel = fit_voxel_baseline(o.voxel_res, train_views, fc);
    const auto [vpsnr, vssim] = holdout_metrics(voxel.gaussians);

    std::ofstream csv(o.g.out + "/table.csv");
    csv << "method,psnr,ssim,count\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "octant-aligned,%.2f,%.4f,%d\n", opsnr, ossim,
                  octant.gaussians.count());
    csv << buf;
    std::snprintf(buf, sizeof(buf), "full-voxel,%.2f,%.4f,%d\n", vpsnr, vssim,
                  voxel.gaussians.count());
    csv << buf;
    csv.close();

    save_gaussians(o.g.out + "/octant.ogs", octant.gaussians);
    write_loss_csv(o.g.out + "/octant_loss.csv", octant.history);
    write_loss_csv(o.g.out + "/voxel_loss.csv", voxel.history);
    write_manifest(o.g.out, "ablate", argc, argv, o.g,
                   {{"octant_psnr", opsnr},
                    {"octant_ssim", ossim},
                    {"octant_count", octant.gaussians.count()},
                    {"voxel_psnr", vpsnr},
                    {"voxel_ssim", vssim},
                    {"voxel_count", voxel.gaussians.count()}});
    std::printf("ablate: octant %.2f dB (%d gaussians) vs voxel %.2f dB (%d gaussians)\n", opsnr,
                octant.gaussians.count(), vpsnr, voxel.gaussians.count());
    return 0;
}

struct TrainOpts {
    GlobalOpts g;
    std::string data;
    int steps = 2000, views_per_step = 8, samples = 100000;
    bool toy = true, paper_shape = false, albedo_only = false, verbose = false;
    float lr = 4e-4f;
};

TrainObject load_train_object(const std::string& dir, int n_samples, std::uint64_t seed) {
    TrainObject obj;
    obj.name = fs::path(dir).filename().string();
    const Mesh mesh = normalize_mesh(load_mesh(dir + "/mesh.obj"));
    obj.prefit = load_gaussians(dir + "/prefit.ogs");
    const SurfaceSamples samples = sample_surface(mesh, n_samples, seed);
    obj.tree = build_octree(samples, obj.prefit.depth);
    OGS_REQUIRE(obj.tree.finest().codes == obj.prefit.codes,
                "train object " + obj.name +
                    ": octree does not match prefit checkpoint (use the fit-time --samples/--seed)");
    obj.feats = compute_leaf_features(obj.tree, samples);
    obj.views = load_viewset(dir + "/targets");
    return obj;
}

int run_train(const TrainOpts& o, int argc, const char* const* argv) {
    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(o.data))
        if (e.is_directory() && fs::exists(e.path() / "prefit.ogs")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    OGS_REQUIRE(!dirs.empty(), "train: no objects with prefit.ogs under " + o.data);

    std::vector<TrainObject> dataset;
    for (const auto& d : dirs) {
        try {
            dataset.push_back(load_train_object(d, o.samples, o.g.seed));
        } catch (const std::exception& e) {
            std::fprintf(stderr, "warning: skipping %s: %s\n", d.c_str(), e.what());
        }
    }
    OGS_REQUIRE(!dataset.empty(), "train: no loadable objects");

    UNetConfig ncfg = o.paper_shape ? UNetConfig::paper_shape(o.albedo_only) : UNetConfig::toy();
    if (o.albedo_only) ncfg.out_channels = 11;
    ncfg.input_depth = dataset[0].prefit.depth;

    TrainConfig tc;
    tc.steps = o.steps;
    tc.views_per_step = o.views_per_step;
    tc.lr = o.lr;
    tc.seed = o.g.seed;
    tc.verbose = o.verbose;
    if (o.albedo_only) {
        tc.losses.use_rough = false;
        tc.losses.use_metal = false;
    }

    TrainResult result = train_regressor(ncfg, dataset, tc);
    save_net(o.g.out + "/net.onet", result.net);
    write_loss_csv(o.g.out + "/loss.csv", result.history);
    write_manifest(o.g.out, "train", argc, argv, o.g,
                   {{"objects", dataset.size()},
                    {"steps", o.steps},
                    {"final_loss",
                     result.history.empty() ? 0.0 : result.history.back().report.total}});
    std::printf("train: %zu objects, %d steps -> %s/net.onet\n", dataset.size(), o.steps,
                o.g.out.c_str());
    return 0;
}

struct InferOpts {
    GlobalOpts g;
    std::string mesh, net;
    int samples = 100000, depth = 0; // 0 = net input depth
};

int run_infer(const InferOpts& o, int argc, const char* const* argv) {
    const OctreeNet net = load_net(o.net);
    const int depth = o.depth > 0 ? o.depth : net.cfg.input_depth;
    const MeshPipeline p = prepare_mesh(o.mesh, depth, o.samples, o.g.seed);
    const LeafFeatures feats = compute_leaf_features(p.tree, p.samples);
    const GaussianSet pred = predict_gaussians(net, p.tree, feats);
    save_gaussians(o.g.out + "/checkpoint.ogs", pred);
    write_manifest(o.g.out, "infer", argc, argv, o.g, {{"gaussians", pred.count()}});
    std::printf("infer: %d gaussians -> %s/checkpoint.ogs\n", pred.count(), o.g.out.c_str());
    return 0;
}

struct BakeOpts {
    GlobalOpts g;
    std::string mesh, gaussians;
    int size = 1024, iters = 32, view_res = 512;
    std::string background = "1,1,1";
    bool verbose = false;
};

int run_bake(const BakeOpts& o, int argc, const char* const* argv) {
    Mesh mesh = normalize_mesh(load_mesh(o.mesh));
    const GaussianSet set = load_gaussians(o.gaussians);
    bool fallback = false;
    if (!mesh.has_uvs()) {
        mesh = make_fallback_atlas(mesh, o.size);
        save_obj(mesh, o.g.out + "/mesh_uv.obj");
        fallback = true;
    }
    BakeConfig bc;
    bc.resolution = o.size;
    bc.iterations = o.iters;
    bc.background = parse_vec3(o.background, "--background");
    bc.verbose = o.verbose;
    const auto cams = baking_cameras(o.view_res);
    BakeResult result = bake_textures(mesh, set, cams, bc);
    save_atlas(o.g.out, result.atlas);

    std::ofstream csv(o.g.out + "/bake_loss.csv");
    csv << "iter,mse\n";
    for (std::size_t i = 0; i < result.loss_history.size(); ++i)
        csv << i << "," << result.loss_history[i] << "\n";

    write_manifest(o.g.out, "bake", argc, argv, o.g,
                   {{"atlas", o.size},
                    {"fallback_uvs", fallback},
                    {"final_mse",
                     result.loss_history.empty() ? 0.0 : result.loss_history.back()}});
    std::printf("bake: %dx%d atlas -> %s\n", o.size, o.size, o.g.out.c_str());
    return 0;
}

struct RenderOpts {
    GlobalOpts g;
    std::string mesh, atlas, lights, reference;
    int views = 8, resolution = 512;
    std::string background = "0,0,0";
};

int run_render(const RenderOpts& o, int argc, const char* const* argv) {
    Mesh mesh = normalize_mesh(load_mesh(o.mesh));
    const TextureAtlas atlas = load_atlas(o.atlas);
    if (!mesh.has_uvs()) mesh = make_fallback_atlas(mesh, atlas.size);
    const LightRig rig = o.lights.empty() ? LightRig::default_rig() : load_light_rig(o.lights);

    OrbitConfig oc;
    oc.count = o.views;
    oc.resolution = o.resolution;
    const auto cams = make_orbit_cameras(oc);
    const Vec3f bg = parse_vec3(o.background, "--background");

    std::vector<Image> rendered;
    char name[64];
    for (std::size_t v = 0; v < cams.size(); ++v) {
        rendered.push_back(shade_pbr(mesh, atlas, cams[v], rig, bg));
        std::snprintf(name, sizeof(name), "/view_%03zu.png", v);
        write_png(o.g.out + name, rendered.back());
    }
    write_png(o.g.out + "/grid.png", assemble_grid(rendered));

    json metrics;
    if (!o.reference.empty()) {
        const auto reference = read_png_dir(o.reference);
        const MetricsTable table = evaluate_images(rendered, reference);
        write_metrics_csv(o.g.out + "/metrics.csv", table);
        metrics["mean_psnr"] = table.mean_psnr;
        metrics["mean_ssim"] = table.mean_ssim;
    }
    write_manifest(o.g.out, "render", argc, argv, o.g, metrics);
    std::printf("render: %d views -> %s\n", o.views, o.g.out.c_str());
    return 0;
}

struct EvalOpts {
    GlobalOpts g;
    std::string a, b;
};

int run_eval(const EvalOpts& o, int argc, const char* const* argv) {
    const auto imgs_a = read_png_dir(o.a);
    const auto imgs_b = read_png_dir(o.b);
    const MetricsTable table = evaluate_images(imgs_a, imgs_b);
    write_metrics_csv(o.g.out + "/metrics.csv", table);
    write_manifest(o.g.out, "eval", argc, argv, o.g,
                   {{"mean_psnr", table.mean_psnr}, {"mean_ssim", table.mean_ssim}});
    std::printf("eval: mean psnr %.2f dB, mean ssim %.4f\n", table.mean_psnr, table.mean_ssim);
    return 0;
}

} // namespace

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"octant-aligned 3D gaussian splatting for PBR material fitting and baking",
                 "ogs"};
    app.require_subcommand(1);

    SynthOpts synth_o;
    auto* synth = app.add_subcommand("synth", "render procedural multi-view targets for a mesh");
    synth->add_option("--mesh", synth_o.mesh, "input OBJ (overrides --primitive)");
    synth->add_option("--primitive", synth_o.primitive, "sphere|cube|torus|quad");
    synth->add_option("--material", synth_o.material, "bands|checker|constant");
    synth->add_option("--rotate", synth_o.rotate, "euler degrees rx,ry,rz");
    synth->add_option("--views", synth_o.views);
    synth->add_option("--resolution", synth_o.resolution);
    synth->add_option("--radius", synth_o.radius);
    synth->add_option("--elevations", synth_o.elevations, "comma-separated degrees");
    synth->add_option("--mode", synth_o.mode, "uniform|random");
    synth->add_option("--background", synth_o.background, "r,g,b");
    add_globals(synth, synth_o.g);

    FitOpts fit_o;
    auto* fit = app.add_subcommand("fit", "pre-fit octant-aligned gaussians to target views");
    fit->add_option("--mesh", fit_o.mesh)->required();
    fit->add_option("--depth", fit_o.depth);
    fit->add_option("--samples", fit_o.samples);
    fit->add_option("--targets", fit_o.targets, "directory written by synth")->required();
    fit->add_option("--iters", fit_o.iters);
    fit->add_option("--views-per-step", fit_o.views_per_step);
    fit->add_option("--lambda", fit_o.lambda);
    fit->add_option("--lr-color", fit_o.lr_color);
    fit->add_option("--lr-geom", fit_o.lr_geom);
    fit->add_flag("--verbose", fit_o.verbose);
    add_globals(fit, fit_o.g);

    AblateOpts ablate_o;
    auto* ablate = app.add_subcommand("ablate", "octant-aligned vs dense-voxel fitting table");
    ablate->add_option("--mesh", ablate_o.mesh, "input OBJ (overrides --primitive)");
    ablate->add_option("--primitive", ablate_o.primitive);
    ablate->add_option("--material", ablate_o.material);
    ablate->add_option("--rotate", ablate_o.rotate);
    ablate->add_option("--depth", ablate_o.depth);
    ablate->add_option("--voxel-res", ablate_o.voxel_res);
    ablate->add_option("--samples", ablate_o.samples);
    ablate->add_option("--iters", ablate_o.iters);
    ablate->add_option("--views", ablate_o.views);
    ablate->add_option("--holdout", ablate_o.holdout);
    ablate->add_option("--resolution", ablate_o.resolution);
    ablate->add_flag("--verbose", ablate_o.verbose);
    add_globals(ablate, ablate_o.g);

    TrainOpts train_o;
    auto* train = app.add_subcommand("train", "train the octree regressor on pre-fit objects");
    train->add_option("--data", train_o.data, "dataset root (obj dirs with prefit.ogs)")
        ->required();
    train->add_option("--steps", train_o.steps);
    train->add_option("--views-per-step", train_o.views_per_step);
    train->add_option("--samples", train_o.samples);
    train->add_option("--lr", train_o.lr);
    train->add_flag("--toy", train_o.toy, "toy network shape (default)");
    train->add_flag("--paper-shape", train_o.paper_shape, "full-depth network shape");
    train->add_flag("--albedo-only", train_o.albedo_only, "11-channel output head");
    train->add_flag("--verbose", train_o.verbose);
    add_globals(train, train_o.g);

    InferOpts infer_o;
    auto* infer = app.add_subcommand("infer", "regress gaussians for a mesh with a trained net");
    infer->add_option("--mesh", infer_o.mesh)->required();
    infer->add_option("--net", infer_o.net)->required();
    infer->add_option("--samples", infer_o.samples);
    infer->add_option("--depth", infer_o.depth, "octree depth (default: net input depth)");
    add_globals(infer, infer_o.g);

    BakeOpts bake_o;
    auto* bake = app.add_subcommand("bake", "bake gaussian renders into UV material maps");
    bake->add_option("--mesh", bake_o.mesh)->required();
    bake->add_option("--gaussians", bake_o.gaussians, "gaussian checkpoint")->required();
    bake->add_option("--size", bake_o.size);
    bake->add_option("--iters", bake_o.iters);
    bake->add_option("--view-res", bake_o.view_res);
    bake->add_option("--background", bake_o.background);
    bake->add_flag("--verbose", bake_o.verbose);
    add_globals(bake, bake_o.g);

    RenderOpts render_o;
    auto* render = app.add_subcommand("render", "PBR preview of a baked mesh under a light rig");
    render->add_option("--mesh", render_o.mesh)->required();
    render->add_option("--atlas", render_o.atlas, "directory written by bake")->required();
    render->add_option("--lights", render_o.lights, "light rig json");
    render->add_option("--views", render_o.views);
    render->add_option("--resolution", render_o.resolution);
    render->add_option("--background", render_o.background);
    render->add_option("--reference", render_o.reference, "directory of reference pngs");
    add_globals(render, render_o.g);

    EvalOpts eval_o;
    auto* eval = app.add_subcommand("eval", "PSNR/SSIM between two image directories");
    eval->add_option("--a", eval_o.a)->required();
    eval->add_option("--b", eval_o.b)->required();
    add_globals(eval, eval_o.g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (synth->parsed()) {
            apply_globals(synth_o.g);
            return run_synth(synth_o, argc, argv);
        }
        if (fit->parsed()) {
            apply_globals(fit_o.g);
            return run_fit(fit_o, argc, argv);
        }
        if (ablate->parsed()) {
            apply_globals(ablate_o.g);
            return run_ablate(ablate_o, argc, argv);
        }
        if (train->parsed()) {
            apply_globals(train_o.g);
            return run_train(train_o, argc, argv);
        }
        if (infer->parsed()) {
            apply_globals(infer_o.g);
            return run_infer(infer_o, argc, argv);
        }
        if (bake->parsed()) {
            apply_globals(bake_o.g);
            return run_bake(bake_o, argc, argv);
        }
        if (render->parsed()) {
            apply_globals(render_o.g);
            return run_render(render_o, argc, argv);
        }
        if (eval->parsed()) {
            apply_globals(eval_o.g);
            return run_eval(eval_o, argc, argv);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}

} // namespace ogs::cli
