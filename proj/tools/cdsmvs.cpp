#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "cds/ablation.hpp"
#include "cds/dataset.hpp"
#include "cds/evalmetrics.hpp"
#include "cds/fusion.hpp"
#include "cds/image_io.hpp"
#include "cds/scalespace.hpp"

namespace fs = std::filesystem;
using namespace cds;

namespace {

std::string scene_dir_name(const std::string& root, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "/scene_%04d", i);
    return root + buf;
}

std::string view_file(const std::string& dir, const char* stem, int i, const char* ext) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "/%s_%04d.%s", stem, i, ext);
    return dir + buf;
}

Vec3 parse_epipole(const std::string& s) {
    Vec3 e;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &e.x, &e.y, &e.z) != 3)
        throw std::runtime_error("epipole must be 'x,y,z', got: " + s);
    return e;
}

Layout parse_layout(const std::string& s) {
    if (s == "plane") return Layout::Plane;
    if (s == "two_planes") return Layout::TwoPlanes;
    if (s == "sphere_on_plane") return Layout::SphereOnPlane;
    if (s == "textured_box") return Layout::TexturedBox;
    throw std::runtime_error("unknown layout: " + s);
}

TextureKind parse_texture(const std::string& s) {
    if (s == "checker") return TextureKind::Checker;
    if (s == "perlin") return TextureKind::Perlin;
    if (s == "flat") return TextureKind::Flat;
    if (s == "halfcard") return TextureKind::HalfCard;
    throw std::runtime_error("unknown texture: " + s);
}

std::vector<TrainSample> load_samples(const std::string& root, int max_srcs, int refs_per_scene) {
    std::vector<TrainSample> samples;
    for (const auto& dir : list_scene_dirs(root)) {
        DatasetScene ds = read_scene_dataset(dir);
        auto scene_samples = samples_from_dataset(ds, max_srcs);
        const int keep = refs_per_scene > 0
                             ? std::min<int>(refs_per_scene, static_cast<int>(scene_samples.size()))
                             : static_cast<int>(scene_samples.size());
        for (int i = 0; i < keep; ++i) samples.push_back(std::move(scene_samples[static_cast<size_t>(i)]));
    }
    return samples;
}

CdsMvsModel load_model(const std::string& ckpt) {
    CdsMvsModel model(infer_model_config(ckpt));
    model.params.load(ckpt);
    return model;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"curvature-guided dynamic-scale multi-view stereo"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate synthetic scenes with exact ground truth");
    struct {
        std::string out, layout = "mixed", texture = "perlin";
        int scenes = 8, views = 3, width = 128, height = 128, octaves = 3;
        double baseline = 1.25, dmin = 2.0, dmax = 6.0, noise = 0.0, checker_freq = 2.0, plane_depth = 0.0;
        uint64_t seed = 1;
    } sy;
    synth->add_option("--out", sy.out, "output dataset root")->required();
    synth->add_option("--scenes", sy.scenes, "number of scenes");
    synth->add_option("--layout", sy.layout, "plane|two_planes|sphere_on_plane|textured_box|mixed");
    synth->add_option("--texture", sy.texture, "checker|perlin|flat|halfcard");
    synth->add_option("--views", sy.views, "cameras per scene");
    synth->add_option("--width", sy.width);
    synth->add_option("--height", sy.height);
    synth->add_option("--baseline", sy.baseline, "arc spacing between cameras");
    synth->add_option("--dmin", sy.dmin);
    synth->add_option("--dmax", sy.dmax);
    synth->add_option("--noise", sy.noise, "Gaussian pixel noise sigma");
    synth->add_option("--checker-freq", sy.checker_freq);
    synth->add_option("--octaves", sy.octaves);
    synth->add_option("--plane-depth", sy.plane_depth, "pin the front surface depth (0 = seeded)");
    synth->add_option("--seed", sy.seed);
    synth->callback([&] {
        const Layout cycle[4] = {Layout::SphereOnPlane, Layout::TwoPlanes, Layout::TexturedBox, Layout::Plane};
        for (int i = 0; i < sy.scenes; ++i) {
            SceneSpec spec;
            spec.layout = sy.layout == "mixed" ? cycle[i % 4] : parse_layout(sy.layout);
            spec.texture = parse_texture(sy.texture);
            spec.checker_freq = sy.checker_freq;
            spec.perlin_octaves = sy.octaves;
            spec.n_views = sy.views;
            spec.baseline = sy.baseline;
            spec.width = sy.width;
            spec.height = sy.height;
            spec.d_min = sy.dmin;
            spec.d_max = sy.dmax;
            spec.noise_sigma = sy.noise;
            spec.plane_depth = sy.plane_depth;
            spec.seed = sy.seed + static_cast<uint64_t>(i);
            Scene scene = generate_scene(spec);
            const double residual = cross_view_consistency_check(scene);
            if (residual >= 1e-6)
                throw std::runtime_error("scene " + std::to_string(i) +
                                         " failed the consistency check: " + std::to_string(residual));
            write_scene_dataset(scene, scene_dir_name(sy.out, i));
            std::cout << "scene " << i << ": " << sy.views << " views, consistency " << residual << "\n";
        }
        std::cout << "wrote " << sy.scenes << " scenes to " << sy.out << "\n";
    });

    // ---- train ----
    auto* tr = app.add_subcommand("train", "train the full pipeline on a dataset");
    struct {
        std::string data, out, holdout, config, curvature = "learnable";
        bool no_vis_curv = false;
        int views = 2, refs_per_scene = 1;
    } t;
    tr->add_option("--data", t.data, "training dataset root")->required();
    tr->add_option("--out", t.out, "output directory")->required();
    tr->add_option("--holdout", t.holdout, "held-out dataset root for validation");
    tr->add_option("--config", t.config, "key = value training config");
    tr->add_option("--curvature", t.curvature, "learnable|original");
    tr->add_flag("--no-vis-curvature", t.no_vis_curv, "visibility net sees entropy only");
    tr->add_option("--views", t.views, "source views per sample");
    tr->add_option("--refs-per-scene", t.refs_per_scene, "reference views per scene (0 = all)");
    tr->callback([&] {
        LossConfig cfg = t.config.empty() ? LossConfig{} : parse_loss_config(t.config);
        MvsModelConfig mcfg;
        if (t.curvature == "original")
            mcfg.feat.mode = CurvatureMode::Original;
        else if (t.curvature != "learnable")
            throw std::runtime_error("unknown curvature mode: " + t.curvature);
        mcfg.vis_with_curvature = !t.no_vis_curv;
        mcfg.init_seed = cfg.seed;
        CdsMvsModel model(mcfg);

        auto train_set = load_samples(t.data, t.views, t.refs_per_scene);
        std::vector<TrainSample> holdout;
        if (!t.holdout.empty()) holdout = load_samples(t.holdout, t.views, t.refs_per_scene);
        std::cout << "training on " << train_set.size() << " samples (" << model.params.total_parameters()
                  << " parameters), " << cfg.epochs << " epochs\n";
        TrainResult res = train(model, train_set, holdout, cfg, t.out);
        for (size_t e = 0; e < res.train_mae_per_epoch.size(); ++e)
            std::cout << "epoch " << e << ": train MAE " << res.train_mae_per_epoch[e] << ", val MAE "
                      << res.val_mae_per_epoch[e] << "\n";
        std::cout << "checkpoint: " << res.checkpoint_path << "\nbest: " << res.best_path << "\n";
    });

    // ---- depth ----
    auto* dp = app.add_subcommand("depth", "estimate depth + confidence maps for one reference view");
    struct {
        std::string ckpt, scene, out;
        int ref = 0, views = 2;
        double tau = 0.01;
    } d;
    dp->add_option("--ckpt", d.ckpt)->required();
    dp->add_option("--scene", d.scene, "scene directory")->required();
    dp->add_option("--ref", d.ref, "reference view index");
    dp->add_option("--out", d.out, "output directory")->required();
    dp->add_option("--views", d.views, "source views");
    dp->add_option("--tau", d.tau, "softmax temperature at inference");
    dp->callback([&] {
        CdsMvsModel model = load_model(d.ckpt);
        DatasetScene ds = read_scene_dataset(d.scene);
        if (d.ref < 0 || d.ref >= static_cast<int>(ds.views.size()))
            throw std::runtime_error("reference index out of range");
        std::vector<InputView> srcs;
        for (int s : ds.pairs[static_cast<size_t>(d.ref)]) {
            if (static_cast<int>(srcs.size()) >= d.views) break;
            srcs.push_back(ds.views[static_cast<size_t>(s)]);
        }
        const InputView& ref = ds.views[static_cast<size_t>(d.ref)];
        CascadeOutput out = cascade_forward(model, ref, srcs, d.tau);
        fs::create_directories(d.out);
        write_pfm(view_file(d.out, "depth", d.ref, "pfm"), out.depth[3].value());
        write_pfm(view_file(d.out, "conf", d.ref, "pfm"),
                  full_res_confidence(out, ref.image.dim(1), ref.image.dim(2)));
        std::cout << "wrote depth and confidence for view " << d.ref << " to " << d.out << "\n";
    });

    // ---- curvature ----
    auto* cv = app.add_subcommand("curvature", "dump a reference normal-curvature map as PFM");
    struct {
        std::string image, out, epipole = "1,0,0", mode = "exact";
        double sigma = 1.0, kernel_scale = 0.01;
    } c;
    cv->add_option("--image", c.image, "input PNG")->required();
    cv->add_option("--out", c.out, "output PFM")->required();
    cv->add_option("--epipole", c.epipole, "homogeneous epipole 'x,y,z'");
    cv->add_option("--sigma", c.sigma);
    cv->add_option("--mode", c.mode, "exact|approx");
    cv->add_option("--kernel-scale", c.kernel_scale, "kernel rescaling for approx mode");
    cv->callback([&] {
        const Array img = luminance(read_png(c.image));
        const EpipolarField om = epipolar_direction_field(parse_epipole(c.epipole), img.dim(0), img.dim(1));
        Array curv;
        if (c.mode == "exact")
            curv = normal_curvature_exact(img, om, c.sigma);
        else if (c.mode == "approx")
            curv = normal_curvature_approx(img, om, c.sigma, c.kernel_scale);
        else
            throw std::runtime_error("unknown curvature mode: " + c.mode);
        write_pfm(c.out, curv);
        std::cout << "wrote " << c.out << "\n";
    });

    // ---- scalemap ----
    auto* sm = app.add_subcommand("scalemap", "dump the first layer's argmax scale selection as PNG");
    struct {
        std::string ckpt, image, out, epipole = "1,0,0";
        double tau = 0.01;
    } s;
    sm->add_option("--ckpt", s.ckpt)->required();
    sm->add_option("--image", s.image)->required();
    sm->add_option("--out", s.out)->required();
    sm->add_option("--epipole", s.epipole);
    sm->add_option("--tau", s.tau);
    sm->callback([&] {
        CdsMvsModel model = load_model(s.ckpt);
        const Array img = read_png(s.image);
        const int H = img.dim(1), W = img.dim(2);
        if (H % 8 || W % 8) throw std::runtime_error("image resolution must be divisible by 8");
        const Vec3 e = parse_epipole(s.epipole);
        const EpipolarField om =
            epipolar_direction_field(Vec3{e.x / 2, e.y / 2, e.z}, H / 2, W / 2);
        CdsConvOutput out = model.feat.enc2a.forward(constant(img), om, s.tau);
        const int K = out.weights.value().dim(0);
        const long m = static_cast<long>(H / 2) * (W / 2);
        Array map({H / 2, W / 2});
        for (long i = 0; i < m; ++i) {
            int best = 0;
            for (int k = 1; k < K; ++k)
                if (out.weights.value()[k * m + i] > out.weights.value()[best * m + i]) best = k;
            map[i] = K > 1 ? static_cast<double>(best) / (K - 1) : 0.0;
        }
        write_png(s.out, map);
        std::cout << "wrote " << s.out << " (" << K << " candidate scales)\n";
    });

    // ---- fuse ----
    auto* fu = app.add_subcommand("fuse", "fuse per-view depth maps into a point cloud");
    struct {
        std::string scene, depths, out;
        FusionParams params;
    } f;
    fu->add_option("--scene", f.scene, "scene directory (cameras + images)")->required();
    fu->add_option("--depths", f.depths, "directory with depth_NNNN.pfm / conf_NNNN.pfm")->required();
    fu->add_option("--out", f.out, "output PLY")->required();
    fu->add_option("--conf", f.params.conf_thresh, "confidence threshold");
    fu->add_option("--consistent", f.params.n_consistent, "required consistent views");
    fu->add_option("--reproj", f.params.max_reproj_px, "max reprojection error [px]");
    fu->add_option("--rel-depth", f.params.max_rel_depth_diff, "max relative depth difference");
    fu->callback([&] {
        DatasetScene ds = read_scene_dataset(f.scene);
        std::vector<Array> depths, confs;
        for (int i = 0; i < static_cast<int>(ds.views.size()); ++i) {
            depths.push_back(read_pfm(view_file(f.depths, "depth", i, "pfm")));
            confs.push_back(read_pfm(view_file(f.depths, "conf", i, "pfm")));
        }
        PointCloud cloud = fuse(depths, confs, ds.views, f.params);
        write_ply(f.out, cloud);
        std::cout << "fused " << cloud.points.size() << " points into " << f.out << "\n";
    });

    // ---- eval-depth ----
    auto* ed = app.add_subcommand("eval-depth", "depth precision and MAE against ground truth");
    struct {
        std::string est, gt, mask;
        std::vector<double> thresholds{0.1};
    } e;
    ed->add_option("--est", e.est)->required();
    ed->add_option("--gt", e.gt)->required();
    ed->add_option("--mask", e.mask, "optional PFM mask (default: gt > 0)");
    ed->add_option("--thresholds", e.thresholds, "precision thresholds");
    ed->callback([&] {
        const Array est = read_pfm(e.est);
        const Array gt = read_pfm(e.gt);
        Array mask;
        if (e.mask.empty()) {
            mask = Array(gt.shape());
            for (long i = 0; i < gt.numel(); ++i) mask[i] = gt[i] > 0 ? 1.0 : 0.0;
        } else {
            mask = read_pfm(e.mask);
        }
        const DepthEval res = eval_depth(est, gt, mask, e.thresholds);
        std::cout << "MAE " << res.mae << "\n";
        for (size_t i = 0; i < e.thresholds.size(); ++i)
            std::cout << "precision@" << e.thresholds[i] << " " << res.precision[i] << "\n";
    });

    // ---- eval-cloud ----
    auto* ec = app.add_subcommand("eval-cloud", "accuracy / completeness / overall between clouds");
    struct {
        std::string est, gt;
        double thresh = 0.0;
    } g;
    ec->add_option("--est", g.est)->required();
    ec->add_option("--gt", g.gt)->required();
    ec->add_option("--thresh", g.thresh, "outlier clipping distance (default: 20x GT point spacing)");
    ec->callback([&] {
        const PointCloud est_cloud = read_ply(g.est);
        const PointCloud gt_cloud = read_ply(g.gt);
        const double thresh = g.thresh > 0 ? g.thresh : 20.0 * estimate_point_spacing(gt_cloud);
        std::cout << "threshold " << thresh << "\n";
        const CloudEval res = eval_cloud(est_cloud, gt_cloud, thresh);
        std::cout << "accuracy " << res.accuracy << "\ncompleteness " << res.completeness << "\noverall "
                  << res.overall << "\n";
    });

    // ---- ablate ----
    auto* ab = app.add_subcommand("ablate", "train the curvature/visibility ablation grid");
    struct {
        std::string data, holdout, out, mode = "all", config;
        int views = 2, refs_per_scene = 1;
    } a;
    ab->add_option("--data", a.data)->required();
    ab->add_option("--holdout", a.holdout);
    ab->add_option("--out", a.out)->required();
    ab->add_option("--mode", a.mode, "all|learnable|original|vis|no-vis");
    ab->add_option("--config", a.config, "training config file");
    ab->add_option("--views", a.views);
    ab->add_option("--refs-per-scene", a.refs_per_scene);
    ab->callback([&] {
        LossConfig cfg = a.config.empty() ? LossConfig{} : parse_loss_config(a.config);
        auto train_set = load_samples(a.data, a.views, a.refs_per_scene);
        std::vector<TrainSample> holdout;
        if (!a.holdout.empty()) holdout = load_samples(a.holdout, a.views, a.refs_per_scene);
        const auto results = run_ablation(train_set, holdout, cfg, select_variants(a.mode), a.out);
        std::cout << format_ablation_table(results);
        std::cout << "table written to " << a.out << "/ablation.csv\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
