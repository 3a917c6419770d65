#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>

#include "restage/bundle_io.hpp"
#include "restage/config.hpp"
#include "restage/metrics.hpp"
#include "restage/reports.hpp"
#include "restage/restage.hpp"
#include "restage/rng.hpp"

namespace fs = std::filesystem;
using namespace restage;

namespace {

struct CommonArgs {
    std::string config = "default";
    int64_t seed = -1;
    std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config, "config file or preset (default, desk, paper)");
    cmd->add_option("--seed", args.seed, "overrides the config seed");
    cmd->add_option("--out", args.out, "output directory")->required();
}

RunConfig resolve(const CommonArgs& args) {
    RunConfig config = load_config(args.config);
    if (args.seed >= 0) config.optim.seed = static_cast<uint64_t>(args.seed);
    config.synth.seed = config.optim.seed;
    return config;
}

fs::path prepare_out(const CommonArgs& args, const RunConfig& config) {
    fs::path out(args.out);
    fs::create_directories(out);
    write_file_atomic(out / "resolved-config.json", dump_config(config));
    return out;
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

MetricsReport compute_metrics(const RunConfig& config, const SceneModel& model, int t1,
                              const GroundTruth* gt, const SequenceBundle* bundle) {
    MetricsReport report;
    Vec3 origin;
    double diagonal;
    canonical_bounds(model, origin, diagonal);
    report.voxel_size = config.voxel_rel * diagonal;
    report.sample_seed = config.optim.seed;
    const int t_begin = std::min(t1, model.frame_count - 2);
    report.per_frame_volumes =
        foreground_volumes(model, t_begin, model.frame_count, report.voxel_size, origin);
    report.volume_consistency = volume_consistency(report.per_frame_volumes,
                                                   config.metric_gamma, config.variance_floor);
    KnnGraph graph = build_knn_graph(model, config.losses.knn_k);
    report.edge_consistency =
        edge_consistency(model, graph, t_begin, model.frame_count, config.edge_sample,
                         config.optim.seed, config.metric_gamma, config.variance_floor);
    if (gt) {
        report.tracking_l1 = tracking_l1(model, *gt);
        if (bundle) report.tracking_l1_full = tracking_l1_full(model, *gt, *bundle);
    }
    return report;
}

int cmd_synth(const CommonArgs& args) {
    RunConfig config = resolve(args);
    fs::path out = prepare_out(args, config);
    if (config.pair_enabled) {
        ScenePair pair =
            gen_pair(config.synth, config.driving_variant, config.driving_frames,
                     config.artifact);
        write_bundle(pair.base, out / "base");
        write_bundle(pair.driving, out / "driving");
        write_ground_truth(pair.gt_base, out / "gt-base");
        write_ground_truth(pair.gt_driving, out / "gt-driving");
    } else {
        auto [bundle, gt] = gen_scene(config.synth);
        write_bundle(bundle, out / "bundle");
        write_ground_truth(gt, out / "gt");
    }
    return 0;
}

int cmd_fit(const CommonArgs& args, const std::string& bundle_dir) {
    RunConfig config = resolve(args);
    fs::path out = prepare_out(args, config);
    Timer timer;
    SequenceBundle bundle = read_bundle(bundle_dir);

    FitReport init_report, refine_report;
    SceneModel model = init_motion(bundle, config.optim, config.losses, &init_report);
    LossWeights refine_weights = resolve_taus(config, model, bundle);
    refine(model, bundle, config.optim, refine_weights, &refine_report);

    write_model(model, out / "model.json");
    write_fit_report(init_report, &refine_report, out / "fit-report.json");
    append_timing(out / "timing.log", "fit", timer.seconds());
    return 0;
}

int cmd_restage(const CommonArgs& args, const std::string& base_dir,
                const std::string& driving_dir, const std::vector<std::string>& ablate) {
    RunConfig config = resolve(args);
    bool ablate_rigidity = false, ablate_backtracing = false, ablate_joint = false;
    for (const std::string& a : ablate) {
        if (a == "rigidity")
            ablate_rigidity = true;
        else if (a == "backtracing")
            ablate_backtracing = true;
        else if (a == "joint")
            ablate_joint = true;
        else
            throw CLI::ValidationError("--ablate must be rigidity, backtracing or joint");
    }
    if (ablate_rigidity) config.losses.lambda_rigid = 0.0;

    fs::path out = prepare_out(args, config);
    Timer timer;
    SequenceBundle driving = read_bundle(driving_dir);

    SequenceBundle train;
    if (ablate_joint) {
        train = driving;
        train.t1 = 0;
    } else {
        SequenceBundle base = read_bundle(base_dir);
        CombinedBundle combined = rewind_concat(base, driving);
        train = combined.seq;
    }
    write_bundle(train, out / "combined-bundle");

    FitReport init_report, refine_report;
    SceneModel model = init_motion(train, config.optim, config.losses, &init_report);

    if (!ablate_joint && !ablate_backtracing) {
        DisocclusionSet dis = detect_disocclusion(train, model.t_cano);
        model = insert_disoccluded(model, train, dis);
    }

    LossWeights refine_weights = resolve_taus(config, model, train);
    refine(model, train, config.optim, refine_weights, &refine_report);

    write_model(model, out / "model-combined.json");
    if (!ablate_joint && train.t1 >= 1)
        write_model(truncate(model, train.t1), out / "model.json");
    else
        write_model(model, out / "model.json");
    write_fit_report(init_report, &refine_report, out / "fit-report.json");
    append_timing(out / "timing.log", "restage", timer.seconds());
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& model_file,
             const std::string& bundle_dir, const std::string& gt_dir, int dump_depth) {
    RunConfig config = resolve(args);
    fs::path out = prepare_out(args, config);
    SceneModel model = read_model(model_file);
    SequenceBundle bundle = read_bundle(bundle_dir);
    GroundTruth gt;
    bool has_gt = !gt_dir.empty();
    if (has_gt) gt = read_ground_truth(gt_dir);

    MetricsReport report = compute_metrics(config, model, bundle.t1,
                                           has_gt ? &gt : nullptr, &bundle);
    write_metrics_report(report, out / "metrics.json");

    if (dump_depth >= 0) {
        if (dump_depth >= model.frame_count)
            throw std::invalid_argument("--dump-depth frame out of range");
        DepthBuffer buf = render_depth(model, bundle.cameras.at(dump_depth), dump_depth);
        double near = 1e9, far = 0;
        for (double d : buf.depth)
            if (std::isfinite(d)) {
                near = std::min(near, d);
                far = std::max(far, d);
            }
        if (!(near < far)) {
            near = 0.1;
            far = 1.0;
        }
        write_depth_pgm(buf, out / ("depth-" + std::to_string(dump_depth) + ".pgm"), near,
                        far);
    }
    return 0;
}

int cmd_gradcheck(const CommonArgs& args) {
    RunConfig config = resolve(args);
    fs::path out = prepare_out(args, config);

    // Small deterministic instance with residuals held off the L1 kinks.
    SceneSpec spec = config.synth;
    spec.kind = SceneKind::ClusterSwarm;
    spec.num_points = 16;
    spec.frames = 4;
    spec.background_points = 4;
    spec.occluder.enabled = false;
    spec.noise_sigma = 0.0;
    auto [bundle, gt] = gen_scene(spec);

    LossWeights weights = config.losses;
    weights.num_bases = 2;
    weights.knn_k = 3;
    weights.tau0 = 0.02;
    weights.tau1 = 0.1;
    OptimConfig seed_cfg = config.optim;
    seed_cfg.epochs_init = 0;
    SceneModel model = init_motion(bundle, seed_cfg, weights);

    KnnGraph graph = build_knn_graph(model, weights.knn_k);
    refresh_similarity(graph, model);
    Vec3 centroid = Vec3::Zero();
    for (const auto& s : model.splats) centroid += s.mu;
    centroid /= static_cast<double>(model.splats.size());
    for (auto& s : model.splats) s.mu = centroid + 1.2 * (s.mu - centroid);
    Rng rng = Rng::stream(config.optim.seed, 0xCC);
    for (int t = 0; t < bundle.num_frames; ++t)
        for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
            int track = model.splats[i].source_track;
            Vec3 off{rng.uniform(0.05, 0.3) * (rng.uniform() < 0.5 ? -1 : 1),
                     rng.uniform(0.05, 0.3) * (rng.uniform() < 0.5 ? -1 : 1),
                     rng.uniform(0.05, 0.3) * (rng.uniform() < 0.5 ? -1 : 1)};
            bundle.positions[bundle.at(t, track)] = deform(model, i, t) + off;
        }

    GradCheckReport report = gradient_check(model, bundle, graph, weights);
    write_gradcheck_report(report, out / "gradcheck-report.json");
    std::cout << "gradcheck worst relative error: " << report.worst << "\n";
    return report.worst <= 1e-4 ? 0 : 1;
}

int cmd_lemma(const CommonArgs& args, const std::string& base_dir,
              const std::string& driving_dir) {
    RunConfig config = resolve(args);
    fs::path out = prepare_out(args, config);
    SequenceBundle base = read_bundle(base_dir);
    SequenceBundle driving = read_bundle(driving_dir);
    VarianceReport report = lemma_variance_experiment(
        base, driving, config.optim, config.losses, config.lemma_pairs, config.optim.seed,
        config.lemma_rigidity_on_driving);
    write_variance_report(report, out / "variance-report.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deformable-scene motion engine: reconstructs, restages and "
                 "evaluates 4D point/splat scenes from 3D track bundles"};
    app.require_subcommand(1);

    CommonArgs synth_args, fit_args, restage_args, eval_args, grad_args, lemma_args;
    std::string bundle_dir, base_dir, driving_dir, model_file, gt_dir;
    std::vector<std::string> ablate;
    int dump_depth = -1;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene or pair");
    add_common(synth, synth_args);

    CLI::App* fit = app.add_subcommand("fit", "two-stage fit of a single bundle");
    add_common(fit, fit_args);
    fit->add_option("--bundle", bundle_dir, "input bundle directory")->required();

    CLI::App* restage_cmd = app.add_subcommand(
        "restage", "rewind-concatenate, fit, backtrace, refine, truncate");
    add_common(restage_cmd, restage_args);
    restage_cmd->add_option("--base", base_dir, "base bundle directory")->required();
    restage_cmd->add_option("--driving", driving_dir, "driving bundle directory")->required();
    restage_cmd->add_option("--ablate", ablate,
                            "disable a component: rigidity, backtracing, joint");

    CLI::App* eval = app.add_subcommand("eval", "geometry and tracking metrics");
    add_common(eval, eval_args);
    eval->add_option("--model", model_file, "fitted model file")->required();
    eval->add_option("--bundle", bundle_dir, "bundle the model was fitted on")->required();
    eval->add_option("--gt", gt_dir, "ground-truth directory (enables tracking error)");
    eval->add_option("--dump-depth", dump_depth, "write a PGM depth dump for this frame");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient gate");
    add_common(gradcheck, grad_args);

    CLI::App* lemma = app.add_subcommand("lemma", "joint-vs-solo variance experiment");
    add_common(lemma, lemma_args);
    lemma->add_option("--base", base_dir, "base bundle directory")->required();
    lemma->add_option("--driving", driving_dir, "driving bundle directory")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (fit->parsed()) return cmd_fit(fit_args, bundle_dir);
        if (restage_cmd->parsed())
            return cmd_restage(restage_args, base_dir, driving_dir, ablate);
        if (eval->parsed())
            return cmd_eval(eval_args, model_file, bundle_dir, gt_dir, dump_depth);
        if (gradcheck->parsed()) return cmd_gradcheck(grad_args);
        if (lemma->parsed()) return cmd_lemma(lemma_args, base_dir, driving_dir);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
