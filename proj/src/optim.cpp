#include "restage/optim.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "restage/parallel.hpp"
#include "restage/rng.hpp"
#include "restage/visibility.hpp"

namespace restage {

namespace {

constexpr uint64_t kClusterStream = 0xC1;

// Masked k-means over per-track velocity profiles.
struct VelocityFeatures {
    int dims = 0;
    std::vector<double> values;  // row-major n x dims
    std::vector<uint8_t> valid;
};

VelocityFeatures velocity_features(const SequenceBundle& bundle, const std::vector<int>& tracks) {
    VelocityFeatures f;
    const int T = bundle.num_frames;
    f.dims = (T - 1) * 3;
    const int n = static_cast<int>(tracks.size());
    f.values.assign(static_cast<std::size_t>(n) * f.dims, 0.0);
    f.valid.assign(static_cast<std::size_t>(n) * f.dims, 0);
    for (int r = 0; r < n; ++r) {
        int i = tracks[r];
        for (int t = 0; t + 1 < T; ++t) {
            if (!bundle.visible(t, i) || !bundle.visible(t + 1, i)) continue;
            Vec3 v = bundle.position(t + 1, i) - bundle.position(t, i);
            std::size_t base = static_cast<std::size_t>(r) * f.dims + t * 3;
            for (int c = 0; c < 3; ++c) {
                f.values[base + c] = v[c];
                f.valid[base + c] = 1;
            }
        }
    }
    return f;
}

double masked_dist(const VelocityFeatures& f, int row, const std::vector<double>& centroid) {
    double sum = 0.0;
    int count = 0;
    const std::size_t base = static_cast<std::size_t>(row) * f.dims;
    for (int d = 0; d < f.dims; ++d) {
        if (!f.valid[base + d]) continue;
        double diff = f.values[base + d] - centroid[d];
        sum += diff * diff;
        ++count;
    }
    return count > 0 ? sum / count : 0.0;
}

std::vector<int> velocity_kmeans(const VelocityFeatures& f, int n, int K, Rng& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.reserve(K);
    std::vector<uint8_t> is_centroid(n, 0);
    auto row_of = [&](int r) {
        std::vector<double> c(f.dims);
        for (int d = 0; d < f.dims; ++d)
            c[d] = f.valid[static_cast<std::size_t>(r) * f.dims + d]
                       ? f.values[static_cast<std::size_t>(r) * f.dims + d]
                       : 0.0;
        return c;
    };

    // k-means++ seeding with masked distances.
    int first = static_cast<int>(rng.integer(n));
    centroids.push_back(row_of(first));
    is_centroid[first] = 1;
    std::vector<double> best_d2(n);
    while (static_cast<int>(centroids.size()) < K) {
        double total = 0.0;
        for (int r = 0; r < n; ++r) {
            double d = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) d = std::min(d, masked_dist(f, r, c));
            best_d2[r] = is_centroid[r] ? 0.0 : d;
            total += best_d2[r];
        }
        int pick = -1;
        if (total > 0.0) {
            double target = rng.uniform() * total, acc = 0.0;
            for (int r = 0; r < n; ++r) {
                acc += best_d2[r];
                if (acc >= target && !is_centroid[r]) {
                    pick = r;
                    break;
                }
            }
        }
        if (pick < 0)
            for (int r = 0; r < n; ++r)
                if (!is_centroid[r]) {
                    pick = r;
                    break;
                }
        centroids.push_back(row_of(pick));
        is_centroid[pick] = 1;
    }

    std::vector<int> label(n, 0);
    for (int iter = 0; iter < 30; ++iter) {
        bool changed = false;
        for (int r = 0; r < n; ++r) {
            int best = 0;
            double bd = masked_dist(f, r, centroids[0]);
            for (int k = 1; k < K; ++k) {
                double d = masked_dist(f, r, centroids[k]);
                if (d < bd) {
                    bd = d;
                    best = k;
                }
            }
            if (label[r] != best) {
                label[r] = best;
                changed = true;
            }
        }
        // Re-seed empty clusters with the worst-fitting point.
        for (int k = 0; k < K; ++k) {
            if (std::count(label.begin(), label.end(), k) > 0) continue;
            int worst = 0;
            double wd = -1.0;
            for (int r = 0; r < n; ++r) {
                double d = masked_dist(f, r, centroids[label[r]]);
                if (d > wd && std::count(label.begin(), label.end(), label[r]) > 1) {
                    wd = d;
                    worst = r;
                }
            }
            label[worst] = k;
            centroids[k] = row_of(worst);
            changed = true;
        }
        if (!changed && iter > 0) break;
        for (int k = 0; k < K; ++k) {
            std::vector<double> sum(f.dims, 0.0);
            std::vector<int> cnt(f.dims, 0);
            for (int r = 0; r < n; ++r) {
                if (label[r] != k) continue;
                const std::size_t base = static_cast<std::size_t>(r) * f.dims;
                for (int d = 0; d < f.dims; ++d)
                    if (f.valid[base + d]) {
                        sum[d] += f.values[base + d];
                        ++cnt[d];
                    }
            }
            for (int d = 0; d < f.dims; ++d)
                if (cnt[d] > 0) centroids[k][d] = sum[d] / cnt[d];
        }
    }
    return label;
}

Pose register_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
    const int n = static_cast<int>(src.size());
    if (n == 0) throw std::invalid_argument("register_rigid: empty correspondence");
    if (n < 3) {
        Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
        for (int i = 0; i < n; ++i) {
            ms += src[i];
            md += dst[i];
        }
        return Pose::translation((md - ms) / n);
    }
    Eigen::Matrix3Xd s(3, n), d(3, n);
    for (int i = 0; i < n; ++i) {
        s.col(i) = src[i];
        d.col(i) = dst[i];
    }
    Mat4 m = Eigen::umeyama(s, d, false);
    Eigen::Quaterniond q(Mat3(m.block<3, 3>(0, 0)));
    q.normalize();
    return Pose{Vec4{q.w(), q.x(), q.y(), q.z()}, m.block<3, 1>(0, 3)};
}

std::vector<InvisibilityScores> compute_zetas(const SceneModel& model,
                                              const SequenceBundle& bundle,
                                              const LossWeights& weights, int workers) {
    std::vector<InvisibilityScores> zetas(model.frame_count);
    parallel_for(model.frame_count, workers, [&](int t) {
        zetas[t] = invisibility(model, bundle.cameras[t], t, weights.tau0, weights.tau1);
    });
    return zetas;
}

struct StageOutcome {
    LossBreakdown final_losses;
    int restored_best_epoch = -1;
};

StageOutcome run_stage(Stage stage, SceneModel& model, const SequenceBundle& bundle,
                       const OptimConfig& cfg, const LossWeights& weights, int epochs,
                       FitReport* report);

StageOutcome run_stage(Stage stage, SceneModel& model, const SequenceBundle& bundle,
                       const OptimConfig& cfg, const LossWeights& weights, int epochs,
                       FitReport* report) {
    const bool use_rigid = weights.lambda_rigid > 0.0;
    KnnGraph graph;
    if (use_rigid) graph = build_knn_graph(model, weights.knn_k);

    AdamState state = make_adam_state(model);
    ParamVector params = pack_params(model);
    ParamVector best_params = params;
    double initial_total = 0.0, initial_track = 0.0, best_track = 0.0;
    int best_epoch = -1, diverged_run = 0;

    auto evaluate = [&](ParamVector* grads) {
        if (use_rigid) refresh_similarity(graph, model);
        std::vector<InvisibilityScores> zetas;
        const std::vector<InvisibilityScores>* zp = nullptr;
        if (stage == Stage::Refine && use_rigid) {
            zetas = compute_zetas(model, bundle, weights, cfg.workers);
            zp = &zetas;
        }
        return total_loss(stage, model, bundle, graph, weights, zp, grads, cfg.workers);
    };

    for (int epoch = 0; epoch < epochs; ++epoch) {
        ParamVector grads = zero_gradients(model);
        LossBreakdown b = evaluate(&grads);
        if (epoch == 0) {
            initial_total = b.total;
            initial_track = b.track;
            best_track = b.track;
            best_params = params;
            best_epoch = 0;
        } else if (b.track < best_track) {
            best_track = b.track;
            best_params = params;
            best_epoch = epoch;
        }
        if (stage == Stage::Refine && initial_total > 0.0) {
            if (b.total > 10.0 * initial_total) {
                if (++diverged_run >= 50)
                    throw std::runtime_error(
                        "refine diverged: loss exceeded 10x its initial value for 50 "
                        "consecutive epochs (epoch " +
                        std::to_string(epoch) + ", total " + std::to_string(b.total) + ")");
            } else {
                diverged_run = 0;
            }
        }
        step(params, grads, state, cfg);
        unpack_params(params, model);
        renormalize(model);
        params = pack_params(model);
        if (report) report->history.push_back(b);
    }

    StageOutcome out;
    out.final_losses = evaluate(nullptr);
    if (stage == Stage::Refine && epochs > 0 && out.final_losses.track > initial_track &&
        best_track <= initial_track) {
        unpack_params(best_params, model);
        renormalize(model);
        out.final_losses = evaluate(nullptr);
        out.restored_best_epoch = best_epoch;
    }
    return out;
}

}  // namespace

void OptimConfig::validate() const {
    if (epochs_init < 0 || epochs_refine < 0) throw std::invalid_argument("epochs must be >= 0");
    if (step_size <= 0.0) throw std::invalid_argument("step_size must be positive");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
        throw std::invalid_argument("moment decay rates must lie in (0,1)");
    if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
    for (double m : group_multipliers)
        if (m < 0.0) throw std::invalid_argument("group multipliers must be nonnegative");
}

AdamState make_adam_state(const SceneModel& model) {
    AdamState s;
    s.m = zero_gradients(model);
    s.v = zero_gradients(model);
    return s;
}

void step(ParamVector& params, const ParamVector& grads, AdamState& state,
          const OptimConfig& config) {
    const long t = ++state.step_count;
    const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
    for (int g = 0; g < kNumParamGroups; ++g) {
        auto& p = params.groups[g];
        const auto& gr = grads.groups[g];
        auto& m = state.m.groups[g];
        auto& v = state.v.groups[g];
        if (p.size() != gr.size() || p.size() != m.size())
            throw std::invalid_argument("step: parameter/gradient shape mismatch in group " +
                                        std::string(param_group_name(ParamGroup(g))));
        const double lr = config.step_size * config.group_multipliers[g];
        for (std::size_t i = 0; i < p.size(); ++i) {
            double grad = gr[i];
            if (!std::isfinite(grad))
                throw std::runtime_error("non-finite gradient in parameter group " +
                                         std::string(param_group_name(ParamGroup(g))));
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad * grad;
            double mhat = m[i] / c1;
            double vhat = v[i] / c2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + config.epsilon);
        }
    }
}

void renormalize(SceneModel& model) {
    for (auto& pose : model.bases.grid) pose.q = quat_normalized(pose.q);
    for (auto& s : model.splats) {
        s.orientation = quat_normalized(s.orientation);
        s.opacity = std::clamp(s.opacity, 0.0, 1.0);
    }
}

SceneModel init_motion(const SequenceBundle& bundle, const OptimConfig& config,
                       const LossWeights& weights, FitReport* report) {
    config.validate();
    weights.validate();
    bundle.validate();
    auto t_start = std::chrono::steady_clock::now();

    const int K = weights.num_bases;
    const int T = bundle.num_frames;
    const int t_cano = select_canonical_frame(bundle);

    long fg_visible = 0;
    for (int i = 0; i < bundle.num_tracks; ++i)
        if (bundle.is_foreground(i) && bundle.visible(t_cano, i)) ++fg_visible;
    if (fg_visible < K)
        throw std::invalid_argument(
            "init_motion: only " + std::to_string(fg_visible) +
            " foreground tracks visible at the canonical frame; use num_bases <= that");

    SceneModel model;
    model.frame_count = T;
    model.t_cano = t_cano;
    model.bases = MotionBases::identity(K, T);
    model.coeffs.beta.resize(0, K);

    std::vector<int> fg_tracks;
    for (int i = 0; i < bundle.num_tracks; ++i) {
        if (!bundle.visible(t_cano, i)) continue;  // deferred to disocclusion backtracing
        Splat s;
        s.mu = bundle.position(t_cano, i);
        if (!bundle.colors.empty()) s.color = bundle.colors[i];
        s.source_track = i;
        if (bundle.is_foreground(i)) {
            model.add_foreground_splat(s, Eigen::VectorXd::Zero(K));
            fg_tracks.push_back(i);
        } else {
            model.add_background_splat(s);
        }
    }
    init_splat_scales(model);

    // Cluster foreground tracks by velocity profile, then seed each basis
    // with a closed-form rigid fit from the canonical frame to each frame.
    const int n_fg = static_cast<int>(fg_tracks.size());
    std::vector<int> label(n_fg, 0);
    if (K > 1) {
        VelocityFeatures feats = velocity_features(bundle, fg_tracks);
        Rng rng = Rng::stream(config.seed, kClusterStream);
        label = velocity_kmeans(feats, n_fg, K, rng);
    }

    std::vector<std::vector<int>> members(K);
    for (int r = 0; r < n_fg; ++r) members[label[r]].push_back(fg_tracks[r]);

    for (int k = 0; k < K; ++k) {
        auto fit_frame = [&](int t, const Pose& hold) {
            std::vector<Vec3> src, dst;
            for (int i : members[k]) {
                if (!bundle.visible(t, i)) continue;
                src.push_back(bundle.position(t_cano, i));
                dst.push_back(bundle.position(t, i));
            }
            if (src.empty()) return hold;
            return register_rigid(src, dst);
        };
        Pose hold = Pose::identity();
        for (int t = t_cano + 1; t < T; ++t) {
            hold = fit_frame(t, hold);
            model.bases.at(k, t) = hold;
        }
        hold = Pose::identity();
        for (int t = t_cano - 1; t >= 0; --t) {
            hold = fit_frame(t, hold);
            model.bases.at(k, t) = hold;
        }
    }

    if (K > 1) {
        const double own = std::log(0.9);
        const double other = std::log(0.1 / (K - 1));
        for (int r = 0; r < n_fg; ++r)
            for (int k = 0; k < K; ++k) model.coeffs.beta(r, k) = (label[r] == k) ? own : other;
    }

    StageOutcome out = run_stage(Stage::Init, model, bundle, config, weights,
                                 config.epochs_init, report);
    if (report) {
        report->final_losses = out.final_losses;
        report->restored_best_epoch = out.restored_best_epoch;
        report->wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    }
    return model;
}

void refine(SceneModel& model, const SequenceBundle& bundle, const OptimConfig& config,
            const LossWeights& weights, FitReport* report) {
    config.validate();
    weights.validate();
    bundle.validate();
    auto t_start = std::chrono::steady_clock::now();
    StageOutcome out =
        run_stage(Stage::Refine, model, bundle, config, weights, config.epochs_refine, report);
    if (report) {
        report->final_losses = out.final_losses;
        report->restored_best_epoch = out.restored_best_epoch;
        report->wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    }
}

double depth_range_at_canonical(const SceneModel& model, const SequenceBundle& bundle) {
    const Camera& cam = bundle.cameras.at(model.t_cano);
    double zmin = std::numeric_limits<double>::infinity(), zmax = 0.0;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
        double z = cam.to_camera(deform(model, i, model.t_cano)).z();
        if (z <= kNearPlane) continue;
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
    }
    if (!std::isfinite(zmin) || zmax <= zmin) return 1.0;
    return zmax - zmin;
}

LossBreakdown optimize(Stage stage, SceneModel& model, const SequenceBundle& bundle,
                       const OptimConfig& config, const LossWeights& weights, int epochs,
                       FitReport* report) {
    config.validate();
    weights.validate();
    StageOutcome out = run_stage(stage, model, bundle, config, weights, epochs, report);
    if (report) {
        report->final_losses = out.final_losses;
        report->restored_best_epoch = out.restored_best_epoch;
    }
    return out.final_losses;
}

GradCheckReport gradient_check(const SceneModel& model, const SequenceBundle& bundle,
                               const KnnGraph& graph, const LossWeights& weights,
                               double eps) {
    if (model.splats.size() > 50)
        throw std::invalid_argument("gradient_check: instance too large (N must be <= 50)");
    weights.validate();

    // Fixed pseudo-random gates so the refine term is exercised.
    std::vector<InvisibilityScores> zetas(model.frame_count);
    {
        Rng rng = Rng::stream(12345, 0xE7);
        for (auto& z : zetas) {
            z.zeta.resize(model.foreground_count());
            for (auto& v : z.zeta) v = rng.uniform(0.25, 1.0);
        }
    }

    struct Term {
        std::string name;
        std::function<double(const SceneModel&, ParamVector*)> eval;
    };
    std::vector<Term> terms = {
        {"track", [&](const SceneModel& m, ParamVector* g) { return track_loss(m, bundle, g); }},
        {"rigidity_init",
         [&](const SceneModel& m, ParamVector* g) { return rigidity_init(m, graph, g); }},
        {"rigidity_refine",
         [&](const SceneModel& m, ParamVector* g) { return rigidity_refine(m, graph, zetas, g); }},
        {"smoothness",
         [&](const SceneModel& m, ParamVector* g) { return smoothness(m.bases, g); }},
    };

    GradCheckReport report;
    SceneModel work = model;
    for (const auto& term : terms) {
        ParamVector analytic = zero_gradients(work);
        term.eval(work, &analytic);
        ParamVector p = pack_params(work);
        for (int g = 0; g < kNumParamGroups; ++g) {
            // Vector-norm comparison per group: per-entry ratios blow up on
            // entries whose true gradient is at the FD noise floor.
            double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
            auto& vals = p.groups[g];
            for (std::size_t i = 0; i < vals.size(); ++i) {
                double orig = vals[i];
                vals[i] = orig + eps;
                unpack_params(p, work);
                double fp = term.eval(work, nullptr);
                vals[i] = orig - eps;
                unpack_params(p, work);
                double fm = term.eval(work, nullptr);
                vals[i] = orig;
                unpack_params(p, work);
                double numeric = (fp - fm) / (2 * eps);
                double a = analytic.groups[g][i];
                diff2 += (a - numeric) * (a - numeric);
                a2 += a * a;
                n2 += numeric * numeric;
            }
            double denom = std::max(std::sqrt(std::max(a2, n2)), 1e-8);
            double rel = vals.empty() ? 0.0 : std::sqrt(diff2) / denom;
            if (std::sqrt(diff2) < 1e-9) rel = 0.0;
            report.entries.push_back({term.name, param_group_name(ParamGroup(g)), rel});
            report.worst = std::max(report.worst, rel);
        }
    }
    return report;
}

}  // namespace restage
