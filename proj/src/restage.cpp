#include "restage/restage.hpp"

#include <algorithm>
#include <cmath>

#include "restage/rng.hpp"

namespace restage {

namespace {

constexpr uint64_t kPerturbStream = 0xB0;
constexpr uint64_t kPairStream = 0xB1;

SequenceBundle slice_frames(const SequenceBundle& b, int begin, int end) {
    SequenceBundle out;
    out.num_tracks = b.num_tracks;
    out.num_frames = end - begin;
    out.t1 = 0;
    out.labels = b.labels;
    out.colors = b.colors;
    out.positions.resize(static_cast<std::size_t>(out.num_tracks) * out.num_frames);
    out.visibility.resize(out.positions.size());
    out.cameras.assign(b.cameras.begin() + begin, b.cameras.begin() + end);
    for (int t = begin; t < end; ++t)
        for (int i = 0; i < b.num_tracks; ++i) {
            out.positions[out.at(t - begin, i)] = b.positions[b.at(t, i)];
            out.visibility[out.at(t - begin, i)] = b.visibility[b.at(t, i)];
        }
    return out;
}

double scene_extent(const SequenceBundle& b) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i = 0; i < b.num_tracks; ++i) {
        if (!b.is_foreground(i)) continue;
        const Vec3& p = b.position(0, i);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    double d = (hi - lo).norm();
    return std::isfinite(d) && d > 1e-6 ? d : 1.0;
}

}  // namespace

CombinedBundle rewind_concat(const SequenceBundle& base, const SequenceBundle& driving) {
    base.validate();
    driving.validate();
    if (base.num_tracks != driving.num_tracks)
        throw std::invalid_argument("rewind_concat: track counts differ");
    if (base.labels != driving.labels)
        throw std::invalid_argument("rewind_concat: track identities (labels) differ");

    double worst = 0.0;
    int worst_track = -1;
    for (int i = 0; i < base.num_tracks; ++i) {
        if (!base.visible(0, i) || !driving.visible(0, i)) continue;
        double d = (base.position(0, i) - driving.position(0, i)).norm();
        if (d > worst) {
            worst = d;
            worst_track = i;
        }
    }
    if (worst > kSharedFrameTolerance)
        throw std::invalid_argument(
            "rewind_concat: shared first frame mismatch, worst track " +
            std::to_string(worst_track) + " off by " + std::to_string(worst));

    CombinedBundle out;
    SequenceBundle& seq = out.seq;
    const int tb = base.num_frames, td = driving.num_frames;
    seq.num_tracks = base.num_tracks;
    seq.num_frames = tb + td - 1;
    seq.t1 = tb;
    seq.labels = base.labels;
    seq.colors = !base.colors.empty() ? base.colors : driving.colors;
    seq.positions.resize(static_cast<std::size_t>(seq.num_tracks) * seq.num_frames);
    seq.visibility.resize(seq.positions.size());
    seq.cameras.resize(seq.num_frames);
    out.provenance.resize(seq.num_frames);
    for (int t = 0; t < seq.num_frames; ++t) {
        const bool in_base = t < tb;
        const SequenceBundle& src = in_base ? base : driving;
        const int st = in_base ? tb - 1 - t : t - tb + 1;
        seq.cameras[t] = src.cameras[st];
        out.provenance[t] = in_base ? FrameOrigin::RewoundBase : FrameOrigin::Driving;
        for (int i = 0; i < seq.num_tracks; ++i) {
            seq.positions[seq.at(t, i)] = src.positions[src.at(st, i)];
            seq.visibility[seq.at(t, i)] = src.visibility[src.at(st, i)];
        }
    }
    return out;
}

SceneModel insert_disoccluded(const SceneModel& model, const SequenceBundle& bundle,
                              const DisocclusionSet& dis) {
    SceneModel out = model;
    if (dis.empty()) return out;

    std::vector<int> existing_fg;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
        if (model.splats[i].is_foreground) existing_fg.push_back(i);
    if (existing_fg.empty())
        throw std::runtime_error("insert_disoccluded: no existing foreground splats");

    std::vector<uint8_t> modeled(bundle.num_tracks, 0);
    for (const Splat& s : model.splats)
        if (s.source_track >= 0 && s.source_track < bundle.num_tracks)
            modeled[s.source_track] = 1;

    // Earliest disocclusion per track, frames ascending.
    std::vector<std::pair<int, int>> insertions;  // (frame, track)
    std::vector<uint8_t> seen(bundle.num_tracks, 0);
    for (int t = 0; t < static_cast<int>(dis.per_frame.size()); ++t)
        for (int i : dis.per_frame[t]) {
            if (seen[i] || modeled[i]) continue;
            seen[i] = 1;
            insertions.emplace_back(t, i);
        }
    if (insertions.empty()) return out;

    // Deformed positions of the pre-existing splats at each needed frame.
    std::vector<int> frames;
    for (const auto& [t, i] : insertions) frames.push_back(t);
    std::sort(frames.begin(), frames.end());
    frames.erase(std::unique(frames.begin(), frames.end()), frames.end());
    std::vector<std::vector<Vec3>> deformed(model.frame_count);
    for (int t : frames) {
        deformed[t].resize(existing_fg.size());
        for (std::size_t n = 0; n < existing_fg.size(); ++n)
            deformed[t][n] = deform(model, existing_fg[n], t);
    }

    const int K = model.num_bases();
    const int neighbors = std::min<int>(8, static_cast<int>(existing_fg.size()));
    for (const auto& [t_star, track] : insertions) {
        const Vec3 x_obs = bundle.position(t_star, track);

        // Nearest existing foreground splats in deformed space at t*.
        std::vector<std::pair<double, int>> cand(existing_fg.size());
        for (std::size_t n = 0; n < existing_fg.size(); ++n)
            cand[n] = {(deformed[t_star][n] - x_obs).squaredNorm(), static_cast<int>(n)};
        std::partial_sort(cand.begin(), cand.begin() + neighbors, cand.end());

        Splat s;
        s.source_track = track;
        if (!bundle.colors.empty()) s.color = bundle.colors[track];
        s.scale = model.splats[existing_fg[cand[0].second]].scale;

        if (bundle.is_foreground(track)) {
            Eigen::VectorXd beta = Eigen::VectorXd::Zero(K);
            double wsum = 0.0;
            for (int n = 0; n < neighbors; ++n) {
                double w = 1.0 / std::max(std::sqrt(cand[n].first), 1e-8);
                int row = model.splats[existing_fg[cand[n].second]].coeff_row;
                beta += w * model.coeffs.beta.row(row).transpose();
                wsum += w;
            }
            beta /= wsum;
            s.mu = backtrace_to_canonical(model, x_obs, beta, t_star);
            out.add_foreground_splat(s, beta);
        } else {
            s.mu = x_obs;
            out.add_background_splat(s);
        }
    }
    return out;
}

SceneModel truncate(const SceneModel& model, int t1) {
    if (t1 < 1 || t1 >= model.frame_count)
        throw std::invalid_argument("truncate: t1 out of range");
    SceneModel out = model;
    const int keep_from = t1 - 1;
    const int new_frames = model.frame_count - keep_from;
    out.bases.num_frames = new_frames;
    out.bases.grid.resize(static_cast<std::size_t>(model.bases.num_bases) * new_frames);
    for (int k = 0; k < model.bases.num_bases; ++k)
        for (int t = 0; t < new_frames; ++t)
            out.bases.at(k, t) = model.bases.at(k, keep_from + t);
    out.frame_count = new_frames;
    out.t_cano = model.t_cano >= keep_from ? model.t_cano - keep_from : 0;
    return out;
}

VarianceReport lemma_variance_experiment(const SequenceBundle& base,
                                         const SequenceBundle& driving,
                                         const OptimConfig& config, const LossWeights& weights,
                                         int num_pairs, uint64_t seed,
                                         bool rigidity_on_driving) {
    if (weights.lambda_smooth <= 0.0)
        throw std::invalid_argument(
            "lemma_variance_experiment: temporal smoothness must be active "
            "(lambda_smooth > 0)");
    if (num_pairs < 30)
        throw std::invalid_argument("lemma_variance_experiment: need at least 30 pairs");

    CombinedBundle combined = rewind_concat(base, driving);
    const int t1 = combined.t1();
    const int total_frames = combined.seq.num_frames;

    // Joint condition trains on the combined clip with supervision masked
    // off the driving segment.
    SequenceBundle joint_bundle = combined.seq;
    for (int t = t1; t < total_frames; ++t)
        for (int i = 0; i < joint_bundle.num_tracks; ++i)
            joint_bundle.visibility[joint_bundle.at(t, i)] = 0;

    OptimConfig seed_cfg = config;
    seed_cfg.epochs_init = 0;
    SceneModel joint_model = init_motion(joint_bundle, seed_cfg, weights);

    // Identical seeded random perturbation of the unsupervised driving
    // bases in both conditions; without supervision the bases are
    // arbitrary up to the regularizers.
    const double extent = scene_extent(combined.seq);
    Rng prng = Rng::stream(seed ^ config.seed, kPerturbStream);
    for (int k = 0; k < joint_model.num_bases(); ++k)
        for (int t = t1; t < total_frames; ++t) {
            Pose& p = joint_model.bases.at(k, t);
            Vec3 axis{prng.normal(), prng.normal(), prng.normal()};
            if (axis.norm() < 1e-6) axis = Vec3{0, 0, 1};
            double angle = prng.normal(0.0, 0.35);
            Pose kick = Pose::rotation(axis, angle);
            kick.t = Vec3{prng.normal(), prng.normal(), prng.normal()} * (0.08 * extent);
            p = compose(kick, p);
        }

    SceneModel solo_model = truncate(joint_model, t1);
    SequenceBundle solo_bundle = slice_frames(combined.seq, t1 - 1, total_frames);
    for (auto& v : solo_bundle.visibility) v = 0;

    LossWeights joint_weights = weights;
    if (!rigidity_on_driving) joint_weights.rigidity_frame_end = t1;
    optimize(Stage::Init, joint_model, joint_bundle, config, joint_weights,
             config.epochs_init);

    // sigma_0 is the variance from training without supervision or
    // smoothness; regularizing the solo clip with the smoothness term
    // would flatten its bases and measure the wrong baseline.
    LossWeights solo_weights = weights;
    solo_weights.lambda_track = 0.0;
    solo_weights.lambda_smooth = 0.0;
    optimize(Stage::Init, solo_model, solo_bundle, config, solo_weights, config.epochs_init);

    // Sampled foreground pairs; rows align between the two conditions.
    const int rows = joint_model.foreground_count();
    if (rows < 2) throw std::invalid_argument("lemma_variance_experiment: too few splats");
    std::vector<int> row_splat(rows, -1);
    for (int i = 0; i < static_cast<int>(joint_model.splats.size()); ++i)
        if (joint_model.splats[i].is_foreground)
            row_splat[joint_model.splats[i].coeff_row] = i;

    VarianceReport report;
    report.seed = seed;
    report.pair_count = num_pairs;
    Rng pair_rng = Rng::stream(seed ^ config.seed, kPairStream);
    const int driving_frames = total_frames - t1;
    const double floor = 1e-12;

    auto pair_variance = [&](const SceneModel& m, int a, int b, int frame_offset) {
        double mean = 0.0;
        std::vector<double> d(driving_frames);
        for (int f = 0; f < driving_frames; ++f) {
            d[f] = (deform(m, a, frame_offset + f) - deform(m, b, frame_offset + f)).norm();
            mean += d[f];
        }
        mean /= driving_frames;
        double var = 0.0;
        for (double v : d) var += (v - mean) * (v - mean);
        return var / driving_frames;
    };

    double sum_joint = 0.0, sum_solo = 0.0;
    for (int p = 0; p < num_pairs; ++p) {
        int ra = static_cast<int>(pair_rng.integer(rows));
        int rb = static_cast<int>(pair_rng.integer(rows));
        while (rb == ra) rb = static_cast<int>(pair_rng.integer(rows));
        double vj = pair_variance(joint_model, row_splat[ra], row_splat[rb], t1);
        double vs = pair_variance(solo_model, row_splat[ra], row_splat[rb], 1);
        report.per_pair_joint.push_back(vj);
        report.per_pair_solo.push_back(vs);
        sum_joint += vj;
        sum_solo += vs;
    }
    report.var_joint_mean = sum_joint / num_pairs;
    report.var_solo_mean = sum_solo / num_pairs;
    report.ratio = (report.var_joint_mean < floor && report.var_solo_mean < floor)
                       ? 1.0
                       : report.var_joint_mean / std::max(report.var_solo_mean, floor);
    return report;
}

}  // namespace restage
