#include "restage/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "restage/rng.hpp"

namespace restage {

double voxel_volume(std::span<const Vec3> points, double voxel, const Vec3& origin) {
    if (voxel <= 0.0) throw std::invalid_argument("voxel_volume: voxel size must be positive");
    if (points.empty()) return 0.0;
    std::vector<std::array<long, 3>> cells;
    cells.reserve(points.size());
    for (const Vec3& p : points)
        cells.push_back({static_cast<long>(std::floor((p.x() - origin.x()) / voxel)),
                         static_cast<long>(std::floor((p.y() - origin.y()) / voxel)),
                         static_cast<long>(std::floor((p.z() - origin.z()) / voxel))});
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return static_cast<double>(cells.size()) * voxel * voxel * voxel;
}

double volume_consistency_msd(double msd, double gamma, double floor) {
    if (gamma < 0.0) throw std::invalid_argument("volume_consistency: gamma must be >= 0");
    if (msd < 0.0) throw std::invalid_argument("volume_consistency: msd must be >= 0");
    msd = std::clamp(msd, floor, 1.0);
    return std::pow(-std::log(msd), gamma);
}

double volume_consistency(std::span<const double> volumes, double gamma, double floor) {
    if (volumes.size() < 2)
        throw std::invalid_argument("volume_consistency: need at least 2 frames");
    double mean = 0.0;
    for (double v : volumes) mean += v;
    mean /= static_cast<double>(volumes.size());
    double msd = 0.0;
    for (double v : volumes) msd += (v - mean) * (v - mean);
    msd /= static_cast<double>(volumes.size());
    return volume_consistency_msd(msd, gamma, floor);
}

void canonical_bounds(const SceneModel& model, Vec3& origin, double& diagonal) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Splat& s : model.splats) {
        if (!s.is_foreground) continue;
        lo = lo.cwiseMin(s.mu);
        hi = hi.cwiseMax(s.mu);
    }
    if (!lo.allFinite()) throw std::invalid_argument("canonical_bounds: no foreground splats");
    origin = lo;
    diagonal = (hi - lo).norm();
    if (diagonal < 1e-9) diagonal = 1.0;
}

std::vector<double> foreground_volumes(const SceneModel& model, int t_begin, int t_end,
                                       double voxel, const Vec3& origin) {
    std::vector<double> volumes;
    std::vector<Vec3> points;
    for (int t = t_begin; t < t_end; ++t) {
        points.clear();
        for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
            if (model.splats[i].is_foreground) points.push_back(deform(model, i, t));
        volumes.push_back(voxel_volume(points, voxel, origin));
    }
    return volumes;
}

double edge_consistency(const SceneModel& model, const KnnGraph& graph, int t_begin,
                        int t_end, int sample, uint64_t seed, double gamma, double floor) {
    if (graph.edges.empty()) throw std::invalid_argument("edge_consistency: empty graph");
    const int frames = t_end - t_begin;
    if (frames < 2) throw std::invalid_argument("edge_consistency: need at least 2 frames");

    std::vector<int> fg;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
        if (model.splats[i].is_foreground) fg.push_back(i);
    const int take = std::min<int>(sample, static_cast<int>(fg.size()));

    // Seeded partial Fisher-Yates: deterministic sample without replacement.
    Rng rng = Rng::stream(seed, 0xED);
    for (int i = 0; i < take; ++i) {
        int j = i + static_cast<int>(rng.integer(fg.size() - i));
        std::swap(fg[i], fg[j]);
    }
    std::vector<uint8_t> chosen(model.splats.size(), 0);
    for (int i = 0; i < take; ++i) chosen[fg[i]] = 1;

    double var_sum = 0.0;
    long edge_count = 0;
    std::vector<double> lengths(frames);
    for (const auto& e : graph.edges) {
        if (!chosen[e.i]) continue;
        double mean = 0.0;
        for (int t = 0; t < frames; ++t) {
            lengths[t] = (deform(model, e.i, t_begin + t) - deform(model, e.j, t_begin + t))
                             .norm();
            mean += lengths[t];
        }
        mean /= frames;
        double var = 0.0;
        for (double len : lengths) var += (len - mean) * (len - mean);
        var_sum += var / frames;
        ++edge_count;
    }
    if (edge_count == 0) throw std::invalid_argument("edge_consistency: no sampled edges");
    double mean_var = std::clamp(var_sum / static_cast<double>(edge_count), floor, 1.0);
    return std::pow(-std::log(mean_var), gamma);
}

double tracking_l1(const SceneModel& model, const GroundTruth& truth) {
    double sum = 0.0;
    long count = 0;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
        int track = model.splats[i].source_track;
        if (track < 0 || track >= truth.num_tracks) continue;
        for (int t = 0; t < truth.frames; ++t) {
            Vec3 r = deform(model, i, t) - truth.true_positions[truth.at(t, track)];
            sum += std::abs(r.x()) + std::abs(r.y()) + std::abs(r.z());
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("tracking_l1: no ground-truth correspondence");
    return sum / static_cast<double>(count);
}

double tracking_l1_full(const SceneModel& model, const GroundTruth& truth,
                        const SequenceBundle& bundle, const std::vector<int>& tracks) {
    std::vector<int> splat_of(truth.num_tracks, -1);
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i) {
        int track = model.splats[i].source_track;
        if (track >= 0 && track < truth.num_tracks) splat_of[track] = i;
    }
    std::vector<int> subset = tracks;
    if (subset.empty())
        for (int i = 0; i < truth.num_tracks; ++i) subset.push_back(i);

    std::vector<int> fg;
    for (int i = 0; i < static_cast<int>(model.splats.size()); ++i)
        if (model.splats[i].is_foreground) fg.push_back(i);

    double sum = 0.0;
    long count = 0;
    for (int track : subset) {
        int splat = splat_of[track];
        // A track without a splat is answered the way a query point would
        // be: rigidly attached to the nearest modeled splat at its first
        // observation (static if nothing is modeled at all).
        int anchor = -1;
        Vec3 offset = Vec3::Zero();
        Vec3 static_fallback = Vec3::Zero();
        if (splat < 0) {
            int t0 = -1;
            for (int t = 0; t < bundle.num_frames && t0 < 0; ++t)
                if (bundle.visible(t, track)) t0 = t;
            if (t0 < 0) continue;  // never observed, nothing to predict from
            Vec3 obs = bundle.position(t0, track);
            static_fallback = obs;
            double best = std::numeric_limits<double>::infinity();
            for (int i : fg) {
                double d = (deform(model, i, t0) - obs).squaredNorm();
                if (d < best) {
                    best = d;
                    anchor = i;
                }
            }
            if (anchor >= 0) offset = obs - deform(model, anchor, t0);
        }
        for (int t = 0; t < truth.frames; ++t) {
            Vec3 predicted;
            if (splat >= 0)
                predicted = deform(model, splat, t);
            else if (anchor >= 0)
                predicted = deform(model, anchor, t) + offset;
            else
                predicted = static_fallback;
            Vec3 r = predicted - truth.true_positions[truth.at(t, track)];
            sum += std::abs(r.x()) + std::abs(r.y()) + std::abs(r.z());
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument("tracking_l1_full: no evaluable tracks");
    return sum / static_cast<double>(count);
}

}  // namespace restage
