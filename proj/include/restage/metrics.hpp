#pragma once

#include <optional>
#include <span>

#include "restage/scene.hpp"
#include "restage/synth.hpp"

namespace restage {

struct MetricsReport {
    double volume_consistency = 0.0;
    double edge_consistency = 0.0;
    std::optional<double> tracking_l1;
    std::optional<double> tracking_l1_full;  // includes unmodeled tracks via fallback
    std::vector<double> per_frame_volumes;
    double voxel_size = 0.0;
    uint64_t sample_seed = 0;
};

// Occupied-voxel volume on a grid anchored at `origin`.
double voxel_volume(std::span<const Vec3> points, double voxel, const Vec3& origin);

// (-log msd)^gamma with the mean squared deviation clamped to
// [floor, 1]; higher = more temporally consistent.
double volume_consistency_msd(double msd, double gamma = 1.5, double floor = 1e-12);
double volume_consistency(std::span<const double> volumes, double gamma = 1.5,
                          double floor = 1e-12);

// Deformed foreground positions voxelized per frame in [t_begin, t_end).
std::vector<double> foreground_volumes(const SceneModel& model, int t_begin, int t_end,
                                       double voxel, const Vec3& origin);

// Canonical foreground bounding box; anchor and default voxel size.
void canonical_bounds(const SceneModel& model, Vec3& origin, double& diagonal);

// Temporal variance of sampled incident edge lengths over [t_begin, t_end),
// aggregated as (-log mean-variance)^gamma.
double edge_consistency(const SceneModel& model, const KnnGraph& graph, int t_begin,
                        int t_end, int sample = 1000, uint64_t seed = 0,
                        double gamma = 1.5, double floor = 1e-12);

// Mean L1 error of modeled splats against ground-truth trajectories over
// every frame, occluded ones included.
double tracking_l1(const SceneModel& model, const GroundTruth& truth);

// Same, over the given tracks (all tracks when empty): tracks without a
// splat fall back to their earliest visible observation held static.
double tracking_l1_full(const SceneModel& model, const GroundTruth& truth,
                        const SequenceBundle& bundle,
                        const std::vector<int>& tracks = {});

}  // namespace restage
