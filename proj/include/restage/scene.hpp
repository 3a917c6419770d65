#pragma once

#include <vector>

#include "restage/bundle.hpp"
#include "restage/geom.hpp"

namespace restage {

struct Splat {
    Vec3 mu = Vec3::Zero();            // canonical position
    Vec3 scale = Vec3::Constant(0.01); // positive
    Vec4 orientation{1, 0, 0, 0};      // unit quaternion
    double opacity = 1.0;              // in [0, 1]
    Vec3 color = Vec3::Constant(0.5);  // RGB in [0, 1]
    bool is_foreground = false;
    int coeff_row = -1;                // row into MotionCoeffs.beta, -1 for background
    int source_track = -1;             // originating track index, -1 if none
};

// Per-foreground-splat motion coefficients, one length-K row per splat.
struct MotionCoeffs {
    Eigen::MatrixXd beta;  // rows = foreground splats, cols = K

    int num_bases() const { return static_cast<int>(beta.cols()); }
    int rows() const { return static_cast<int>(beta.rows()); }
};

// K x T grid of rigid transforms, one trajectory per basis.
struct MotionBases {
    int num_bases = 0;
    int num_frames = 0;
    std::vector<Pose> grid;  // index k * num_frames + t

    static MotionBases identity(int k, int t);
    Pose& at(int k, int t) { return grid[static_cast<std::size_t>(k) * num_frames + t]; }
    const Pose& at(int k, int t) const {
        return grid[static_cast<std::size_t>(k) * num_frames + t];
    }
    // Poses of all bases at one frame, gathered contiguously.
    void column(int t, std::vector<Pose>& out) const;
};

struct SceneModel {
    std::vector<Splat> splats;
    MotionCoeffs coeffs;
    MotionBases bases;
    int t_cano = 0;
    int frame_count = 0;

    int foreground_count() const;
    int num_bases() const { return bases.num_bases; }
    // Appends a foreground splat and its coefficient row.
    int add_foreground_splat(const Splat& s, const Eigen::VectorXd& beta);
    int add_background_splat(const Splat& s);
    void validate() const;
};

// Foreground neighbor edges with canonical rest lengths and per-edge
// motion-similarity weights.
struct KnnGraph {
    struct Edge {
        int i = 0, j = 0;       // splat indices, i != j
        double rest_length = 0.0;
    };
    int k = 0;
    std::vector<Edge> edges;
    std::vector<double> similarity;  // per edge, in [0, 1]
};

// Softmax of raw coefficients; strictly positive, sums to 1.
BlendWeights blend_weights(const Eigen::VectorXd& beta);
void softmax_into(const Eigen::VectorXd& beta, Eigen::VectorXd& out);

// Blended transform of foreground splat i at frame t (Eq. of motion).
Pose point_transform(const SceneModel& model, int i, int t);

// Position of splat i at frame t; background splats stay at mu.
Vec3 deform(const SceneModel& model, int i, int t);

// Inverse of the blended transform applied to x.
Vec3 backtrace_to_canonical(const SceneModel& model, const Vec3& x,
                            const Eigen::VectorXd& beta, int t);

// k nearest canonical neighbors per foreground splat, brute force,
// ties broken toward the lower splat index. Similarity is left at 1
// until refreshed against the current coefficients.
KnnGraph build_knn_graph(const SceneModel& model, int k);

// Isotropic scale from the mean distance to the nearest canonical
// neighbors, sized so splat footprints tile the sampled surface.
void init_splat_scales(SceneModel& model);

// Frame with the most visible foreground tracks, smallest index on ties.
int select_canonical_frame(const SequenceBundle& bundle);

}  // namespace restage
