#pragma once

#include <optional>
#include <vector>

#include "restage/params.hpp"
#include "restage/scene.hpp"
#include "restage/visibility.hpp"

namespace restage {

struct LossWeights {
    double lambda_track = 1.0;
    double lambda_rigid = 1e-3;
    double lambda_smooth = 1e-2;
    double tau0 = 0.01, tau1 = 0.05;  // resolved absolute depth thresholds
    int knn_k = 8;
    int num_bases = 20;
    // Restricts the rigidity sum to frames < rigidity_frame_end when >= 0;
    // ablation switch for joint training without driving-segment rigidity.
    int rigidity_frame_end = -1;

    void validate() const;
};

struct LossBreakdown {
    double track = 0.0;
    double rigidity = 0.0;
    double smoothness = 0.0;
    double total = 0.0;
};

enum class Stage { Init, Refine };

// Cosine similarity of the softmax weights of two coefficient rows.
double similarity(const Eigen::VectorXd& beta_i, const Eigen::VectorXd& beta_j);

// Recomputes per-edge similarity from the current coefficients.
void refresh_similarity(KnnGraph& graph, const SceneModel& model);

// Mean L1 distance between deformed splats and their visible track
// observations. Gradients accumulate into `grad` when non-null.
double track_loss(const SceneModel& model, const SequenceBundle& bundle,
                  ParamVector* grad = nullptr, int workers = 1);

// Rest-length preservation over the kNN graph, L1 per edge, weighted by
// the stored similarity.
double rigidity_init(const SceneModel& model, const KnnGraph& graph,
                     ParamVector* grad = nullptr, int workers = 1);

// Same deviation gated by per-frame invisibility scores, L2 per edge.
double rigidity_refine(const SceneModel& model, const KnnGraph& graph,
                       const std::vector<InvisibilityScores>& zetas,
                       ParamVector* grad = nullptr, int workers = 1);

// Squared Frobenius norm of consecutive differences of each basis's
// 3x4 matrix form.
double smoothness(const MotionBases& bases, ParamVector* grad = nullptr);

// Weighted stage objective with merged gradients. Terms with zero weight
// are skipped and reported as 0.
LossBreakdown total_loss(Stage stage, const SceneModel& model, const SequenceBundle& bundle,
                         const KnnGraph& graph, const LossWeights& weights,
                         const std::vector<InvisibilityScores>* zetas = nullptr,
                         ParamVector* grad = nullptr, int workers = 1);

}  // namespace restage
