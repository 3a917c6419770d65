#pragma once

#include <array>
#include <optional>
#include <string>

#include "restage/losses.hpp"
#include "restage/params.hpp"

namespace restage {

struct OptimConfig {
    int epochs_init = 500;
    int epochs_refine = 500;
    double step_size = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Indexed by ParamGroup: basis_rot, basis_trans, coeffs, mu, opacity.
    std::array<double, kNumParamGroups> group_multipliers{1.0, 1.0, 1.0, 0.1, 0.1};
    uint64_t seed = 0;
    int workers = 1;

    void validate() const;
};

struct GradCheckEntry {
    std::string term;
    std::string group;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst = 0.0;
};

struct FitReport {
    std::vector<LossBreakdown> history;
    LossBreakdown final_losses;
    double wall_time_sec = 0.0;  // diagnostics only, kept out of report files
    int restored_best_epoch = -1;
};

struct AdamState {
    ParamVector m, v;
    long step_count = 0;
};

AdamState make_adam_state(const SceneModel& model);

// One adaptive-moment update with bias correction; throws on non-finite
// gradients, naming the parameter group.
void step(ParamVector& params, const ParamVector& grads, AdamState& state,
          const OptimConfig& config);

// Renormalizes quaternions and clamps opacities after a step.
void renormalize(SceneModel& model);

// Builds a model from track observations at the canonical frame, seeds
// the bases by per-cluster rigid registration, then optimizes the init
// objective for config.epochs_init steps.
SceneModel init_motion(const SequenceBundle& bundle, const OptimConfig& config,
                       const LossWeights& weights, FitReport* report = nullptr);

// Refinement stage: occlusion-gated rigidity with per-step invisibility
// scores. Requires resolved absolute tau0/tau1 in `weights`.
void refine(SceneModel& model, const SequenceBundle& bundle, const OptimConfig& config,
            const LossWeights& weights, FitReport* report = nullptr);

// The shared optimization loop behind init_motion and refine, usable on an
// already-assembled model. Returns the post-loop losses; a refine stage
// restores its best-track snapshot if the last epoch regressed.
LossBreakdown optimize(Stage stage, SceneModel& model, const SequenceBundle& bundle,
                       const OptimConfig& config, const LossWeights& weights, int epochs,
                       FitReport* report = nullptr);

// Central-difference validation of every loss term's analytic gradient.
GradCheckReport gradient_check(const SceneModel& model, const SequenceBundle& bundle,
                               const KnnGraph& graph, const LossWeights& weights,
                               double eps = 1e-5);

// Scene depth range at the canonical frame, used to resolve relative taus.
double depth_range_at_canonical(const SceneModel& model, const SequenceBundle& bundle);

}  // namespace restage
