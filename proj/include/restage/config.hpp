#pragma once

#include <stdexcept>
#include <string>

#include "restage/losses.hpp"
#include "restage/optim.hpp"
#include "restage/synth.hpp"

namespace restage {

// Schema violation: unknown key, wrong type, invalid value.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    OptimConfig optim;
    LossWeights losses;
    // Relative tau thresholds (fractions of the canonical depth range);
    // absolute values in `losses` win when taus_absolute is set.
    double tau0_rel = 0.01;
    double tau1_rel = 0.05;
    bool taus_absolute = false;

    double voxel_rel = 0.01;
    int edge_sample = 1000;
    double metric_gamma = 1.5;
    double variance_floor = 1e-12;

    int lemma_pairs = 48;
    bool lemma_rigidity_on_driving = true;

    double track_loss_threshold = 0.05;

    SceneSpec synth;
    bool pair_enabled = false;
    int driving_frames = 30;
    int driving_variant = 1;
    ArtifactKind artifact = ArtifactKind::None;
};

// Parses a strict-schema config document; unknown keys are rejected.
RunConfig parse_config(const std::string& text);

// Resolves --config arguments: a file path, or the preset names
// "default"/"desk" and "paper".
RunConfig load_config(const std::string& arg);

// Full document with every default filled in; reparsing it reproduces the
// same configuration.
std::string dump_config(const RunConfig& config);

// Absolute tau thresholds for a fitted model (relative taus scale with the
// canonical-frame depth range).
LossWeights resolve_taus(const RunConfig& config, const SceneModel& model,
                         const SequenceBundle& bundle);

}  // namespace restage
