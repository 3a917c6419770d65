#pragma once

#include "restage/bundle.hpp"
#include "restage/optim.hpp"
#include "restage/visibility.hpp"

namespace restage {

inline constexpr double kSharedFrameTolerance = 1e-4;

struct VarianceReport {
    double var_joint_mean = 0.0;  // sigma_2: joint training on the combined clip
    double var_solo_mean = 0.0;   // sigma_0: driving segment alone, unsupervised
    double ratio = 1.0;
    int pair_count = 0;
    uint64_t seed = 0;
    std::vector<double> per_pair_joint, per_pair_solo;
};

// Reverses the base bundle and concatenates the driving bundle behind it,
// dropping the duplicated shared first frame from the driving side.
CombinedBundle rewind_concat(const SequenceBundle& base, const SequenceBundle& driving);

// Inserts one splat per track that first becomes visible in the driving
// segment: coefficients are inverse-distance interpolated from the nearest
// existing splats in deformed space, and the canonical position is
// recovered through the inverse blended transform. Existing splats are
// preserved bit-exactly.
SceneModel insert_disoccluded(const SceneModel& model, const SequenceBundle& bundle,
                              const DisocclusionSet& dis);

// Keeps frames [t1-1, end), reindexed from 0 (the shared frame becomes
// frame 0).
SceneModel truncate(const SceneModel& model, int t1);

// Lemma experiment: trains (a) jointly on the combined clip with track
// supervision only on the base segment and (b) on the driving segment
// alone with no track supervision, from identical seeded initial states,
// then compares the variance of pairwise distances over the driving
// segment on randomly sampled foreground pairs.
VarianceReport lemma_variance_experiment(const SequenceBundle& base,
                                         const SequenceBundle& driving,
                                         const OptimConfig& config, const LossWeights& weights,
                                         int num_pairs, uint64_t seed,
                                         bool rigidity_on_driving = true);

}  // namespace restage
