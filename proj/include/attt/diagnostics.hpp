#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attt/nets.hpp"
#include "attt/train.hpp"

namespace attt {

enum class ConvergenceMode {
    discriminative,
    equilibrium,
    memorization,
    forgetting_collapse,
    undetermined,
};

const char* to_string(ConvergenceMode m);

struct ConvergenceReport {
    ConvergenceMode mode = ConvergenceMode::undetermined;
    double train_real = 0.0, train_fake = 0.0;
    double val_real = 0.0, val_fake = 0.0;
    int window = 0;
    double tol = 0.0;
};

// End-state signatures over the final window of discriminator losses:
// equilibrium has both validation losses near 1.0, memorization has the real
// loss near 2.0 with the fake loss near 0, discriminative has both near 0.
// Equilibrium-shaped losses with a failing corrupted-mask probe (clean-vs-
// corrupted score gap below tol) are a forgetting collapse; without a probe
// the benign reading wins.
ConvergenceReport classify_convergence(const TrainHistory& history, int window, double tol,
                                       std::optional<double> corrupted_score_gap = std::nullopt);

// Area under the ROC of discriminator scores separating clean masks (scored
// higher) from corrupted ones. Needs at least 20 samples per class.
double corrupted_detection_auc(Discriminator& disc, const std::vector<Tensor>& clean_masks,
                               const std::vector<Tensor>& corrupted_masks);

// Rank-statistic AUC on raw scores (ties get half credit).
double auc_from_scores(const std::vector<double>& positive, const std::vector<double>& negative);

// Mean score gap d(clean) - d(corrupted), the forgetting probe.
double corrupted_score_gap(Discriminator& disc, const std::vector<Tensor>& clean_masks,
                           const std::vector<Tensor>& corrupted_masks);

} // namespace attt
