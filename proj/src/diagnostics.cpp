#include "attt/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace attt {

const char* to_string(ConvergenceMode m) {
    switch (m) {
        case ConvergenceMode::discriminative: return "discriminative";
        case ConvergenceMode::equilibrium: return "equilibrium";
        case ConvergenceMode::memorization: return "memorization";
        case ConvergenceMode::forgetting_collapse: return "forgetting-collapse";
        case ConvergenceMode::undetermined: return "undetermined";
    }
    return "undetermined";
}

ConvergenceReport classify_convergence(const TrainHistory& history, int window, double tol,
                                       std::optional<double> corrupted_score_gap) {
    const int n = int(history.epochs.size());
    if (n < window) throw ContractError("classify_convergence: history shorter than window");
    ConvergenceReport r;
    r.window = window;
    r.tol = tol;
    for (int i = n - window; i < n; ++i) {
        r.train_real += history.epochs[size_t(i)].train_disc_real;
        r.train_fake += history.epochs[size_t(i)].train_disc_fake;
        r.val_real += history.epochs[size_t(i)].val_disc_real;
        r.val_fake += history.epochs[size_t(i)].val_disc_fake;
    }
    r.train_real /= window;
    r.train_fake /= window;
    r.val_real /= window;
    r.val_fake /= window;
    if (!std::isfinite(r.val_real) || !std::isfinite(r.val_fake))
        throw ContractError("classify_convergence: non-finite evidence");

    const bool val_zero = std::fabs(r.val_real) <= tol && std::fabs(r.val_fake) <= tol;
    const bool memorized = std::fabs(r.val_real - 2.0) <= tol && std::fabs(r.val_fake) <= tol;
    const bool val_eq = std::fabs(r.val_real - 1.0) <= tol && std::fabs(r.val_fake - 1.0) <= tol;
    const bool train_eq =
        std::fabs(r.train_real - 1.0) <= tol && std::fabs(r.train_fake - 1.0) <= tol;

    if (val_zero)
        r.mode = ConvergenceMode::discriminative;
    else if (memorized)
        r.mode = ConvergenceMode::memorization;
    else if (val_eq) {
        if (train_eq && corrupted_score_gap && *corrupted_score_gap < tol)
            r.mode = ConvergenceMode::forgetting_collapse;
        else
            r.mode = ConvergenceMode::equilibrium;
    } else
        r.mode = ConvergenceMode::undetermined;
    return r;
}

double auc_from_scores(const std::vector<double>& positive, const std::vector<double>& negative) {
    if (positive.empty() || negative.empty()) throw ContractError("auc: empty score set");
    double wins = 0.0;
    for (double p : positive)
        for (double q : negative) {
            if (p > q)
                wins += 1.0;
            else if (p == q)
                wins += 0.5;
        }
    return wins / (double(positive.size()) * double(negative.size()));
}

namespace {

std::vector<double> score_masks(Discriminator& disc, const std::vector<Tensor>& masks) {
    std::vector<double> out;
    out.reserve(masks.size());
    for (const auto& m : masks) {
        auto s = disc.forward(m, false, false);
        out.push_back(s[0]);
    }
    return out;
}

} // namespace

double corrupted_detection_auc(Discriminator& disc, const std::vector<Tensor>& clean_masks,
                               const std::vector<Tensor>& corrupted_masks) {
    if (clean_masks.size() < 20 || corrupted_masks.size() < 20)
        throw ContractError("corrupted_detection_auc: need >= 20 samples per class");
    const auto clean = score_masks(disc, clean_masks);
    const auto corr = score_masks(disc, corrupted_masks);
    return auc_from_scores(clean, corr);
}

double corrupted_score_gap(Discriminator& disc, const std::vector<Tensor>& clean_masks,
                           const std::vector<Tensor>& corrupted_masks) {
    if (clean_masks.empty() || corrupted_masks.empty())
        throw ContractError("corrupted_score_gap: empty inputs");
    const auto clean = score_masks(disc, clean_masks);
    const auto corr = score_masks(disc, corrupted_masks);
    return mean(clean) - mean(corr);
}

} // namespace attt
