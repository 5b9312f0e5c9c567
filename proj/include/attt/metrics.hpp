#pragma once

#include <string>
#include <vector>

#include "attt/tensor.hpp"

namespace attt {

struct MetricRecord {
    std::string patient_id;
    std::string phase; // "before" or "after"
    std::vector<double> dice;      // per class
    std::vector<double> iou;       // per class
    std::vector<double> hausdorff; // per class, pixels
    double mean_fg_dice = 0.0;
    double mean_fg_iou = 0.0;
    double mean_fg_hausdorff = 0.0;
};

// Per-class overlap metrics on hard one-hot masks. Soft inputs must be
// hardened (argmax) by the caller. Both-empty classes score 1.0.
std::vector<double> dice(const Tensor& a, const Tensor& b);
std::vector<double> iou(const Tensor& a, const Tensor& b);

// Symmetric Hausdorff distance between foreground pixel sets, Euclidean in
// pixel units; exactly one empty mask gives max(h, w), both empty 0.
std::vector<double> hausdorff(const Tensor& a, const Tensor& b);

// Foreground mean (classes 1..c-1) of a per-class metric vector.
double foreground_mean(const std::vector<double>& per_class);

// Two-sided bootstrapped paired t-test: mean-centered resampling of the
// paired differences under the null. Deterministic given seed.
double bootstrap_ttest(const std::vector<double>& before, const std::vector<double>& after,
                       int n_boot, uint64_t seed);

struct MetricSummary {
    double mean_dice_before = 0.0, std_dice_before = 0.0;
    double mean_dice_after = 0.0, std_dice_after = 0.0;
    double mean_iou_before = 0.0, std_iou_before = 0.0;
    double mean_iou_after = 0.0, std_iou_after = 0.0;
    double mean_hd_before = 0.0, std_hd_before = 0.0;
    double mean_hd_after = 0.0, std_hd_after = 0.0;
    double delta_dice = 0.0, delta_iou = 0.0, delta_hd = 0.0;
    int n_before = 0, n_after = 0;
};

// Mean and population std per metric and phase over patient records.
MetricSummary aggregate(const std::vector<MetricRecord>& records);

// Slice-level metrics averaged into one patient record.
MetricRecord patient_record(const std::string& patient_id, const std::string& phase,
                            const std::vector<Tensor>& pred_slices,
                            const std::vector<Tensor>& gt_slices);

} // namespace attt
