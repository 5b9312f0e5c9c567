#include "attt/metrics.hpp"

#include <cmath>

namespace attt {

namespace {

void class_counts(const Tensor& a, const Tensor& b, int c, double& na, double& nb, double& ninter) {
    na = nb = ninter = 0.0;
    const double* pa = a.sample_ptr(0) + size_t(c) * a.plane();
    const double* pb = b.sample_ptr(0) + size_t(c) * b.plane();
    for (int k = 0; k < a.plane(); ++k) {
        const bool ia = pa[k] != 0.0, ib = pb[k] != 0.0;
        na += ia;
        nb += ib;
        ninter += ia && ib;
    }
}

} // namespace

std::vector<double> dice(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dice");
    std::vector<double> out(size_t(a.c), 0.0);
    for (int c = 0; c < a.c; ++c) {
        double na, nb, ni;
        class_counts(a, b, c, na, nb, ni);
        out[size_t(c)] = (na + nb) == 0.0 ? 1.0 : 2.0 * ni / (na + nb);
    }
    return out;
}

std::vector<double> iou(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "iou");
    std::vector<double> out(size_t(a.c), 0.0);
    for (int c = 0; c < a.c; ++c) {
        double na, nb, ni;
        class_counts(a, b, c, na, nb, ni);
        const double nu = na + nb - ni;
        out[size_t(c)] = nu == 0.0 ? 1.0 : ni / nu;
    }
    return out;
}

std::vector<double> hausdorff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hausdorff");
    std::vector<double> out(size_t(a.c), 0.0);
    for (int c = 0; c < a.c; ++c) {
        std::vector<std::pair<int, int>> pa, pb;
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < a.w; ++x) {
                if (a.at(0, c, y, x) != 0.0) pa.emplace_back(y, x);
                if (b.at(0, c, y, x) != 0.0) pb.emplace_back(y, x);
            }
        if (pa.empty() && pb.empty()) {
            out[size_t(c)] = 0.0;
            continue;
        }
        if (pa.empty() || pb.empty()) {
            out[size_t(c)] = double(std::max(a.h, a.w));
            continue;
        }
        auto directed = [](const std::vector<std::pair<int, int>>& s,
                           const std::vector<std::pair<int, int>>& t) {
            double worst = 0.0;
            for (const auto& [sy, sx] : s) {
                double best = 1e300;
                for (const auto& [ty, tx] : t) {
                    const double dy = sy - ty, dx = sx - tx;
                    const double d2 = dy * dy + dx * dx;
                    if (d2 < best) best = d2;
                }
                if (best > worst) worst = best;
            }
            return std::sqrt(worst);
        };
        out[size_t(c)] = std::max(directed(pa, pb), directed(pb, pa));
    }
    return out;
}

double foreground_mean(const std::vector<double>& per_class) {
    if (per_class.size() < 2) throw ContractError("foreground_mean: need at least 2 classes");
    double acc = 0.0;
    for (size_t c = 1; c < per_class.size(); ++c) acc += per_class[c];
    return acc / double(per_class.size() - 1);
}

double bootstrap_ttest(const std::vector<double>& before, const std::vector<double>& after,
                       int n_boot, uint64_t seed) {
    if (before.size() != after.size()) throw ContractError("bootstrap_ttest: length mismatch");
    const size_t n = before.size();
    if (n < 5) throw ContractError("bootstrap_ttest: need at least 5 paired samples");

    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = after[i] - before[i];
    const double dm = mean(d);
    double var = 0.0;
    for (double x : d) var += (x - dm) * (x - dm);
    var /= double(n - 1);
    const double se = std::sqrt(var / double(n));

    auto t_stat = [&](double m, double s) {
        if (s < 1e-300) return m == 0.0 ? 0.0 : (m > 0.0 ? 1e300 : -1e300);
        return m / s;
    };
    const double t_obs = t_stat(dm, se);

    // null distribution: resample mean-centered differences
    std::vector<double> centered(n);
    for (size_t i = 0; i < n; ++i) centered[i] = d[i] - dm;
    Rng rng(derive_seed(seed, "bootstrap"));
    int exceed = 0;
    std::vector<double> sample(n);
    for (int b = 0; b < n_boot; ++b) {
        for (size_t i = 0; i < n; ++i) sample[i] = centered[size_t(rng.uniform_int(int(n)))];
        const double sm = mean(sample);
        double sv = 0.0;
        for (double x : sample) sv += (x - sm) * (x - sm);
        sv /= double(n - 1);
        const double sse = std::sqrt(sv / double(n));
        if (std::fabs(t_stat(sm, sse)) >= std::fabs(t_obs)) ++exceed;
    }
    return double(exceed + 1) / double(n_boot + 1);
}

namespace {

// Sorted accumulation keeps the summary bit-identical under any permutation
// of the input records.
double mean_sorted(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return mean(xs);
}

double stddev_sorted(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    return stddev_pop(xs);
}

} // namespace

MetricSummary aggregate(const std::vector<MetricRecord>& records) {
    if (records.empty()) return {};
    MetricSummary s;
    std::vector<double> db, da, ib, ia, hb, ha;
    for (const auto& r : records) {
        if (r.phase == "before") {
            db.push_back(r.mean_fg_dice);
            ib.push_back(r.mean_fg_iou);
            hb.push_back(r.mean_fg_hausdorff);
        } else {
            da.push_back(r.mean_fg_dice);
            ia.push_back(r.mean_fg_iou);
            ha.push_back(r.mean_fg_hausdorff);
        }
    }
    s.n_before = int(db.size());
    s.n_after = int(da.size());
    s.mean_dice_before = mean_sorted(db);
    s.std_dice_before = stddev_sorted(db);
    s.mean_dice_after = mean_sorted(da);
    s.std_dice_after = stddev_sorted(da);
    s.mean_iou_before = mean_sorted(ib);
    s.std_iou_before = stddev_sorted(ib);
    s.mean_iou_after = mean_sorted(ia);
    s.std_iou_after = stddev_sorted(ia);
    s.mean_hd_before = mean_sorted(hb);
    s.std_hd_before = stddev_sorted(hb);
    s.mean_hd_after = mean_sorted(ha);
    s.std_hd_after = stddev_sorted(ha);
    s.delta_dice = s.mean_dice_after - s.mean_dice_before;
    s.delta_iou = s.mean_iou_after - s.mean_iou_before;
    s.delta_hd = s.mean_hd_after - s.mean_hd_before;
    return s;
}

MetricRecord patient_record(const std::string& patient_id, const std::string& phase,
                            const std::vector<Tensor>& pred_slices,
                            const std::vector<Tensor>& gt_slices) {
    if (pred_slices.empty() || pred_slices.size() != gt_slices.size())
        throw ContractError("patient_record: slice count mismatch");
    const int c = pred_slices[0].c;
    MetricRecord r;
    r.patient_id = patient_id;
    r.phase = phase;
    r.dice.assign(size_t(c), 0.0);
    r.iou.assign(size_t(c), 0.0);
    r.hausdorff.assign(size_t(c), 0.0);
    for (size_t k = 0; k < pred_slices.size(); ++k) {
        const auto d = dice(pred_slices[k], gt_slices[k]);
        const auto i = iou(pred_slices[k], gt_slices[k]);
        const auto h = hausdorff(pred_slices[k], gt_slices[k]);
        for (int cc = 0; cc < c; ++cc) {
            r.dice[size_t(cc)] += d[size_t(cc)];
            r.iou[size_t(cc)] += i[size_t(cc)];
            r.hausdorff[size_t(cc)] += h[size_t(cc)];
        }
    }
    for (int cc = 0; cc < c; ++cc) {
        r.dice[size_t(cc)] /= double(pred_slices.size());
        r.iou[size_t(cc)] /= double(pred_slices.size());
        r.hausdorff[size_t(cc)] /= double(pred_slices.size());
    }
    r.mean_fg_dice = foreground_mean(r.dice);
    r.mean_fg_iou = foreground_mean(r.iou);
    r.mean_fg_hausdorff = foreground_mean(r.hausdorff);
    return r;
}

} // namespace attt
