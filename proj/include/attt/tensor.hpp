#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "attt/common.hpp"

namespace attt {

// Dense NCHW tensor of doubles. Doubles throughout: the nets are desk-scale
// and every gradient is validated against 64-bit central differences.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), v(size_t(n_) * c_ * h_ * w_, fill) {}

    static Tensor like(const Tensor& t, double fill = 0.0) { return Tensor(t.n, t.c, t.h, t.w, fill); }

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }
    int sample_size() const { return c * h * w; }

    double& at(int i, int ci, int y, int x) { return v[((size_t(i) * c + ci) * h + y) * w + x]; }
    double at(int i, int ci, int y, int x) const { return v[((size_t(i) * c + ci) * h + y) * w + x]; }

    double* sample_ptr(int i) { return v.data() + size_t(i) * sample_size(); }
    const double* sample_ptr(int i) const { return v.data() + size_t(i) * sample_size(); }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    Tensor slice(int i) const {
        Tensor out(1, c, h, w);
        std::copy(sample_ptr(i), sample_ptr(i) + sample_size(), out.v.begin());
        return out;
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) throw ContractError(std::string(what) + ": shape mismatch");
}

// Stacks single-sample tensors along the batch dimension.
inline Tensor stack(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw ContractError("stack: empty batch");
    Tensor out(int(xs.size()), xs[0].c, xs[0].h, xs[0].w);
    for (size_t i = 0; i < xs.size(); ++i) {
        require_same_shape(xs[0], xs[i], "stack");
        std::copy(xs[i].v.begin(), xs[i].v.end(), out.v.begin() + i * xs[0].size());
    }
    return out;
}

inline Tensor concat_batch(const Tensor& a, const Tensor& b) {
    if (a.c != b.c || a.h != b.h || a.w != b.w)
        throw ContractError("concat_batch: shape mismatch");
    Tensor out(a.n + b.n, a.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), out.v.begin());
    std::copy(b.v.begin(), b.v.end(), out.v.begin() + a.v.size());
    return out;
}

inline double mean(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

// Population standard deviation.
inline double stddev_pop(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    const double m = mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / double(xs.size()));
}

// Linear-interpolation quantile (the common "type 7" rule).
inline double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) throw ContractError("quantile: empty input");
    std::sort(xs.begin(), xs.end());
    const double pos = q * double(xs.size() - 1);
    const size_t lo = size_t(pos);
    const size_t hi = std::min(lo + 1, xs.size() - 1);
    const double frac = pos - double(lo);
    return xs[lo] * (1.0 - frac) + xs[hi] * frac;
}

inline double median(const std::vector<double>& xs) { return quantile(xs, 0.5); }

} // namespace attt
