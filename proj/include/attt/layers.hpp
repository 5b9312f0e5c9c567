#pragma once

#include <string>
#include <vector>

#include "attt/tensor.hpp"

namespace attt {

// One parameter block: value, gradient, and Adam moments of equal length.
struct Param {
    std::vector<double> value, grad, m, v;

    void resize(size_t k) {
        value.assign(k, 0.0);
        grad.assign(k, 0.0);
        m.assign(k, 0.0);
        v.assign(k, 0.0);
    }
    size_t size() const { return value.size(); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
    void reset_opt_state() {
        std::fill(m.begin(), m.end(), 0.0);
        std::fill(v.begin(), v.end(), 0.0);
    }
};

struct ParamRef {
    std::string name;
    Param* p;
};

// Named persistent state that is not optimized (BN running stats, SN vectors).
struct StateRef {
    std::string name;
    std::vector<double>* s;
};

struct Adam {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;

    void step(const std::vector<ParamRef>& params) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        for (const auto& ref : params) {
            Param& p = *ref.p;
            for (size_t i = 0; i < p.value.size(); ++i) {
                p.m[i] = beta1 * p.m[i] + (1.0 - beta1) * p.grad[i];
                p.v[i] = beta2 * p.v[i] + (1.0 - beta2) * p.grad[i] * p.grad[i];
                const double mhat = p.m[i] / bc1;
                const double vhat = p.v[i] / bc2;
                p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    void reset(const std::vector<ParamRef>& params) {
        t = 0;
        for (const auto& ref : params) ref.p->reset_opt_state();
    }
};

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const auto& ref : params) ref.p->zero_grad();
}

inline uint64_t params_hash(const std::vector<ParamRef>& params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& ref : params) {
        const uint64_t hv = hash_doubles(ref.p->value);
        h ^= hv;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// 2D convolution, NCHW, im2col + GEMM. Weight layout: out_ch x (in_ch*kh*kw).
// Optional spectral normalization: when enabled, forward uses weight/sigma
// with sigma from persistent power-iteration vectors; backward accumulates
// the gradient w.r.t. the normalized weight and finalize_sn_grad() converts
// it to the raw-weight gradient once per optimizer step.
struct Conv2d {
    int in_ch = 0, out_ch = 0, kh = 0, kw = 0, stride = 1;
    int pad_t = 0, pad_b = 0, pad_l = 0, pad_r = 0;
    bool use_bias = true;
    Param weight, bias;

    bool sn_enabled = false;
    std::vector<double> sn_u, sn_v;
    double sn_sigma = 1.0;
    std::vector<double> w_eff;

    Tensor x_cache;

    void init(int in, int out, int k, int stride_, int padt, int padb, int padl, int padr, Rng& rng,
              bool bias_ = true);
    int out_h(int ih) const { return (ih + pad_t + pad_b - kh) / stride + 1; }
    int out_w(int iw) const { return (iw + pad_l + pad_r - kw) / stride + 1; }

    void refresh_effective_weight(bool update_stats);
    const std::vector<double>& eff_w() const { return sn_enabled ? w_eff : weight.value; }

    // update_stats: run one power iteration before normalizing (training only).
    Tensor forward(const Tensor& x, bool keep_cache, bool update_stats);
    // Convolution with the current effective weight and no bias (tangent pass).
    Tensor forward_nobias(const Tensor& x) const;
    // dy -> dx using cached input; accumulates parameter grads when asked.
    Tensor backward(const Tensor& dy, bool accum_param_grads);
    // dy -> dx without touching caches or grads.
    Tensor backward_data(const Tensor& dy, int in_h, int in_w) const;
    // dW += correlate(dy, x); db += sum(dy). x must be the forward input.
    void accumulate_weight_grad(const Tensor& dy, const Tensor& x, bool with_bias);
    void finalize_sn_grad();

    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    void collect_state(std::vector<StateRef>& out, const std::string& prefix);
};

struct Linear {
    int in_dim = 0, out_dim = 0;
    Param weight, bias; // weight: out_dim x in_dim

    bool sn_enabled = false;
    std::vector<double> sn_u, sn_v;
    double sn_sigma = 1.0;
    std::vector<double> w_eff;

    std::vector<double> x_cache; // n x in_dim
    int n_cache = 0;

    void init(int in, int out, Rng& rng);
    void refresh_effective_weight(bool update_stats);
    const std::vector<double>& eff_w() const { return sn_enabled ? w_eff : weight.value; }

    std::vector<double> forward(const std::vector<double>& x, int n, bool keep_cache, bool update_stats);
    std::vector<double> forward_nobias(const std::vector<double>& x, int n) const;
    std::vector<double> backward(const std::vector<double>& dy, bool accum_param_grads);
    std::vector<double> backward_data(const std::vector<double>& dy, int n) const;
    void accumulate_weight_grad(const std::vector<double>& dy, const std::vector<double>& x, int n,
                                bool with_bias);
    void finalize_sn_grad();

    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    void collect_state(std::vector<StateRef>& out, const std::string& prefix);
};

struct BatchNorm2d {
    int ch = 0;
    double momentum = 0.9;
    double eps = 1e-5;
    Param gamma, beta;
    std::vector<double> run_mean, run_var;

    // caches
    Tensor xhat_cache;
    std::vector<double> inv_std_cache;
    bool trained_forward = false;

    void init(int channels);
    Tensor forward(const Tensor& x, bool training, bool keep_cache);
    Tensor backward(const Tensor& dy, bool accum_param_grads);

    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    void collect_state(std::vector<StateRef>& out, const std::string& prefix);
};

struct ReLU {
    Tensor y_cache;
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& dy) const;
};

// tanh when smooth, LeakyReLU(0.2) otherwise (smoothness-constraints ablation).
struct DiscActivation {
    bool smooth = true;
    Tensor y_cache;   // tanh output (smooth) or input sign info via y
    Tensor x_cache;   // kept for leaky backward
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& dy) const;
};

struct MaxPool2x2 {
    std::vector<int> argmax_cache;
    int in_h = 0, in_w = 0;
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& dy) const;
};

Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& dy);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db);

// Per-pixel softmax over channels, and its backward given dL/dprobs.
Tensor softmax_channels(const Tensor& z);
Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs);

// Standalone power-iteration spectral normalization of a 2D-reshaped weight.
// u/v persist across calls (resized on first use); zero weights pass through.
void spectral_normalize(std::vector<double>& w, int rows, int cols, std::vector<double>& u,
                        std::vector<double>& v, int iterations, double* sigma_out = nullptr);

} // namespace attt
