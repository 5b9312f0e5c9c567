#include "attt/layers.hpp"

namespace attt {

namespace {

// Deterministic dense kernels. Accumulation order is fixed by the loop
// structure (per-element sequential over k, vectorizable over the innermost
// index without cross-lane reductions), so results are bit-identical
// regardless of allocation alignment or call history.

// Column blocking keeps the B panel L1-resident across output rows; the
// per-element accumulation order over k is unchanged, so results stay
// bit-identical to the naive triple loop.
constexpr int kColBlock = 256;

// C(m x n) += A(m x k) * B(k x n). Four C rows per B pass cut the panel
// traffic; each element still accumulates k in ascending order.
void matmul_acc(const double* __restrict A, const double* __restrict B, double* __restrict C,
                int m, int k, int n) {
    for (int j0 = 0; j0 < n; j0 += kColBlock) {
        const int jn = std::min(kColBlock, n - j0);
        int i = 0;
        for (; i + 3 < m; i += 4) {
            const double* a0 = A + size_t(i) * k;
            const double* a1 = a0 + k;
            const double* a2 = a1 + k;
            const double* a3 = a2 + k;
            double* __restrict c0 = C + size_t(i) * n + j0;
            double* __restrict c1 = c0 + n;
            double* __restrict c2 = c1 + n;
            double* __restrict c3 = c2 + n;
            for (int kk = 0; kk < k; ++kk) {
                const double* __restrict b = B + size_t(kk) * n + j0;
                const double w0 = a0[kk], w1 = a1[kk], w2 = a2[kk], w3 = a3[kk];
                for (int j = 0; j < jn; ++j) {
                    const double bv = b[j];
                    c0[j] += w0 * bv;
                    c1[j] += w1 * bv;
                    c2[j] += w2 * bv;
                    c3[j] += w3 * bv;
                }
            }
        }
        for (; i < m; ++i) {
            const double* a = A + size_t(i) * k;
            double* __restrict c = C + size_t(i) * n + j0;
            int kk = 0;
            for (; kk + 1 < k; kk += 2) {
                const double a0 = a[kk], a1 = a[kk + 1];
                const double* __restrict b0 = B + size_t(kk) * n + j0;
                const double* __restrict b1 = b0 + n;
                for (int j = 0; j < jn; ++j) c[j] += a0 * b0[j] + a1 * b1[j];
            }
            if (kk < k) {
                const double a0 = a[kk];
                const double* __restrict b0 = B + size_t(kk) * n + j0;
                for (int j = 0; j < jn; ++j) c[j] += a0 * b0[j];
            }
        }
    }
}

// C(m x n) = A(m x k) * B(k x n), overwriting C
void matmul_set(const double* __restrict A, const double* __restrict B, double* __restrict C,
                int m, int k, int n) {
    std::fill(C, C + size_t(m) * n, 0.0);
    matmul_acc(A, B, C, m, k, n);
}

// C(k x n) += A(m x k)^T * B(m x n), routed through a transpose of A so the
// hot loop streams rows of C exactly once
void matmul_at_acc(const double* __restrict A, const double* __restrict B, double* __restrict C,
                   int m, int k, int n) {
    thread_local std::vector<double> at;
    at.resize(size_t(m) * k);
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) at[size_t(kk) * m + i] = A[size_t(i) * k + kk];
    matmul_acc(at.data(), B, C, k, m, n);
}

// C(k x n) = A(m x k)^T * B(m x n), overwriting C
void matmul_at_set(const double* __restrict A, const double* __restrict B, double* __restrict C,
                   int m, int k, int n) {
    thread_local std::vector<double> at;
    at.resize(size_t(m) * k);
    for (int i = 0; i < m; ++i)
        for (int kk = 0; kk < k; ++kk) at[size_t(kk) * m + i] = A[size_t(i) * k + kk];
    matmul_set(at.data(), B, C, k, m, n);
}

// C(m x k) += A(m x n) * B(k x n)^T via an explicit transpose of B
void matmul_bt_acc(const double* A, const double* B, double* C, int m, int n, int k) {
    thread_local std::vector<double> bt;
    bt.resize(size_t(n) * k);
    for (int kk = 0; kk < k; ++kk)
        for (int j = 0; j < n; ++j) bt[size_t(j) * k + kk] = B[size_t(kk) * n + j];
    matmul_acc(A, bt.data(), C, m, n, k);
}

double dot(const double* a, const double* b, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(const double* a, size_t n) { return std::sqrt(dot(a, a, n)); }

// col: (in_ch*kh*kw) x (oh*ow) for one sample.
void im2col(const double* x, int c, int h, int w, int kh, int kw, int stride, int pad_t, int pad_l,
            int oh, int ow, double* col) {
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                double* dst = col + size_t((ci * kh + ky) * kw + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad_t;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst + size_t(oy) * ow, dst + size_t(oy + 1) * ow, 0.0);
                        continue;
                    }
                    const double* src = x + (size_t(ci) * h + iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad_l;
                        dst[size_t(oy) * ow + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* col, int c, int h, int w, int kh, int kw, int stride, int pad_t, int pad_l,
            int oh, int ow, double* x) {
    std::fill(x, x + size_t(c) * h * w, 0.0);
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                const double* src = col + size_t((ci * kh + ky) * kw + kx) * oh * ow;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride + ky - pad_t;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = x + (size_t(ci) * h + iy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride + kx - pad_l;
                        if (ix >= 0 && ix < w) dst[ix] += src[size_t(oy) * ow + ox];
                    }
                }
            }
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// spectral_normalize

void spectral_normalize(std::vector<double>& w, int rows, int cols, std::vector<double>& u,
                        std::vector<double>& v, int iterations, double* sigma_out) {
    if (u.size() != size_t(rows)) u.assign(size_t(rows), 1.0 / std::sqrt(double(rows)));
    if (v.size() != size_t(cols)) v.assign(size_t(cols), 0.0);

    for (int it = 0; it < iterations; ++it) {
        // v = normalize(W^T u)
        std::fill(v.begin(), v.end(), 0.0);
        matmul_at_acc(w.data(), u.data(), v.data(), rows, cols, 1);
        const double nv = norm2(v.data(), v.size());
        if (nv < 1e-300) {
            if (sigma_out) *sigma_out = 0.0;
            return; // zero weight: pass through unchanged
        }
        for (double& x : v) x /= nv;
        // u = normalize(W v)
        std::fill(u.begin(), u.end(), 0.0);
        matmul_acc(w.data(), v.data(), u.data(), rows, cols, 1);
        const double nu = norm2(u.data(), u.size());
        if (nu < 1e-300) {
            if (sigma_out) *sigma_out = 0.0;
            return;
        }
        for (double& x : u) x /= nu;
    }
    std::vector<double> wv(size_t(rows), 0.0);
    matmul_acc(w.data(), v.data(), wv.data(), rows, cols, 1);
    const double sigma = dot(u.data(), wv.data(), size_t(rows));
    if (sigma_out) *sigma_out = sigma;
    if (std::fabs(sigma) < 1e-300) return;
    for (double& x : w) x /= sigma;
}

// ---------------------------------------------------------------------------
// Conv2d

void Conv2d::init(int in, int out, int k, int stride_, int padt, int padb, int padl, int padr,
                  Rng& rng, bool bias_) {
    in_ch = in;
    out_ch = out;
    kh = kw = k;
    stride = stride_;
    pad_t = padt;
    pad_b = padb;
    pad_l = padl;
    pad_r = padr;
    use_bias = bias_;
    const size_t fan_in = size_t(in) * k * k;
    weight.resize(size_t(out) * fan_in);
    bias.resize(use_bias ? size_t(out) : 0);
    const double scale = std::sqrt(2.0 / double(fan_in)); // He init
    for (double& x : weight.value) x = rng.normal(0.0, scale);
}

void Conv2d::refresh_effective_weight(bool update_stats) {
    if (!sn_enabled) return;
    const int rows = out_ch;
    const int cols = in_ch * kh * kw;
    if (sn_u.size() != size_t(rows)) sn_u.assign(size_t(rows), 1.0 / std::sqrt(double(rows)));
    if (sn_v.size() != size_t(cols)) {
        sn_v.assign(size_t(cols), 0.0);
        update_stats = true; // warm-up iteration so sigma starts meaningful
    }
    if (update_stats) {
        std::fill(sn_v.begin(), sn_v.end(), 0.0);
        matmul_at_acc(weight.value.data(), sn_u.data(), sn_v.data(), rows, cols, 1);
        const double nv = norm2(sn_v.data(), sn_v.size());
        if (nv > 1e-300) {
            for (double& x : sn_v) x /= nv;
            std::vector<double> ut(size_t(rows), 0.0);
            matmul_acc(weight.value.data(), sn_v.data(), ut.data(), rows, cols, 1);
            const double nu = norm2(ut.data(), ut.size());
            if (nu > 1e-300)
                for (int i = 0; i < rows; ++i) sn_u[size_t(i)] = ut[size_t(i)] / nu;
        }
    }
    std::vector<double> wv(size_t(rows), 0.0);
    matmul_acc(weight.value.data(), sn_v.data(), wv.data(), rows, cols, 1);
    sn_sigma = dot(sn_u.data(), wv.data(), size_t(rows));
    w_eff = weight.value;
    if (std::fabs(sn_sigma) > 1e-300)
        for (double& x : w_eff) x /= sn_sigma;
}

Tensor Conv2d::forward(const Tensor& x, bool keep_cache, bool update_stats) {
    if (x.c != in_ch) throw ContractError("Conv2d: channel mismatch");
    refresh_effective_weight(update_stats);
    const int oh = out_h(x.h), ow = out_w(x.w);
    Tensor y(x.n, out_ch, oh, ow);
    const int cols = in_ch * kh * kw;
    const int hw = oh * ow;
    std::vector<double> col(size_t(cols) * hw);
    const double* W = eff_w().data();
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample_ptr(i), in_ch, x.h, x.w, kh, kw, stride, pad_t, pad_l, oh, ow, col.data());
        double* out = y.sample_ptr(i);
        matmul_acc(W, col.data(), out, out_ch, cols, hw);
        if (use_bias)
            for (int oc = 0; oc < out_ch; ++oc) {
                const double b = bias.value[oc];
                double* row = out + size_t(oc) * hw;
                for (int j = 0; j < hw; ++j) row[j] += b;
            }
    }
    if (keep_cache) x_cache = x;
    return y;
}

Tensor Conv2d::forward_nobias(const Tensor& x) const {
    const int oh = out_h(x.h), ow = out_w(x.w);
    Tensor y(x.n, out_ch, oh, ow);
    const int cols = in_ch * kh * kw;
    const int hw = oh * ow;
    std::vector<double> col(size_t(cols) * hw);
    const double* W = eff_w().data();
    for (int i = 0; i < x.n; ++i) {
        im2col(x.sample_ptr(i), in_ch, x.h, x.w, kh, kw, stride, pad_t, pad_l, oh, ow, col.data());
        matmul_acc(W, col.data(), y.sample_ptr(i), out_ch, cols, hw);
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool accum_param_grads) {
    if (accum_param_grads) accumulate_weight_grad(dy, x_cache, use_bias);
    return backward_data(dy, x_cache.h, x_cache.w);
}

Tensor Conv2d::backward_data(const Tensor& dy, int in_h, int in_w) const {
    Tensor dx(dy.n, in_ch, in_h, in_w);
    const int cols = in_ch * kh * kw;
    const int oh = dy.h, ow = dy.w;
    const int hw = oh * ow;
    std::vector<double> dcol(size_t(cols) * hw);
    const double* W = eff_w().data();
    for (int i = 0; i < dy.n; ++i) {
        matmul_at_set(W, dy.sample_ptr(i), dcol.data(), out_ch, cols, hw);
        col2im(dcol.data(), in_ch, in_h, in_w, kh, kw, stride, pad_t, pad_l, oh, ow, dx.sample_ptr(i));
    }
    return dx;
}

void Conv2d::accumulate_weight_grad(const Tensor& dy, const Tensor& x, bool with_bias) {
    const int cols = in_ch * kh * kw;
    const int oh = dy.h, ow = dy.w;
    const int hw = oh * ow;
    std::vector<double> col(size_t(cols) * hw);
    for (int i = 0; i < dy.n; ++i) {
        im2col(x.sample_ptr(i), in_ch, x.h, x.w, kh, kw, stride, pad_t, pad_l, oh, ow, col.data());
        matmul_bt_acc(dy.sample_ptr(i), col.data(), weight.grad.data(), out_ch, hw, cols);
        if (with_bias && use_bias) {
            const double* d = dy.sample_ptr(i);
            for (int oc = 0; oc < out_ch; ++oc) {
                double acc = 0.0;
                const double* row = d + size_t(oc) * hw;
                for (int j = 0; j < hw; ++j) acc += row[j];
                bias.grad[oc] += acc;
            }
        }
    }
}

void Conv2d::finalize_sn_grad() {
    if (!sn_enabled || std::fabs(sn_sigma) < 1e-300) return;
    // grad currently holds dL/dW_hat with W_hat = W / sigma, sigma = u^T W v:
    // dL/dW = (dL/dW_hat - <dL/dW_hat, W_hat> u v^T) / sigma
    const int rows = out_ch;
    const int cols = in_ch * kh * kw;
    const double inner = dot(weight.grad.data(), w_eff.data(), weight.grad.size());
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const size_t idx = size_t(r) * cols + c;
            weight.grad[idx] = (weight.grad[idx] - inner * sn_u[size_t(r)] * sn_v[size_t(c)]) /
                               sn_sigma;
        }
}

void Conv2d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &weight});
    if (use_bias) out.push_back({prefix + ".b", &bias});
}

void Conv2d::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    if (sn_enabled) {
        out.push_back({prefix + ".sn_u", &sn_u});
        out.push_back({prefix + ".sn_v", &sn_v});
    }
}

// ---------------------------------------------------------------------------
// Linear

void Linear::init(int in, int out, Rng& rng) {
    in_dim = in;
    out_dim = out;
    weight.resize(size_t(in) * out);
    bias.resize(out);
    const double scale = std::sqrt(2.0 / double(in));
    for (double& x : weight.value) x = rng.normal(0.0, scale);
}

void Linear::refresh_effective_weight(bool update_stats) {
    if (!sn_enabled) return;
    if (sn_u.size() != size_t(out_dim)) sn_u.assign(size_t(out_dim), 1.0 / std::sqrt(double(out_dim)));
    if (sn_v.size() != size_t(in_dim)) {
        sn_v.assign(size_t(in_dim), 0.0);
        update_stats = true;
    }
    if (update_stats) {
        std::fill(sn_v.begin(), sn_v.end(), 0.0);
        matmul_at_acc(weight.value.data(), sn_u.data(), sn_v.data(), out_dim, in_dim, 1);
        const double nv = norm2(sn_v.data(), sn_v.size());
        if (nv > 1e-300) {
            for (double& x : sn_v) x /= nv;
            std::vector<double> ut(size_t(out_dim), 0.0);
            matmul_acc(weight.value.data(), sn_v.data(), ut.data(), out_dim, in_dim, 1);
            const double nu = norm2(ut.data(), ut.size());
            if (nu > 1e-300)
                for (int i = 0; i < out_dim; ++i) sn_u[size_t(i)] = ut[size_t(i)] / nu;
        }
    }
    std::vector<double> wv(size_t(out_dim), 0.0);
    matmul_acc(weight.value.data(), sn_v.data(), wv.data(), out_dim, in_dim, 1);
    sn_sigma = dot(sn_u.data(), wv.data(), size_t(out_dim));
    w_eff = weight.value;
    if (std::fabs(sn_sigma) > 1e-300)
        for (double& x : w_eff) x /= sn_sigma;
}

std::vector<double> Linear::forward(const std::vector<double>& x, int n, bool keep_cache,
                                    bool update_stats) {
    refresh_effective_weight(update_stats);
    std::vector<double> y(size_t(n) * out_dim, 0.0);
    // y = x * W^T
    matmul_bt_acc(x.data(), eff_w().data(), y.data(), n, in_dim, out_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) y[size_t(i) * out_dim + j] += bias.value[size_t(j)];
    if (keep_cache) {
        x_cache = x;
        n_cache = n;
    }
    return y;
}

std::vector<double> Linear::forward_nobias(const std::vector<double>& x, int n) const {
    std::vector<double> y(size_t(n) * out_dim, 0.0);
    matmul_bt_acc(x.data(), eff_w().data(), y.data(), n, in_dim, out_dim);
    return y;
}

std::vector<double> Linear::backward(const std::vector<double>& dy, bool accum_param_grads) {
    if (accum_param_grads) accumulate_weight_grad(dy, x_cache, n_cache, true);
    return backward_data(dy, n_cache);
}

std::vector<double> Linear::backward_data(const std::vector<double>& dy, int n) const {
    std::vector<double> dx(size_t(n) * in_dim, 0.0);
    // dx = dy * W
    matmul_acc(dy.data(), eff_w().data(), dx.data(), n, out_dim, in_dim);
    return dx;
}

void Linear::accumulate_weight_grad(const std::vector<double>& dy, const std::vector<double>& x,
                                    int n, bool with_bias) {
    // dW += dy^T * x
    matmul_at_acc(dy.data(), x.data(), weight.grad.data(), n, out_dim, in_dim);
    if (with_bias)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < out_dim; ++j) bias.grad[size_t(j)] += dy[size_t(i) * out_dim + j];
}

void Linear::finalize_sn_grad() {
    if (!sn_enabled || std::fabs(sn_sigma) < 1e-300) return;
    const double inner = dot(weight.grad.data(), w_eff.data(), weight.grad.size());
    for (int r = 0; r < out_dim; ++r)
        for (int c = 0; c < in_dim; ++c) {
            const size_t idx = size_t(r) * in_dim + c;
            weight.grad[idx] = (weight.grad[idx] - inner * sn_u[size_t(r)] * sn_v[size_t(c)]) /
                               sn_sigma;
        }
}

void Linear::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".w", &weight});
    out.push_back({prefix + ".b", &bias});
}

void Linear::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    if (sn_enabled) {
        out.push_back({prefix + ".sn_u", &sn_u});
        out.push_back({prefix + ".sn_v", &sn_v});
    }
}

// ---------------------------------------------------------------------------
// BatchNorm2d

void BatchNorm2d::init(int channels) {
    ch = channels;
    gamma.resize(channels);
    beta.resize(channels);
    std::fill(gamma.value.begin(), gamma.value.end(), 1.0);
    run_mean.assign(channels, 0.0);
    run_var.assign(channels, 1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool training, bool keep_cache) {
    Tensor y = Tensor::like(x);
    const int plane = x.plane();
    const double count = double(x.n) * plane;
    trained_forward = training;
    if (keep_cache) {
        xhat_cache = Tensor::like(x);
        inv_std_cache.assign(ch, 0.0);
    }
    for (int c = 0; c < ch; ++c) {
        double mu, var;
        if (training) {
            double s = 0.0, s2 = 0.0;
            for (int i = 0; i < x.n; ++i) {
                const double* p = x.sample_ptr(i) + size_t(c) * plane;
                for (int k = 0; k < plane; ++k) {
                    s += p[k];
                    s2 += p[k] * p[k];
                }
            }
            mu = s / count;
            var = s2 / count - mu * mu;
            if (var < 0.0) var = 0.0;
            run_mean[c] = momentum * run_mean[c] + (1.0 - momentum) * mu;
            run_var[c] = momentum * run_var[c] + (1.0 - momentum) * var;
        } else {
            mu = run_mean[c];
            var = run_var[c];
        }
        const double istd = 1.0 / std::sqrt(var + eps);
        if (keep_cache) inv_std_cache[c] = istd;
        const double g = gamma.value[c], b = beta.value[c];
        for (int i = 0; i < x.n; ++i) {
            const double* p = x.sample_ptr(i) + size_t(c) * plane;
            double* q = y.sample_ptr(i) + size_t(c) * plane;
            double* xh = keep_cache ? xhat_cache.sample_ptr(i) + size_t(c) * plane : nullptr;
            for (int k = 0; k < plane; ++k) {
                const double xhat = (p[k] - mu) * istd;
                if (xh) xh[k] = xhat;
                q[k] = g * xhat + b;
            }
        }
    }
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy, bool accum_param_grads) {
    Tensor dx = Tensor::like(dy);
    const int plane = dy.plane();
    const double count = double(dy.n) * plane;
    for (int c = 0; c < ch; ++c) {
        const double g = gamma.value[c];
        const double istd = inv_std_cache[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int i = 0; i < dy.n; ++i) {
            const double* d = dy.sample_ptr(i) + size_t(c) * plane;
            const double* xh = xhat_cache.sample_ptr(i) + size_t(c) * plane;
            for (int k = 0; k < plane; ++k) {
                sum_dy += d[k];
                sum_dy_xhat += d[k] * xh[k];
            }
        }
        if (accum_param_grads) {
            gamma.grad[c] += sum_dy_xhat;
            beta.grad[c] += sum_dy;
        }
        for (int i = 0; i < dy.n; ++i) {
            const double* d = dy.sample_ptr(i) + size_t(c) * plane;
            const double* xh = xhat_cache.sample_ptr(i) + size_t(c) * plane;
            double* o = dx.sample_ptr(i) + size_t(c) * plane;
            if (trained_forward) {
                for (int k = 0; k < plane; ++k)
                    o[k] = g * istd / count * (count * d[k] - sum_dy - xh[k] * sum_dy_xhat);
            } else {
                for (int k = 0; k < plane; ++k) o[k] = g * istd * d[k];
            }
        }
    }
    return dx;
}

void BatchNorm2d::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".gamma", &gamma});
    out.push_back({prefix + ".beta", &beta});
}

void BatchNorm2d::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    out.push_back({prefix + ".run_mean", &run_mean});
    out.push_back({prefix + ".run_var", &run_var});
}

// ---------------------------------------------------------------------------
// activations / pooling / resampling

Tensor ReLU::forward(const Tensor& x, bool keep_cache) {
    Tensor y = Tensor::like(x);
    for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.0;
    if (keep_cache) y_cache = y;
    return y;
}

Tensor ReLU::backward(const Tensor& dy) const {
    Tensor dx = Tensor::like(dy);
    for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = y_cache.v[i] > 0.0 ? dy.v[i] : 0.0;
    return dx;
}

Tensor DiscActivation::forward(const Tensor& x, bool keep_cache) {
    Tensor y = Tensor::like(x);
    if (smooth) {
        for (size_t i = 0; i < x.size(); ++i) y.v[i] = std::tanh(x.v[i]);
        if (keep_cache) y_cache = y;
    } else {
        for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] > 0.0 ? x.v[i] : 0.2 * x.v[i];
        if (keep_cache) x_cache = x;
    }
    return y;
}

Tensor DiscActivation::backward(const Tensor& dy) const {
    Tensor dx = Tensor::like(dy);
    if (smooth) {
        for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = dy.v[i] * (1.0 - y_cache.v[i] * y_cache.v[i]);
    } else {
        for (size_t i = 0; i < dy.size(); ++i) dx.v[i] = x_cache.v[i] > 0.0 ? dy.v[i] : 0.2 * dy.v[i];
    }
    return dx;
}

Tensor MaxPool2x2::forward(const Tensor& x, bool keep_cache) {
    const int oh = x.h / 2, ow = x.w / 2;
    Tensor y(x.n, x.c, oh, ow);
    if (keep_cache) {
        argmax_cache.assign(y.size(), 0);
        in_h = x.h;
        in_w = x.w;
    }
    size_t oi = 0;
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oi) {
                    double best = -1e300;
                    int best_idx = 0;
                    for (int dy_ = 0; dy_ < 2; ++dy_)
                        for (int dx_ = 0; dx_ < 2; ++dx_) {
                            const int iy = oy * 2 + dy_, ix = ox * 2 + dx_;
                            const double val = x.at(i, c, iy, ix);
                            if (val > best) {
                                best = val;
                                best_idx = iy * x.w + ix;
                            }
                        }
                    y.v[oi] = best;
                    if (keep_cache) argmax_cache[oi] = best_idx;
                }
    return y;
}

Tensor MaxPool2x2::backward(const Tensor& dy) const {
    Tensor dx(dy.n, dy.c, in_h, in_w);
    size_t oi = 0;
    for (int i = 0; i < dy.n; ++i)
        for (int c = 0; c < dy.c; ++c) {
            double* plane = dx.v.data() + (size_t(i) * dx.c + c) * dx.plane();
            for (int k = 0; k < dy.plane(); ++k, ++oi) plane[argmax_cache[oi]] += dy.v[oi];
        }
    return dx;
}

Tensor upsample_nearest2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int iy = 0; iy < y.h; ++iy)
                for (int ix = 0; ix < y.w; ++ix) y.at(i, c, iy, ix) = x.at(i, c, iy / 2, ix / 2);
    return y;
}

Tensor upsample_nearest2x_backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int i = 0; i < dy.n; ++i)
        for (int c = 0; c < dy.c; ++c)
            for (int iy = 0; iy < dy.h; ++iy)
                for (int ix = 0; ix < dy.w; ++ix) dx.at(i, c, iy / 2, ix / 2) += dy.at(i, c, iy, ix);
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w) throw ContractError("concat: spatial mismatch");
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.sample_ptr(i), a.sample_ptr(i) + a.sample_size(), y.sample_ptr(i));
        std::copy(b.sample_ptr(i), b.sample_ptr(i) + b.sample_size(),
                  y.sample_ptr(i) + a.sample_size());
    }
    return y;
}

void split_channels(const Tensor& d, int ca, Tensor& da, Tensor& db) {
    da = Tensor(d.n, ca, d.h, d.w);
    db = Tensor(d.n, d.c - ca, d.h, d.w);
    for (int i = 0; i < d.n; ++i) {
        std::copy(d.sample_ptr(i), d.sample_ptr(i) + da.sample_size(), da.sample_ptr(i));
        std::copy(d.sample_ptr(i) + da.sample_size(), d.sample_ptr(i) + d.sample_size(),
                  db.sample_ptr(i));
    }
}

Tensor softmax_channels(const Tensor& z) {
    Tensor p = Tensor::like(z);
    for (int i = 0; i < z.n; ++i)
        for (int y = 0; y < z.h; ++y)
            for (int x = 0; x < z.w; ++x) {
                double mx = -1e300;
                for (int c = 0; c < z.c; ++c) mx = std::max(mx, z.at(i, c, y, x));
                double sum = 0.0;
                for (int c = 0; c < z.c; ++c) {
                    const double e = std::exp(z.at(i, c, y, x) - mx);
                    p.at(i, c, y, x) = e;
                    sum += e;
                }
                for (int c = 0; c < z.c; ++c) p.at(i, c, y, x) /= sum;
            }
    return p;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& dprobs) {
    Tensor dz = Tensor::like(probs);
    for (int i = 0; i < probs.n; ++i)
        for (int y = 0; y < probs.h; ++y)
            for (int x = 0; x < probs.w; ++x) {
                double dot_ = 0.0;
                for (int c = 0; c < probs.c; ++c) dot_ += dprobs.at(i, c, y, x) * probs.at(i, c, y, x);
                for (int c = 0; c < probs.c; ++c)
                    dz.at(i, c, y, x) = probs.at(i, c, y, x) * (dprobs.at(i, c, y, x) - dot_);
            }
    return dz;
}

} // namespace attt
