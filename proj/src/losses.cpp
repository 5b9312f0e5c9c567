#include "attt/losses.hpp"

#include <cmath>
#include <iostream>

namespace attt {

ClassWeights class_weights(const Tensor& target) {
    if (target.size() == 0) throw ContractError("class_weights: empty mask");
    ClassWeights cw;
    cw.w.assign(size_t(target.c), 0.0);
    const double n_tot = double(target.n) * target.plane();
    for (int c = 0; c < target.c; ++c) {
        double n_c = 0.0;
        for (int i = 0; i < target.n; ++i) {
            const double* p = target.sample_ptr(i) + size_t(c) * target.plane();
            for (int k = 0; k < target.plane(); ++k) n_c += p[k];
        }
        cw.w[c] = 1.0 - n_c / n_tot;
    }
    return cw;
}

LossValue weighted_cross_entropy(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "weighted_cross_entropy");
    const ClassWeights cw = class_weights(target);
    const double n_pix = double(pred.n) * pred.plane();
    double acc = 0.0;
    for (int i = 0; i < pred.n; ++i)
        for (int c = 0; c < pred.c; ++c) {
            const double* pp = pred.sample_ptr(i) + size_t(c) * pred.plane();
            const double* tp = target.sample_ptr(i) + size_t(c) * target.plane();
            const double w = cw.w[c];
            for (int k = 0; k < pred.plane(); ++k) {
                if (tp[k] != 0.0) {
                    const double p = std::max(pp[k], kProbClip);
                    acc -= w * tp[k] * std::log(p);
                }
            }
        }
    LossValue out;
    out.value = acc / n_pix;
    out.components = {{"wce", out.value}};
    return out;
}

Tensor weighted_cross_entropy_grad(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "weighted_cross_entropy");
    const ClassWeights cw = class_weights(target);
    const double n_pix = double(pred.n) * pred.plane();
    Tensor g = Tensor::like(pred);
    for (int i = 0; i < pred.n; ++i)
        for (int c = 0; c < pred.c; ++c) {
            const double* pp = pred.sample_ptr(i) + size_t(c) * pred.plane();
            const double* tp = target.sample_ptr(i) + size_t(c) * target.plane();
            double* gp = g.sample_ptr(i) + size_t(c) * g.plane();
            const double w = cw.w[c];
            for (int k = 0; k < pred.plane(); ++k) {
                if (tp[k] != 0.0 && pp[k] > kProbClip) gp[k] = -w * tp[k] / (pp[k] * n_pix);
            }
        }
    return g;
}

LossValue lsgan_discriminator_loss(const std::vector<double>& d_real,
                                   const std::vector<double>& d_fake) {
    double lr = 0.0, lf = 0.0;
    for (double d : d_real) lr += (d - 1.0) * (d - 1.0);
    for (double d : d_fake) lf += (d + 1.0) * (d + 1.0);
    lr = d_real.empty() ? 0.0 : 0.5 * lr / double(d_real.size());
    lf = d_fake.empty() ? 0.0 : 0.5 * lf / double(d_fake.size());
    LossValue out;
    out.value = lr + lf;
    out.components = {{"real", lr}, {"fake", lf}};
    return out;
}

void lsgan_discriminator_grad(const std::vector<double>& d_real, const std::vector<double>& d_fake,
                              std::vector<double>& g_real, std::vector<double>& g_fake) {
    g_real.assign(d_real.size(), 0.0);
    g_fake.assign(d_fake.size(), 0.0);
    for (size_t i = 0; i < d_real.size(); ++i) g_real[i] = (d_real[i] - 1.0) / double(d_real.size());
    for (size_t i = 0; i < d_fake.size(); ++i) g_fake[i] = (d_fake[i] + 1.0) / double(d_fake.size());
}

LossValue lsgan_generator_loss(const std::vector<double>& d_fake) {
    double l = 0.0;
    for (double d : d_fake) l += d * d;
    LossValue out;
    out.value = d_fake.empty() ? 0.0 : 0.5 * l / double(d_fake.size());
    out.components = {{"gen_adv", out.value}};
    return out;
}

std::vector<double> lsgan_generator_grad(const std::vector<double>& d_fake) {
    std::vector<double> g(d_fake.size());
    for (size_t i = 0; i < d_fake.size(); ++i) g[i] = d_fake[i] / double(d_fake.size());
    return g;
}

double dynamic_weight(double sup_loss, double adv_loss) {
    if (adv_loss == 0.0) {
        std::cerr << "[attt] warning: adversarial loss is zero, dynamic weight set to 0\n";
        return 0.0;
    }
    return 0.1 * std::fabs(sup_loss) / std::fabs(adv_loss);
}

Tensor make_interpolates(const Tensor& real, const Tensor& fake, uint64_t seed) {
    require_same_shape(real, fake, "gradient_penalty");
    Rng rng(derive_seed(seed, "gp_interp"));
    Tensor m = Tensor::like(real);
    for (int i = 0; i < real.n; ++i) {
        const double u = rng.uniform();
        const double* rp = real.sample_ptr(i);
        const double* fp = fake.sample_ptr(i);
        double* mp = m.sample_ptr(i);
        for (int k = 0; k < real.sample_size(); ++k) mp[k] = u * rp[k] + (1.0 - u) * fp[k];
    }
    return m;
}

namespace {

LossValue penalty_from_grads(const Tensor& grads, double lambda, std::vector<double>* coeffs) {
    const int n = grads.n;
    double acc = 0.0;
    if (coeffs) coeffs->assign(size_t(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* g = grads.sample_ptr(i);
        double norm2 = 0.0;
        for (int k = 0; k < grads.sample_size(); ++k) norm2 += g[k] * g[k];
        const double norm = std::sqrt(norm2);
        acc += (norm - 1.0) * (norm - 1.0);
        if (coeffs)
            (*coeffs)[i] = norm > 1e-12 ? 2.0 * lambda * (norm - 1.0) / (double(n) * norm) : 0.0;
    }
    LossValue out;
    out.value = lambda * acc / double(n);
    out.components = {{"gp", out.value}};
    return out;
}

} // namespace

LossValue gradient_penalty_value(const ScoreWithInputGrad& score_fn, const Tensor& real,
                                 const Tensor& fake, double lambda, uint64_t seed) {
    Tensor m = make_interpolates(real, fake, seed);
    std::vector<double> scores;
    Tensor grads;
    score_fn(m, scores, grads);
    return penalty_from_grads(grads, lambda, nullptr);
}

LossValue gradient_penalty(Discriminator& disc, const Tensor& real, const Tensor& fake,
                           double lambda, uint64_t seed, bool accumulate_grads) {
    Tensor m = make_interpolates(real, fake, seed);
    disc.forward(m, /*keep_cache=*/true, /*update_stats=*/false);
    std::vector<double> ones(size_t(m.n), 1.0);
    Tensor g = disc.input_gradient(ones);
    std::vector<double> coeffs;
    LossValue out = penalty_from_grads(g, lambda, &coeffs);
    if (accumulate_grads) {
        Tensor dir = Tensor::like(g);
        for (int i = 0; i < g.n; ++i) {
            const double c = coeffs[size_t(i)];
            const double* gp = g.sample_ptr(i);
            double* dp = dir.sample_ptr(i);
            for (int k = 0; k < g.sample_size(); ++k) dp[k] = c * gp[k];
        }
        disc.accumulate_input_grad_dot(m, dir, true);
    }
    return out;
}

LossValue mae_reconstruction(const Tensor& x_prime, const Tensor& x_rec) {
    require_same_shape(x_prime, x_rec, "mae_reconstruction");
    double acc = 0.0;
    for (size_t i = 0; i < x_prime.size(); ++i) acc += std::fabs(x_prime.v[i] - x_rec.v[i]);
    LossValue out;
    out.value = acc / double(x_prime.size());
    out.components = {{"mae", out.value}};
    return out;
}

Tensor mae_reconstruction_grad(const Tensor& x_prime, const Tensor& x_rec) {
    require_same_shape(x_prime, x_rec, "mae_reconstruction");
    Tensor g = Tensor::like(x_prime);
    const double n = double(x_prime.size());
    for (size_t i = 0; i < x_prime.size(); ++i) {
        const double d = x_prime.v[i] - x_rec.v[i];
        g.v[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
    }
    return g;
}

} // namespace attt
