#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "attt/nets.hpp"
#include "attt/tensor.hpp"

namespace attt {

struct LossValue {
    double value = 0.0;
    std::vector<std::pair<std::string, double>> components;

    double component(const std::string& name) const {
        for (const auto& [k, v] : components)
            if (k == name) return v;
        throw ContractError("LossValue: no component " + name);
    }
};

struct ClassWeights {
    std::vector<double> w; // w_i = 1 - n_i / n_tot
};

// Per-batch class weights from a one-hot target.
ClassWeights class_weights(const Tensor& target);

constexpr double kProbClip = 1e-7;

// L = -mean over pixels of sum_i w_i y_i log(clip(p_i)); pixel-mean reduction
// keeps the magnitude size-independent for the dynamic weight.
LossValue weighted_cross_entropy(const Tensor& pred, const Tensor& target);
// dL/dpred for the same reduction (gradient zero inside the clip region).
Tensor weighted_cross_entropy_grad(const Tensor& pred, const Tensor& target);

// Least-squares adversarial losses with labels +1 (real) and -1 (fake).
LossValue lsgan_discriminator_loss(const std::vector<double>& d_real,
                                   const std::vector<double>& d_fake);
void lsgan_discriminator_grad(const std::vector<double>& d_real, const std::vector<double>& d_fake,
                              std::vector<double>& g_real, std::vector<double>& g_fake);

// 1/2 mean[d_fake^2], minimized at the equilibrium output 0.
LossValue lsgan_generator_loss(const std::vector<double>& d_fake);
std::vector<double> lsgan_generator_grad(const std::vector<double>& d_fake);

// a = 0.1 |L_sup| / |V_adv|, a constant at the current step (no gradient
// through the ratio); zero with a warning when V_adv is zero.
double dynamic_weight(double sup_loss, double adv_loss);

// lambda * mean[(||grad_m d(m_hat)|| - 1)^2] on per-sample random
// interpolates m_hat = u*real + (1-u)*fake. Value-only variant for any
// scorer that exposes input gradients.
using ScoreWithInputGrad =
    std::function<void(const Tensor& batch, std::vector<double>& scores, Tensor& input_grads)>;
LossValue gradient_penalty_value(const ScoreWithInputGrad& score_fn, const Tensor& real,
                                 const Tensor& fake, double lambda, uint64_t seed);
// Full variant: also accumulates d/dtheta into the discriminator grads.
// Call disc.finalize_sn_grads() once after all accumulation for the step.
LossValue gradient_penalty(Discriminator& disc, const Tensor& real, const Tensor& fake,
                           double lambda, uint64_t seed, bool accumulate_grads);

Tensor make_interpolates(const Tensor& real, const Tensor& fake, uint64_t seed);

LossValue mae_reconstruction(const Tensor& x_prime, const Tensor& x_rec);
// Gradient w.r.t. the first argument; negate for the second.
Tensor mae_reconstruction_grad(const Tensor& x_prime, const Tensor& x_rec);

} // namespace attt
