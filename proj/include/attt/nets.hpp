#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "attt/layers.hpp"

namespace attt {

// Shallow residual block placed in front of the segmentor; the only part of
// the model tuned at test time. Three 3x3 conv layers of 16 kernels (the last
// maps back to one channel), Gaussian activation exp(-t^2/s^2) with a
// trainable scale after the first two, and a residual skip around the block.
class Adaptor {
public:
    Conv2d c1, c2, c3;
    Param s1, s2;

    void init(int channels, Rng& rng);
    Tensor forward(const Tensor& x, bool keep_cache);
    Tensor backward(const Tensor& dy, bool accum_param_grads);
    void collect(std::vector<ParamRef>& out, const std::string& prefix = "adaptor");
    void collect_state(std::vector<StateRef>& out, const std::string& prefix = "adaptor");
    size_t param_count() const;

private:
    Tensor t1_, g1_, t2_, g2_;
};

double gaussian_activation(double t, double s);

// UNet trunk shared by the segmentor and the causal encoder: encoder levels
// with 2x pooling, a bottleneck, and a mirrored decoder with skip concats.
// levels counts resolutions including the bottleneck (3 -> full, 1/2, 1/4).
class UNetCore {
public:
    struct Block {
        Conv2d conv1, conv2;
        BatchNorm2d bn1, bn2;
        ReLU relu1, relu2;
        Tensor forward(const Tensor& x, bool training, bool keep);
        Tensor backward(const Tensor& dy, bool accum);
        void collect(std::vector<ParamRef>& out, const std::string& prefix);
        void collect_state(std::vector<StateRef>& out, const std::string& prefix);
        void init(int in, int out, Rng& rng);
    };

    int levels = 3, base = 16, in_ch = 1;

    std::vector<Block> enc;
    std::vector<MaxPool2x2> pool;
    Block bottleneck;
    std::vector<Conv2d> up_conv;
    std::vector<BatchNorm2d> up_bn;
    std::vector<ReLU> up_relu;
    std::vector<Block> dec;

    void init(int in_channels, int levels_, int base_, Rng& rng);
    // Returns the full-resolution feature map (base channels); the bottleneck
    // activation is kept internally for an optional auxiliary head.
    Tensor forward(const Tensor& x, bool training, bool keep_cache);
    const Tensor& bottleneck_out() const { return bottleneck_out_; }
    // dbottleneck may be empty when no auxiliary head feeds back.
    Tensor backward(const Tensor& dfeat, const Tensor* dbottleneck, bool accum);
    void collect(std::vector<ParamRef>& out, const std::string& prefix);
    void collect_state(std::vector<StateRef>& out, const std::string& prefix);

private:
    std::vector<Tensor> skips_;
    std::vector<Tensor> up_out_;
    Tensor bottleneck_out_;
};

// UNet with batch normalization and a softmax head over n_classes.
class Segmentor {
public:
    UNetCore core;
    Conv2d head;
    int n_classes = 3;

    void init(int in_channels, int n_classes_, int levels, int base, Rng& rng);
    Tensor forward(const Tensor& x, bool training, bool keep_cache); // probabilities
    Tensor backward(const Tensor& dprobs, bool accum_param_grads);
    void collect(std::vector<ParamRef>& out, const std::string& prefix = "segmentor");
    void collect_state(std::vector<StateRef>& out, const std::string& prefix = "segmentor");

private:
    Tensor probs_;
};

// Mask critic: five 4x4 conv layers (widths base*{1,2,4,8,16}, stride 2 on
// the first two), spectral normalization and tanh on every conv when smooth,
// and a fully-connected scalar linear output.
class Discriminator {
public:
    static constexpr int kLayers = 5;
    Conv2d conv[kLayers];
    DiscActivation act[kLayers];
    Linear fc;
    int in_ch = 0, base = 32, in_size = 0;
    bool smooth = true;

    void init(int in_channels, int base_, int image_size, bool smooth_, Rng& rng);
    std::vector<int> layer_widths() const;

    // One score per sample. update_stats runs the SN power iteration.
    std::vector<double> forward(const Tensor& m, bool keep_cache, bool update_stats);
    // dscores -> dm; optionally accumulates parameter grads.
    Tensor backward(const std::vector<double>& dscores, bool accum_param_grads);
    // Gradient of the score w.r.t. the input for the cached forward.
    Tensor input_gradient(const std::vector<double>& dscores) const;

    // Adds d/dtheta of sum_s coeff_s * <grad_m d(m_s), dir_s> to param grads.
    // Used by the gradient penalty; requires a cached forward on m.
    void accumulate_input_grad_dot(const Tensor& m, const Tensor& dir, bool accum_param_grads);

    void finalize_sn_grads();

    void collect(std::vector<ParamRef>& out, const std::string& prefix = "disc");
    void collect_state(std::vector<StateRef>& out, const std::string& prefix = "disc");

private:
    Tensor conv_in_[kLayers];
    std::vector<double> fc_in_;
    int feat_c_ = 0, feat_h_ = 0, feat_w_ = 0;
};

// Disentangling encoder: UNet trunk with a softmax mask head plus a residual
// head read off the bottleneck (appearance code at 1/4 resolution).
class CausalEncoder {
public:
    UNetCore core;
    Conv2d mask_head;
    Conv2d resid_head;
    int n_classes = 3, residual_channels = 8;

    void init(int in_channels, int n_classes_, int levels, int base, int residual_ch, Rng& rng);
    void forward(const Tensor& x, bool training, bool keep_cache, Tensor& probs, Tensor& residual);
    Tensor backward(const Tensor& dprobs, const Tensor& dresidual, bool accum_param_grads);
    void collect(std::vector<ParamRef>& out, const std::string& prefix = "encoder");
    void collect_state(std::vector<StateRef>& out, const std::string& prefix = "encoder");

private:
    Tensor probs_;
    Tensor bneck_in_;
};

// Reconstructs the adapted image from (mask, residual).
class CausalDecoder {
public:
    Conv2d c1, c2, c3;
    ReLU r1, r2;
    int mask_ch = 3, residual_channels = 8, width = 32;
    int upsample_steps = 2; // residual sits at 1/2^steps resolution

    void init(int mask_channels, int residual_ch, int width_, int upsample_steps_, Rng& rng);
    Tensor forward(const Tensor& probs, const Tensor& residual, bool keep_cache);
    void backward(const Tensor& dimg, bool accum_param_grads, Tensor& dprobs, Tensor& dresidual);
    void collect(std::vector<ParamRef>& out, const std::string& prefix = "decoder");
    void collect_state(std::vector<StateRef>& out, const std::string& prefix = "decoder");

private:
    Tensor cat_in_;
    Tensor up1_, up2_;
};

enum class ModelKind { gan, causal };

struct NetConfig {
    int image_size = 64;
    int n_classes = 3;
    int unet_levels = 3;
    int unet_base = 16;
    int disc_base = 32;
    int adaptor_channels = 16;
    int residual_channels = 8;
    int decoder_width = 32;
    bool smooth_disc = true; // spectral norm + tanh (smoothness constraints)
    bool use_adaptor = true;
};

// The trained artifact: adaptor, segmentor (or causal encoder/decoder), and
// the discriminator that gets re-used at inference.
struct ModelBundle {
    ModelKind kind = ModelKind::gan;
    NetConfig cfg;
    uint64_t seed = 0;
    int epoch = 0;
    double val_loss = 0.0;

    Adaptor adaptor;
    Segmentor segmentor;
    CausalEncoder encoder;
    CausalDecoder decoder;
    Discriminator disc;

    // x -> x' (identity when the adaptor is ablated).
    Tensor adapt(const Tensor& x, bool keep_cache);
    Tensor adapt_backward(const Tensor& dxp, bool accum);
    // x' -> probabilities, routed through segmentor or encoder.
    Tensor segment(const Tensor& xp, bool training, bool keep_cache);
    Tensor segment_backward(const Tensor& dprobs, bool accum);

    std::vector<ParamRef> generator_params();   // adaptor + segmentor/encoder(+decoder)
    std::vector<ParamRef> adaptor_params();
    std::vector<ParamRef> segmentor_params();   // everything downstream of the adaptor
    std::vector<ParamRef> disc_params();
    std::vector<ParamRef> all_params();
    std::vector<StateRef> all_state();

    uint64_t segmentor_hash();
    uint64_t disc_hash();

private:
    Tensor enc_residual_; // residual from the last causal segment() call
public:
    const Tensor& last_residual() const { return enc_residual_; }
    Tensor reconstruct(const Tensor& probs, const Tensor& residual, bool keep_cache);
};

ModelBundle init_models(const NetConfig& cfg, ModelKind kind, uint64_t seed);

void save_bundle(const ModelBundle& bundle, const std::string& dir, const std::string& name);
ModelBundle load_bundle(const std::string& dir, const std::string& name);

} // namespace attt
