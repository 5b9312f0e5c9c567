#include "attt/nets.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace attt {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Adaptor

double gaussian_activation(double t, double s) { return std::exp(-(t * t) / (s * s)); }

void Adaptor::init(int channels, Rng& rng) {
    c1.init(1, channels, 3, 1, 1, 1, 1, 1, rng);
    c2.init(channels, channels, 3, 1, 1, 1, 1, 1, rng);
    c3.init(channels, 1, 3, 1, 1, 1, 1, 1, rng);
    s1.resize(1);
    s2.resize(1);
    // scales randomly initialised, re-optimised at test time
    s1.value[0] = rng.uniform(0.5, 1.5);
    s2.value[0] = rng.uniform(0.5, 1.5);
}

Tensor Adaptor::forward(const Tensor& x, bool keep_cache) {
    t1_ = c1.forward(x, keep_cache, false);
    g1_ = Tensor::like(t1_);
    const double a1 = s1.value[0];
    for (size_t i = 0; i < t1_.size(); ++i) g1_.v[i] = gaussian_activation(t1_.v[i], a1);
    t2_ = c2.forward(g1_, keep_cache, false);
    g2_ = Tensor::like(t2_);
    const double a2 = s2.value[0];
    for (size_t i = 0; i < t2_.size(); ++i) g2_.v[i] = gaussian_activation(t2_.v[i], a2);
    Tensor r = c3.forward(g2_, keep_cache, false);
    Tensor y = Tensor::like(x);
    for (size_t i = 0; i < x.size(); ++i) y.v[i] = x.v[i] + r.v[i];
    return y;
}

Tensor Adaptor::backward(const Tensor& dy, bool accum) {
    Tensor dg2 = c3.backward(dy, accum);
    Tensor dt2 = Tensor::like(dg2);
    const double a2 = s2.value[0];
    double gs2 = 0.0;
    for (size_t i = 0; i < dg2.size(); ++i) {
        const double t = t2_.v[i], g = g2_.v[i];
        dt2.v[i] = dg2.v[i] * (-2.0 * t / (a2 * a2)) * g;
        gs2 += dg2.v[i] * (2.0 * t * t / (a2 * a2 * a2)) * g;
    }
    if (accum) s2.grad[0] += gs2;
    Tensor dg1 = c2.backward(dt2, accum);
    Tensor dt1 = Tensor::like(dg1);
    const double a1 = s1.value[0];
    double gs1 = 0.0;
    for (size_t i = 0; i < dg1.size(); ++i) {
        const double t = t1_.v[i], g = g1_.v[i];
        dt1.v[i] = dg1.v[i] * (-2.0 * t / (a1 * a1)) * g;
        gs1 += dg1.v[i] * (2.0 * t * t / (a1 * a1 * a1)) * g;
    }
    if (accum) s1.grad[0] += gs1;
    Tensor dx = c1.backward(dt1, accum);
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += dy.v[i];
    return dx;
}

void Adaptor::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    c1.collect(out, prefix + ".c1");
    c2.collect(out, prefix + ".c2");
    c3.collect(out, prefix + ".c3");
    out.push_back({prefix + ".s1", &s1});
    out.push_back({prefix + ".s2", &s2});
}

void Adaptor::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    (void)out;
    (void)prefix;
}

size_t Adaptor::param_count() const {
    return c1.weight.size() + c1.bias.size() + c2.weight.size() + c2.bias.size() + c3.weight.size() +
           c3.bias.size() + 2;
}

// ---------------------------------------------------------------------------
// UNetCore

void UNetCore::Block::init(int in, int out, Rng& rng) {
    conv1.init(in, out, 3, 1, 1, 1, 1, 1, rng);
    conv2.init(out, out, 3, 1, 1, 1, 1, 1, rng);
    bn1.init(out);
    bn2.init(out);
}

Tensor UNetCore::Block::forward(const Tensor& x, bool training, bool keep) {
    Tensor h = conv1.forward(x, keep, false);
    h = bn1.forward(h, training, keep);
    h = relu1.forward(h, keep);
    h = conv2.forward(h, keep, false);
    h = bn2.forward(h, training, keep);
    return relu2.forward(h, keep);
}

Tensor UNetCore::Block::backward(const Tensor& dy, bool accum) {
    Tensor d = relu2.backward(dy);
    d = bn2.backward(d, accum);
    d = conv2.backward(d, accum);
    d = relu1.backward(d);
    d = bn1.backward(d, accum);
    return conv1.backward(d, accum);
}

void UNetCore::Block::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    conv1.collect(out, prefix + ".conv1");
    bn1.collect(out, prefix + ".bn1");
    conv2.collect(out, prefix + ".conv2");
    bn2.collect(out, prefix + ".bn2");
}

void UNetCore::Block::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    bn1.collect_state(out, prefix + ".bn1");
    bn2.collect_state(out, prefix + ".bn2");
}

void UNetCore::init(int in_channels, int levels_, int base_, Rng& rng) {
    levels = levels_;
    base = base_;
    in_ch = in_channels;
    if (levels < 2) throw ConfigError("unet: levels must be >= 2");
    enc.resize(levels - 1);
    pool.resize(levels - 1);
    up_conv.resize(levels - 1);
    up_bn.resize(levels - 1);
    up_relu.resize(levels - 1);
    dec.resize(levels - 1);
    for (int l = 0; l < levels - 1; ++l) {
        const int cin = l == 0 ? in_channels : base << (l - 1);
        enc[l].init(cin, base << l, rng);
    }
    bottleneck.init(base << (levels - 2), base << (levels - 1), rng);
    for (int l = 0; l < levels - 1; ++l) {
        up_conv[l].init(base << (l + 1), base << l, 3, 1, 1, 1, 1, 1, rng);
        up_bn[l].init(base << l);
        dec[l].init((base << l) * 2, base << l, rng);
    }
}

Tensor UNetCore::forward(const Tensor& x, bool training, bool keep_cache) {
    skips_.assign(levels - 1, Tensor());
    Tensor cur = x;
    for (int l = 0; l < levels - 1; ++l) {
        cur = enc[l].forward(cur, training, keep_cache);
        skips_[l] = cur;
        cur = pool[l].forward(cur, keep_cache);
    }
    cur = bottleneck.forward(cur, training, keep_cache);
    bottleneck_out_ = cur;
    for (int l = levels - 2; l >= 0; --l) {
        Tensor u = upsample_nearest2x(cur);
        u = up_conv[l].forward(u, keep_cache, false);
        u = up_bn[l].forward(u, training, keep_cache);
        u = up_relu[l].forward(u, keep_cache);
        Tensor cat = concat_channels(skips_[l], u);
        cur = dec[l].forward(cat, training, keep_cache);
    }
    return cur;
}

Tensor UNetCore::backward(const Tensor& dfeat, const Tensor* dbottleneck, bool accum) {
    std::vector<Tensor> dskip(levels - 1);
    Tensor d = dfeat;
    for (int l = 0; l < levels - 1; ++l) {
        Tensor dcat = dec[l].backward(d, accum);
        Tensor da, du;
        split_channels(dcat, skips_[l].c, da, du);
        dskip[l] = da;
        du = up_relu[l].backward(du);
        du = up_bn[l].backward(du, accum);
        du = up_conv[l].backward(du, accum);
        d = upsample_nearest2x_backward(du);
    }
    if (dbottleneck) {
        for (size_t i = 0; i < d.size(); ++i) d.v[i] += dbottleneck->v[i];
    }
    d = bottleneck.backward(d, accum);
    for (int l = levels - 2; l >= 0; --l) {
        d = pool[l].backward(d);
        for (size_t i = 0; i < d.size(); ++i) d.v[i] += dskip[l].v[i];
        d = enc[l].backward(d, accum);
    }
    return d;
}

void UNetCore::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    for (int l = 0; l < levels - 1; ++l) enc[l].collect(out, prefix + ".enc" + std::to_string(l));
    bottleneck.collect(out, prefix + ".bneck");
    for (int l = 0; l < levels - 1; ++l) {
        up_conv[l].collect(out, prefix + ".up" + std::to_string(l));
        up_bn[l].collect(out, prefix + ".upbn" + std::to_string(l));
        dec[l].collect(out, prefix + ".dec" + std::to_string(l));
    }
}

void UNetCore::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    for (int l = 0; l < levels - 1; ++l) enc[l].collect_state(out, prefix + ".enc" + std::to_string(l));
    bottleneck.collect_state(out, prefix + ".bneck");
    for (int l = 0; l < levels - 1; ++l) {
        up_bn[l].collect_state(out, prefix + ".upbn" + std::to_string(l));
        dec[l].collect_state(out, prefix + ".dec" + std::to_string(l));
    }
}

// ---------------------------------------------------------------------------
// Segmentor

void Segmentor::init(int in_channels, int n_classes_, int levels, int base, Rng& rng) {
    n_classes = n_classes_;
    core.init(in_channels, levels, base, rng);
    head.init(base, n_classes, 1, 1, 0, 0, 0, 0, rng);
}

Tensor Segmentor::forward(const Tensor& x, bool training, bool keep_cache) {
    Tensor feat = core.forward(x, training, keep_cache);
    Tensor logits = head.forward(feat, keep_cache, false);
    probs_ = softmax_channels(logits);
    return probs_;
}

Tensor Segmentor::backward(const Tensor& dprobs, bool accum) {
    Tensor dlogits = softmax_backward(probs_, dprobs);
    Tensor dfeat = head.backward(dlogits, accum);
    return core.backward(dfeat, nullptr, accum);
}

void Segmentor::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    core.collect(out, prefix + ".core");
    head.collect(out, prefix + ".head");
}

void Segmentor::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    core.collect_state(out, prefix + ".core");
}

// ---------------------------------------------------------------------------
// Discriminator

void Discriminator::init(int in_channels, int base_, int image_size, bool smooth_, Rng& rng) {
    in_ch = in_channels;
    base = base_;
    in_size = image_size;
    smooth = smooth_;
    if (image_size % 4 != 0) throw ConfigError("discriminator: image size must be divisible by 4");
    int c = in_channels;
    for (int l = 0; l < kLayers; ++l) {
        const int oc = base << l;
        if (l < 2)
            conv[l].init(c, oc, 4, 2, 1, 1, 1, 1, rng);
        else
            conv[l].init(c, oc, 4, 1, 1, 2, 1, 2, rng);
        conv[l].sn_enabled = smooth;
        act[l].smooth = smooth;
        c = oc;
    }
    feat_c_ = base << (kLayers - 1);
    feat_h_ = image_size / 4;
    feat_w_ = image_size / 4;
    fc.init(feat_c_ * feat_h_ * feat_w_, 1, rng);
    fc.sn_enabled = smooth;
}

std::vector<int> Discriminator::layer_widths() const {
    std::vector<int> ws;
    for (int l = 0; l < kLayers; ++l) ws.push_back(base << l);
    return ws;
}

std::vector<double> Discriminator::forward(const Tensor& m, bool keep_cache, bool update_stats) {
    if (m.c != in_ch || m.h != in_size || m.w != in_size)
        throw ContractError("discriminator: input shape mismatch");
    Tensor cur = m;
    for (int l = 0; l < kLayers; ++l) {
        if (keep_cache) conv_in_[l] = cur;
        cur = conv[l].forward(cur, keep_cache, update_stats);
        cur = act[l].forward(cur, true); // activation cache always needed for grads
    }
    fc_in_.assign(cur.v.begin(), cur.v.end());
    return fc.forward(fc_in_, m.n, keep_cache, update_stats);
}

Tensor Discriminator::backward(const std::vector<double>& dscores, bool accum) {
    std::vector<double> dflat =
        accum ? fc.backward(dscores, true) : fc.backward_data(dscores, int(dscores.size()));
    Tensor d(int(dscores.size()), feat_c_, feat_h_, feat_w_);
    d.v = dflat;
    for (int l = kLayers - 1; l >= 0; --l) {
        d = act[l].backward(d);
        d = accum ? conv[l].backward(d, true)
                  : conv[l].backward_data(d, conv_in_[l].h, conv_in_[l].w);
    }
    return d;
}

Tensor Discriminator::input_gradient(const std::vector<double>& dscores) const {
    std::vector<double> dflat = fc.backward_data(dscores, int(dscores.size()));
    Tensor d(int(dscores.size()), feat_c_, feat_h_, feat_w_);
    d.v = dflat;
    for (int l = kLayers - 1; l >= 0; --l) {
        d = act[l].backward(d);
        d = conv[l].backward_data(d, conv_in_[l].h, conv_in_[l].w);
    }
    return d;
}

void Discriminator::accumulate_input_grad_dot(const Tensor& m, const Tensor& dir, bool accum) {
    if (!accum) return;
    const int n = m.n;
    // tangent pass: push dir through the linearized network
    Tensor tcur = dir;
    Tensor tan_conv_in[kLayers]; // tangent inputs to each conv
    Tensor tan_pre[kLayers];     // tangent pre-activations
    for (int l = 0; l < kLayers; ++l) {
        tan_conv_in[l] = tcur;
        Tensor tz = conv[l].forward_nobias(tcur);
        tan_pre[l] = tz;
        Tensor ta = Tensor::like(tz);
        if (smooth) {
            const Tensor& a = act[l].y_cache;
            for (size_t i = 0; i < tz.size(); ++i) ta.v[i] = (1.0 - a.v[i] * a.v[i]) * tz.v[i];
        } else {
            const Tensor& x = act[l].x_cache;
            for (size_t i = 0; i < tz.size(); ++i) ta.v[i] = (x.v[i] > 0.0 ? 1.0 : 0.2) * tz.v[i];
        }
        tcur = ta;
    }
    std::vector<double> tan_fc_in(tcur.v.begin(), tcur.v.end());

    // augmented backward: tangent adjoint starts at one per sample, primal at zero
    std::vector<double> t_adj(size_t(n), 1.0);
    std::vector<double> p_adj(size_t(n), 0.0);
    fc.accumulate_weight_grad(t_adj, tan_fc_in, n, /*with_bias=*/false);
    // p_adj is zero at the top, so it contributes nothing at the fc layer
    std::vector<double> t_flat = fc.backward_data(t_adj, n);
    std::vector<double> p_flat = fc.backward_data(p_adj, n);
    Tensor t_cur(n, feat_c_, feat_h_, feat_w_);
    t_cur.v = t_flat;
    Tensor p_cur(n, feat_c_, feat_h_, feat_w_);
    p_cur.v = p_flat;

    for (int l = kLayers - 1; l >= 0; --l) {
        Tensor t_z = Tensor::like(t_cur);
        Tensor p_z = Tensor::like(p_cur);
        if (smooth) {
            const Tensor& a = act[l].y_cache;
            const Tensor& tz = tan_pre[l];
            for (size_t i = 0; i < t_cur.size(); ++i) {
                const double one_m_a2 = 1.0 - a.v[i] * a.v[i];
                t_z.v[i] = one_m_a2 * t_cur.v[i];
                p_z.v[i] = one_m_a2 * p_cur.v[i] - 2.0 * a.v[i] * one_m_a2 * tz.v[i] * t_cur.v[i];
            }
        } else {
            const Tensor& x = act[l].x_cache;
            for (size_t i = 0; i < t_cur.size(); ++i) {
                const double slope = x.v[i] > 0.0 ? 1.0 : 0.2;
                t_z.v[i] = slope * t_cur.v[i];
                p_z.v[i] = slope * p_cur.v[i];
            }
        }
        conv[l].accumulate_weight_grad(t_z, tan_conv_in[l], /*with_bias=*/false);
        conv[l].accumulate_weight_grad(p_z, conv_in_[l], /*with_bias=*/true);
        t_cur = conv[l].backward_data(t_z, conv_in_[l].h, conv_in_[l].w);
        p_cur = conv[l].backward_data(p_z, conv_in_[l].h, conv_in_[l].w);
    }
    (void)m;
}

void Discriminator::finalize_sn_grads() {
    for (int l = 0; l < kLayers; ++l) conv[l].finalize_sn_grad();
    fc.finalize_sn_grad();
}

void Discriminator::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    for (int l = 0; l < kLayers; ++l) conv[l].collect(out, prefix + ".conv" + std::to_string(l));
    fc.collect(out, prefix + ".fc");
}

void Discriminator::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    for (int l = 0; l < kLayers; ++l) conv[l].collect_state(out, prefix + ".conv" + std::to_string(l));
    fc.collect_state(out, prefix + ".fc");
}

// ---------------------------------------------------------------------------
// CausalEncoder / CausalDecoder

void CausalEncoder::init(int in_channels, int n_classes_, int levels, int base, int residual_ch,
                         Rng& rng) {
    n_classes = n_classes_;
    residual_channels = residual_ch;
    core.init(in_channels, levels, base, rng);
    mask_head.init(base, n_classes, 1, 1, 0, 0, 0, 0, rng);
    resid_head.init(base << (levels - 1), residual_ch, 3, 1, 1, 1, 1, 1, rng);
}

void CausalEncoder::forward(const Tensor& x, bool training, bool keep_cache, Tensor& probs,
                            Tensor& residual) {
    Tensor feat = core.forward(x, training, keep_cache);
    Tensor logits = mask_head.forward(feat, keep_cache, false);
    probs_ = softmax_channels(logits);
    probs = probs_;
    bneck_in_ = core.bottleneck_out();
    residual = resid_head.forward(bneck_in_, keep_cache, false);
}

Tensor CausalEncoder::backward(const Tensor& dprobs, const Tensor& dresidual, bool accum) {
    Tensor dlogits = softmax_backward(probs_, dprobs);
    Tensor dfeat = mask_head.backward(dlogits, accum);
    if (dresidual.size() > 0) {
        Tensor dbneck = resid_head.backward(dresidual, accum);
        return core.backward(dfeat, &dbneck, accum);
    }
    return core.backward(dfeat, nullptr, accum);
}

void CausalEncoder::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    core.collect(out, prefix + ".core");
    mask_head.collect(out, prefix + ".mask_head");
    resid_head.collect(out, prefix + ".resid_head");
}

void CausalEncoder::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    core.collect_state(out, prefix + ".core");
}

void CausalDecoder::init(int mask_channels, int residual_ch, int width_, int upsample_steps_,
                         Rng& rng) {
    mask_ch = mask_channels;
    residual_channels = residual_ch;
    width = width_;
    upsample_steps = upsample_steps_;
    c1.init(mask_channels + residual_ch, width, 3, 1, 1, 1, 1, 1, rng);
    c2.init(width, width, 3, 1, 1, 1, 1, 1, rng);
    c3.init(width, 1, 3, 1, 1, 1, 1, 1, rng);
}

Tensor CausalDecoder::forward(const Tensor& probs, const Tensor& residual, bool keep_cache) {
    Tensor up = residual;
    for (int i = 0; i < upsample_steps; ++i) up = upsample_nearest2x(up);
    cat_in_ = concat_channels(probs, up);
    Tensor h = c1.forward(cat_in_, keep_cache, false);
    h = r1.forward(h, keep_cache);
    h = c2.forward(h, keep_cache, false);
    h = r2.forward(h, keep_cache);
    return c3.forward(h, keep_cache, false);
}

void CausalDecoder::backward(const Tensor& dimg, bool accum, Tensor& dprobs, Tensor& dresidual) {
    Tensor d = c3.backward(dimg, accum);
    d = r2.backward(d);
    d = c2.backward(d, accum);
    d = r1.backward(d);
    Tensor dcat = c1.backward(d, accum);
    Tensor dup;
    split_channels(dcat, mask_ch, dprobs, dup);
    dresidual = dup;
    for (int i = 0; i < upsample_steps; ++i) dresidual = upsample_nearest2x_backward(dresidual);
}

void CausalDecoder::collect(std::vector<ParamRef>& out, const std::string& prefix) {
    c1.collect(out, prefix + ".c1");
    c2.collect(out, prefix + ".c2");
    c3.collect(out, prefix + ".c3");
}

void CausalDecoder::collect_state(std::vector<StateRef>& out, const std::string& prefix) {
    (void)out;
    (void)prefix;
}

// ---------------------------------------------------------------------------
// ModelBundle

Tensor ModelBundle::adapt(const Tensor& x, bool keep_cache) {
    return cfg.use_adaptor ? adaptor.forward(x, keep_cache) : x;
}

Tensor ModelBundle::adapt_backward(const Tensor& dxp, bool accum) {
    return cfg.use_adaptor ? adaptor.backward(dxp, accum) : dxp;
}

Tensor ModelBundle::segment(const Tensor& xp, bool training, bool keep_cache) {
    if (kind == ModelKind::gan) return segmentor.forward(xp, training, keep_cache);
    Tensor probs;
    encoder.forward(xp, training, keep_cache, probs, enc_residual_);
    return probs;
}

Tensor ModelBundle::segment_backward(const Tensor& dprobs, bool accum) {
    if (kind == ModelKind::gan) return segmentor.backward(dprobs, accum);
    return encoder.backward(dprobs, Tensor(), accum);
}

Tensor ModelBundle::reconstruct(const Tensor& probs, const Tensor& residual, bool keep_cache) {
    return decoder.forward(probs, residual, keep_cache);
}

std::vector<ParamRef> ModelBundle::adaptor_params() {
    std::vector<ParamRef> out;
    if (cfg.use_adaptor) adaptor.collect(out);
    return out;
}

std::vector<ParamRef> ModelBundle::segmentor_params() {
    std::vector<ParamRef> out;
    if (kind == ModelKind::gan) {
        segmentor.collect(out);
    } else {
        encoder.collect(out);
        decoder.collect(out);
    }
    return out;
}

std::vector<ParamRef> ModelBundle::generator_params() {
    std::vector<ParamRef> out = adaptor_params();
    for (auto& p : segmentor_params()) out.push_back(p);
    return out;
}

std::vector<ParamRef> ModelBundle::disc_params() {
    std::vector<ParamRef> out;
    disc.collect(out);
    return out;
}

std::vector<ParamRef> ModelBundle::all_params() {
    std::vector<ParamRef> out;
    adaptor.collect(out);
    if (kind == ModelKind::gan) {
        segmentor.collect(out);
    } else {
        encoder.collect(out);
        decoder.collect(out);
    }
    disc.collect(out);
    return out;
}

std::vector<StateRef> ModelBundle::all_state() {
    std::vector<StateRef> out;
    if (kind == ModelKind::gan) {
        segmentor.collect_state(out);
    } else {
        encoder.collect_state(out);
    }
    disc.collect_state(out);
    return out;
}

uint64_t ModelBundle::segmentor_hash() { return params_hash(segmentor_params()); }
uint64_t ModelBundle::disc_hash() { return params_hash(disc_params()); }

ModelBundle init_models(const NetConfig& cfg, ModelKind kind, uint64_t seed) {
    if (cfg.n_classes < 2) throw ConfigError("init_models: need at least 2 classes");
    if (cfg.image_size < 8) throw ConfigError("init_models: image size too small");
    const int down = 1 << (cfg.unet_levels - 1);
    if (cfg.image_size % down != 0)
        throw ConfigError("init_models: image size not divisible by unet downsampling");
    if (cfg.image_size % 4 != 0)
        throw ConfigError("init_models: image size must be divisible by 4");
    ModelBundle b;
    b.kind = kind;
    b.cfg = cfg;
    b.seed = seed;
    {
        Rng rng(derive_seed(seed, "adaptor"));
        b.adaptor.init(cfg.adaptor_channels, rng);
    }
    if (kind == ModelKind::gan) {
        Rng rng(derive_seed(seed, "segmentor"));
        b.segmentor.init(1, cfg.n_classes, cfg.unet_levels, cfg.unet_base, rng);
    } else {
        Rng rng_e(derive_seed(seed, "encoder"));
        b.encoder.init(1, cfg.n_classes, cfg.unet_levels, cfg.unet_base, cfg.residual_channels, rng_e);
        Rng rng_d(derive_seed(seed, "decoder"));
        b.decoder.init(cfg.n_classes, cfg.residual_channels, cfg.decoder_width,
                       cfg.unet_levels - 1, rng_d);
    }
    {
        Rng rng(derive_seed(seed, "discriminator"));
        b.disc.init(cfg.n_classes, cfg.disc_base, cfg.image_size, cfg.smooth_disc, rng);
    }
    return b;
}

// ---------------------------------------------------------------------------
// checkpoints: binary parameter blob + JSON manifest

namespace {

void write_u32(std::ofstream& f, uint32_t x) { f.write(reinterpret_cast<const char*>(&x), 4); }
void write_u64(std::ofstream& f, uint64_t x) { f.write(reinterpret_cast<const char*>(&x), 8); }
uint32_t read_u32(std::ifstream& f) {
    uint32_t x = 0;
    f.read(reinterpret_cast<char*>(&x), 4);
    return x;
}
uint64_t read_u64(std::ifstream& f) {
    uint64_t x = 0;
    f.read(reinterpret_cast<char*>(&x), 8);
    return x;
}

void write_entry(std::ofstream& f, const std::string& name, const std::vector<double>& v) {
    write_u32(f, uint32_t(name.size()));
    f.write(name.data(), std::streamsize(name.size()));
    write_u64(f, v.size());
    f.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(double)));
}

} // namespace

void save_bundle(const ModelBundle& bundle, const std::string& dir, const std::string& name) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    ModelBundle& b = const_cast<ModelBundle&>(bundle); // collect() is non-const only
    const std::string bin_path = dir + "/" + name + ".bin";
    std::ofstream f(bin_path, std::ios::binary);
    if (!f) throw ContractError("save_bundle: cannot open " + bin_path);
    f.write("ATTTBNDL", 8);
    write_u32(f, 1);
    auto params = b.all_params();
    auto state = b.all_state();
    write_u64(f, params.size() + state.size());
    for (auto& p : params) write_entry(f, p.name, p.p->value);
    for (auto& s : state) write_entry(f, s.name, *s.s);
    f.close();

    json manifest;
    manifest["format_version"] = 1;
    manifest["model"] = bundle.kind == ModelKind::gan ? "gan" : "causal";
    manifest["seed"] = bundle.seed;
    manifest["epoch"] = bundle.epoch;
    manifest["val_loss"] = bundle.val_loss;
    manifest["params_file"] = name + ".bin";
    json arch;
    arch["image_size"] = bundle.cfg.image_size;
    arch["n_classes"] = bundle.cfg.n_classes;
    arch["unet_levels"] = bundle.cfg.unet_levels;
    arch["unet_base"] = bundle.cfg.unet_base;
    arch["disc_base"] = bundle.cfg.disc_base;
    arch["adaptor_channels"] = bundle.cfg.adaptor_channels;
    arch["residual_channels"] = bundle.cfg.residual_channels;
    arch["decoder_width"] = bundle.cfg.decoder_width;
    arch["smooth_disc"] = bundle.cfg.smooth_disc;
    arch["use_adaptor"] = bundle.cfg.use_adaptor;
    manifest["arch"] = arch;
    std::ofstream mf(dir + "/" + name + ".json");
    mf << manifest.dump(2) << "\n";
}

ModelBundle load_bundle(const std::string& dir, const std::string& name) {
    const std::string man_path = dir + "/" + name + ".json";
    std::ifstream mf(man_path);
    if (!mf) throw ContractError("load_bundle: missing manifest " + man_path);
    json manifest = json::parse(mf);
    NetConfig cfg;
    const json& arch = manifest.at("arch");
    cfg.image_size = arch.at("image_size");
    cfg.n_classes = arch.at("n_classes");
    cfg.unet_levels = arch.at("unet_levels");
    cfg.unet_base = arch.at("unet_base");
    cfg.disc_base = arch.at("disc_base");
    cfg.adaptor_channels = arch.at("adaptor_channels");
    cfg.residual_channels = arch.at("residual_channels");
    cfg.decoder_width = arch.at("decoder_width");
    cfg.smooth_disc = arch.at("smooth_disc");
    cfg.use_adaptor = arch.at("use_adaptor");
    const ModelKind kind =
        manifest.at("model").get<std::string>() == "causal" ? ModelKind::causal : ModelKind::gan;
    ModelBundle b = init_models(cfg, kind, manifest.at("seed").get<uint64_t>());
    b.epoch = manifest.at("epoch");
    b.val_loss = manifest.at("val_loss");

    const std::string bin_path = dir + "/" + manifest.at("params_file").get<std::string>();
    std::ifstream f(bin_path, std::ios::binary);
    if (!f) throw ContractError("load_bundle: missing params file " + bin_path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, "ATTTBNDL", 8) != 0) throw ContractError("load_bundle: bad magic");
    if (read_u32(f) != 1) throw ContractError("load_bundle: unsupported version");
    const uint64_t count = read_u64(f);

    auto params = b.all_params();
    auto state = b.all_state();
    std::vector<std::pair<std::string, std::vector<double>*>> slots;
    for (auto& p : params) slots.emplace_back(p.name, &p.p->value);
    for (auto& s : state) slots.emplace_back(s.name, s.s);

    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(f);
        std::string nm(name_len, '\0');
        f.read(nm.data(), name_len);
        const uint64_t n = read_u64(f);
        std::vector<double> vals(n);
        f.read(reinterpret_cast<char*>(vals.data()), std::streamsize(n * sizeof(double)));
        bool found = false;
        for (auto& [sn, slot] : slots) {
            if (sn == nm) {
                if (slot->size() != vals.size() && !slot->empty())
                    throw ContractError("load_bundle: size mismatch for " + nm);
                *slot = std::move(vals);
                found = true;
                break;
            }
        }
        if (!found) throw ContractError("load_bundle: unknown entry " + nm);
    }
    return b;
}

} // namespace attt
