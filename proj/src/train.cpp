#include "attt/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace attt {

bool should_stop(const std::vector<double>& val_history, int patience) {
    if (patience < 1) throw ConfigError("should_stop: patience must be >= 1");
    if (val_history.empty()) throw ContractError("should_stop: empty history");
    size_t last_improve = 0;
    double best = val_history[0];
    for (size_t i = 1; i < val_history.size(); ++i) {
        if (val_history[i] < best) {
            best = val_history[i];
            last_improve = i;
        }
    }
    return val_history.size() - 1 - last_improve >= size_t(patience);
}

void write_history_csv(const TrainHistory& h, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw ContractError("write_history_csv: cannot open " + path);
    f << "epoch,split,loss_name,value\n";
    char buf[64];
    auto row = [&](int e, const char* split, const char* name, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        f << e << ',' << split << ',' << name << ',' << buf << '\n';
    };
    for (const auto& r : h.epochs) {
        row(r.epoch, "train", "sup", r.train_sup);
        row(r.epoch, "val", "sup", r.val_sup);
        row(r.epoch, "train", "disc_real", r.train_disc_real);
        row(r.epoch, "train", "disc_fake", r.train_disc_fake);
        row(r.epoch, "val", "disc_real", r.val_disc_real);
        row(r.epoch, "val", "disc_fake", r.val_disc_fake);
        row(r.epoch, "train", "gen_adv", r.gen_adv);
        row(r.epoch, "train", "dyn_weight", r.dyn_weight);
        row(r.epoch, "val", "recon", r.val_recon);
    }
}

TrainHistory read_history_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ContractError("read_history_csv: cannot open " + path);
    TrainHistory h;
    std::string line;
    std::getline(f, line); // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string epoch_s, split, name, value_s;
        std::getline(ss, epoch_s, ',');
        std::getline(ss, split, ',');
        std::getline(ss, name, ',');
        std::getline(ss, value_s, ',');
        const int epoch = std::stoi(epoch_s);
        const double value = std::stod(value_s);
        if (h.epochs.empty() || h.epochs.back().epoch != epoch) {
            EpochRecord r;
            r.epoch = epoch;
            h.epochs.push_back(r);
        }
        EpochRecord& r = h.epochs.back();
        if (split == "train" && name == "sup") r.train_sup = value;
        else if (split == "val" && name == "sup") r.val_sup = value;
        else if (split == "train" && name == "disc_real") r.train_disc_real = value;
        else if (split == "train" && name == "disc_fake") r.train_disc_fake = value;
        else if (split == "val" && name == "disc_real") r.val_disc_real = value;
        else if (split == "val" && name == "disc_fake") r.val_disc_fake = value;
        else if (split == "train" && name == "gen_adv") r.gen_adv = value;
        else if (split == "train" && name == "dyn_weight") r.dyn_weight = value;
        else if (split == "val" && name == "recon") r.val_recon = value;
    }
    return h;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(ModelBundle& bundle, const SplitResult& split, const TrainConfig& cfg)
    : bundle_(bundle), split_(split), cfg_(cfg), rng_(derive_seed(cfg.seed, "trainer")) {
    cfg_.validate();
    gen_opt_.lr = cfg_.learning_rate;
    disc_opt_.lr = cfg_.learning_rate;
    dec_opt_.lr = cfg_.learning_rate;
    bundle_.cfg.use_adaptor = cfg_.use_adaptor;
    build_pools();
}

void Trainer::build_pools() {
    for (const auto& vol : split_.train) {
        const bool labelled = split_.is_labelled(vol.patient_id);
        for (const auto& sl : vol.slices) {
            if (labelled && sl.mask) {
                lab_images_.push_back(&sl.image.pix);
                lab_masks_.push_back(&*sl.mask);
            } else {
                unlab_images_.push_back(&sl.image.pix);
                if (sl.mask) unpaired_masks_.push_back(&*sl.mask);
            }
        }
    }
    if (lab_images_.empty()) throw ContractError("Trainer: no labelled training slices");
    if (unlab_images_.empty() || unpaired_masks_.empty())
        throw ContractError("Trainer: adversarial pools are empty");
    all_images_ = lab_images_;
    all_images_.insert(all_images_.end(), unlab_images_.begin(), unlab_images_.end());
    img_order_.resize(all_images_.size());
    for (size_t i = 0; i < img_order_.size(); ++i) img_order_[i] = i;
    lab_order_.resize(lab_images_.size());
    unlab_order_.resize(unlab_images_.size());
    mask_order_.resize(unpaired_masks_.size());
    for (size_t i = 0; i < lab_order_.size(); ++i) lab_order_[i] = i;
    for (size_t i = 0; i < unlab_order_.size(); ++i) unlab_order_[i] = i;
    for (size_t i = 0; i < mask_order_.size(); ++i) mask_order_[i] = i;
}

Tensor Trainer::gather(const std::vector<const Tensor*>& pool, std::vector<size_t>& order,
                       size_t& cursor, int count) {
    std::vector<Tensor> batch;
    batch.reserve(size_t(count));
    for (int i = 0; i < count; ++i) {
        if (cursor >= order.size()) {
            rng_.shuffle(order);
            cursor = 0;
        }
        batch.push_back(*pool[order[cursor++]]);
    }
    return stack(batch);
}

Tensor Trainer::next_labelled_batch(Tensor& targets) {
    const int count = std::min<int>(cfg_.batch_size, int(lab_images_.size()));
    std::vector<Tensor> xs, ys;
    for (int i = 0; i < count; ++i) {
        if (lab_cursor_ >= lab_order_.size()) {
            rng_.shuffle(lab_order_);
            lab_cursor_ = 0;
        }
        const size_t idx = lab_order_[lab_cursor_++];
        xs.push_back(*lab_images_[idx]);
        ys.push_back(*lab_masks_[idx]);
    }
    targets = stack(ys);
    return stack(xs);
}

Tensor Trainer::next_unlabelled_batch() {
    return gather(unlab_images_, unlab_order_, unlab_cursor_, cfg_.batch_size);
}

Tensor Trainer::next_mask_batch() {
    return gather(unpaired_masks_, mask_order_, mask_cursor_, cfg_.batch_size);
}

Tensor Trainer::next_image_batch() {
    return gather(all_images_, img_order_, img_cursor_, cfg_.batch_size);
}

LossValue Trainer::step_supervised(const Tensor& images, const Tensor& targets) {
    if (images.n == 0) throw ContractError("step_supervised: empty batch");
    Tensor xp = bundle_.adapt(images, true);
    Tensor probs = bundle_.segment(xp, /*training=*/true, /*keep_cache=*/true);
    LossValue loss = weighted_cross_entropy(probs, targets);
    auto gen_params = bundle_.generator_params();
    zero_grads(gen_params);
    Tensor dprobs = weighted_cross_entropy_grad(probs, targets);
    Tensor dxp = bundle_.segment_backward(dprobs, true);
    bundle_.adapt_backward(dxp, true);
    gen_opt_.step(gen_params);
    last_sup_loss_ = loss.value;
    return loss;
}

Tensor Trainer::make_fake_batch(const Tensor& preds, const Tensor& corrupted) {
    // fake anchors: first k slots carry corrupted real masks, the rest
    // gradient-detached predictions
    const int n = corrupted.n > 0 ? corrupted.n : preds.n;
    const int k = cfg_.use_fake_anchors ? int(std::lround(cfg_.corrupted_fraction * n)) : 0;
    Tensor fake(n, preds.c, preds.h, preds.w);
    for (int i = 0; i < n; ++i) {
        const double* src =
            i < k ? corrupted.sample_ptr(i % corrupted.n) : preds.sample_ptr(i % preds.n);
        std::copy(src, src + preds.sample_size(), fake.sample_ptr(i));
    }
    return fake;
}

LossValue Trainer::step_adversarial_generator(const Tensor& images) {
    if (images.n == 0) throw ContractError("step_adversarial: empty batch");
    // minimize a * 1/2 mean[d(segment(adapt(x)))^2]
    Tensor xp = bundle_.adapt(images, true);
    Tensor probs = bundle_.segment(xp, /*training=*/true, /*keep_cache=*/true);
    std::vector<double> scores = bundle_.disc.forward(probs, true, /*update_stats=*/true);
    LossValue gen_loss = lsgan_generator_loss(scores);
    const double a = cfg_.adv_weight_factor == 0.0
                         ? 0.0
                         : dynamic_weight(last_sup_loss_, gen_loss.value) *
                               (cfg_.adv_weight_factor / 0.1);
    last_dyn_weight_ = a;

    auto gen_params = bundle_.generator_params();
    zero_grads(gen_params);
    std::vector<double> dscores = lsgan_generator_grad(scores);
    for (double& g : dscores) g *= a;
    Tensor dprobs = bundle_.disc.backward(dscores, /*accum_param_grads=*/false);
    Tensor dxp = bundle_.segment_backward(dprobs, true);
    bundle_.adapt_backward(dxp, true);
    gen_opt_.step(gen_params);

    last_preds_ = probs; // detached fakes for the discriminator phase
    gen_loss.components.push_back({"dyn_weight", a});
    return gen_loss;
}

LossValue Trainer::step_adversarial_discriminator(const Tensor& real_masks) {
    if (real_masks.n == 0) throw ContractError("step_adversarial: empty batch");
    if (last_preds_.size() == 0)
        throw ContractError("step_adversarial: generator phase must run first");
    const Tensor& probs = last_preds_;
    const int n = real_masks.n;
    Tensor corrupted(n, real_masks.c, real_masks.h, real_masks.w);
    if (cfg_.use_fake_anchors) {
        for (int i = 0; i < n; ++i) {
            Tensor one = real_masks.slice(i);
            Tensor corr = corrupt_mask(one, cfg_.corrupt_patch_frac, cfg_.corrupt_flip_prob,
                                       cfg_.corrupt_n_swaps, rng_.next_u64());
            std::copy(corr.v.begin(), corr.v.end(), corrupted.sample_ptr(i));
        }
    }
    Tensor fake = make_fake_batch(probs, corrupted); // predictions are detached here

    Tensor real_aug = Tensor::like(real_masks);
    Tensor fake_aug = Tensor::like(fake);
    for (int i = 0; i < n; ++i) {
        Tensor r = augment_discriminator_input(real_masks.slice(i), cfg_.instance_noise_std,
                                               cfg_.max_rotation, cfg_.max_shift_frac,
                                               rng_.next_u64());
        std::copy(r.v.begin(), r.v.end(), real_aug.sample_ptr(i));
        Tensor fa = augment_discriminator_input(fake.slice(i), cfg_.instance_noise_std,
                                                cfg_.max_rotation, cfg_.max_shift_frac,
                                                rng_.next_u64());
        std::copy(fa.v.begin(), fa.v.end(), fake_aug.sample_ptr(i));
    }

    Tensor both = concat_batch(real_aug, fake_aug);
    auto disc_params = bundle_.disc_params();
    zero_grads(disc_params);
    std::vector<double> all_scores = bundle_.disc.forward(both, true, /*update_stats=*/true);
    std::vector<double> d_real(all_scores.begin(), all_scores.begin() + n);
    std::vector<double> d_fake(all_scores.begin() + n, all_scores.end());
    LossValue disc_loss = lsgan_discriminator_loss(d_real, d_fake);

    std::vector<double> g_real, g_fake;
    lsgan_discriminator_grad(d_real, d_fake, g_real, g_fake);
    std::vector<double> g_all = g_real;
    g_all.insert(g_all.end(), g_fake.begin(), g_fake.end());
    bundle_.disc.backward(g_all, /*accum_param_grads=*/true);

    const double lambda = cfg_.use_smoothness ? cfg_.gp_lambda : 0.0;
    if (lambda > 0.0) {
        LossValue gp = gradient_penalty(bundle_.disc, real_aug, fake_aug, lambda, rng_.next_u64(),
                                        /*accumulate_grads=*/true);
        disc_loss.components.push_back({"gp", gp.value});
        disc_loss.value += gp.value;
    }
    bundle_.disc.finalize_sn_grads();
    disc_opt_.step(disc_params);
    return disc_loss;
}

std::pair<LossValue, LossValue> Trainer::step_adversarial(const Tensor& images,
                                                          const Tensor& real_masks) {
    LossValue gen_loss = step_adversarial_generator(images);
    LossValue disc_loss = step_adversarial_discriminator(real_masks);
    return {gen_loss, disc_loss};
}

LossValue Trainer::step_reconstruction(const Tensor& images) {
    if (bundle_.kind != ModelKind::causal)
        throw ContractError("step_reconstruction: causal bundle required");
    Tensor xp = bundle_.adapt(images, true);
    Tensor probs = bundle_.segment(xp, true, true);
    Tensor residual = bundle_.last_residual();
    Tensor xrec = bundle_.decoder.forward(probs, residual, true);
    LossValue loss = mae_reconstruction(xp, xrec);

    auto gen_params = bundle_.generator_params();
    zero_grads(gen_params);
    // d/dxrec = -d/dxp(direct); both routes flow back into the adaptor
    Tensor g_direct = mae_reconstruction_grad(xp, xrec);
    Tensor g_rec = Tensor::like(g_direct);
    for (size_t i = 0; i < g_rec.size(); ++i) g_rec.v[i] = -g_direct.v[i];
    Tensor dprobs, dresid;
    bundle_.decoder.backward(g_rec, true, dprobs, dresid);
    Tensor dxp = bundle_.encoder.backward(dprobs, dresid, true);
    for (size_t i = 0; i < dxp.size(); ++i) dxp.v[i] += g_direct.v[i];
    bundle_.adapt_backward(dxp, true);
    gen_opt_.step(gen_params);
    return loss;
}

void Trainer::validation_losses(double& sup_loss, double& real_loss, double& fake_loss,
                                double* recon_loss) {
    double sup_acc = 0.0;
    int sup_count = 0;
    double recon_acc = 0.0;
    int recon_count = 0;
    std::vector<double> d_real, d_fake;
    for (const auto& vol : split_.val) {
        std::vector<Tensor> xs, ys;
        bool all_masked = true;
        for (const auto& sl : vol.slices) {
            xs.push_back(sl.image.pix);
            if (sl.mask) ys.push_back(*sl.mask);
            else all_masked = false;
        }
        if (xs.empty()) continue;
        Tensor x = stack(xs);
        Tensor xp = bundle_.adapt(x, false);
        Tensor probs = bundle_.segment(xp, /*training=*/false, /*keep_cache=*/false);
        if (all_masked && !ys.empty()) {
            Tensor y = stack(ys);
            sup_acc += weighted_cross_entropy(probs, y).value * double(xs.size());
            sup_count += int(xs.size());
            auto sr = bundle_.disc.forward(y, false, false);
            d_real.insert(d_real.end(), sr.begin(), sr.end());
        }
        auto sf = bundle_.disc.forward(probs, false, false);
        d_fake.insert(d_fake.end(), sf.begin(), sf.end());
        if (recon_loss && bundle_.kind == ModelKind::causal) {
            Tensor xrec = bundle_.decoder.forward(probs, bundle_.last_residual(), false);
            recon_acc += mae_reconstruction(xp, xrec).value;
            ++recon_count;
        }
    }
    if (sup_count == 0) throw ContractError("validation: no labelled validation slices");
    sup_loss = sup_acc / double(sup_count);
    LossValue l = lsgan_discriminator_loss(d_real, d_fake);
    real_loss = l.component("real");
    fake_loss = l.component("fake");
    if (recon_loss) *recon_loss = recon_count ? recon_acc / recon_count : 0.0;
}

double Trainer::validation_supervised_loss() {
    double sup = 0.0, r = 0.0, f = 0.0;
    validation_losses(sup, r, f, nullptr);
    return sup;
}

void Trainer::validation_disc_losses(double& real_loss, double& fake_loss) {
    double sup = 0.0;
    validation_losses(sup, real_loss, fake_loss, nullptr);
}

TrainHistory Trainer::fit() {
    TrainHistory history;
    const size_t pool_max = std::max(lab_images_.size(),
                                     std::max(unlab_images_.size(), unpaired_masks_.size()));
    const int iters = std::max<int>(1, int((pool_max + cfg_.batch_size - 1) / cfg_.batch_size));

    double best_val = 1e300;
    ModelBundle best = bundle_;
    int best_epoch = 0;
    std::vector<double> val_history;

    for (int epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
        double sup_acc = 0.0, gen_acc = 0.0, dreal_acc = 0.0, dfake_acc = 0.0, dyn_acc = 0.0;
        for (int it = 0; it < iters; ++it) {
            Tensor y;
            Tensor x = next_labelled_batch(y);
            LossValue sup = step_supervised(x, y);
            Tensor xu = next_unlabelled_batch();
            Tensor ym = next_mask_batch();
            auto [gen, disc] = step_adversarial(xu, ym);
            if (bundle_.kind == ModelKind::causal) step_reconstruction(next_image_batch());
            sup_acc += sup.value;
            gen_acc += gen.value;
            dreal_acc += disc.component("real");
            dfake_acc += disc.component("fake");
            dyn_acc += last_dyn_weight_;
            if (!std::isfinite(sup.value) || !std::isfinite(gen.value) ||
                !std::isfinite(disc.value))
                throw DivergenceError("fit: non-finite loss at epoch " + std::to_string(epoch));
        }
        EpochRecord r;
        r.epoch = epoch;
        r.train_sup = sup_acc / iters;
        r.gen_adv = gen_acc / iters;
        r.train_disc_real = dreal_acc / iters;
        r.train_disc_fake = dfake_acc / iters;
        r.dyn_weight = dyn_acc / iters;
        validation_losses(r.val_sup, r.val_disc_real, r.val_disc_fake, &r.val_recon);
        history.epochs.push_back(r);
        if (!std::isfinite(r.val_sup))
            throw DivergenceError("fit: non-finite validation loss at epoch " +
                                  std::to_string(epoch));

        val_history.push_back(r.val_sup);
        if (r.val_sup < best_val) {
            best_val = r.val_sup;
            best = bundle_;
            best_epoch = epoch;
        }
        if (should_stop(val_history, cfg_.val_patience)) break;
    }

    bundle_ = best;
    bundle_.epoch = best_epoch;
    bundle_.val_loss = best_val;
    return history;
}

TrainHistory fit(ModelBundle& bundle, const SplitResult& split, const TrainConfig& cfg) {
    Trainer trainer(bundle, split, cfg);
    return trainer.fit();
}

} // namespace attt
