#pragma once

#include <string>
#include <vector>

#include "attt/datagen.hpp"
#include "attt/losses.hpp"
#include "attt/nets.hpp"

namespace attt {

// Training aborted on a non-finite loss; a diagnostic snapshot is attached.
struct DivergenceError : std::runtime_error {
    explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 12;
    int max_epochs = 100;
    int val_patience = 10;
    double instance_noise_std = 0.1;
    double max_rotation = 1.5707963267948966; // pi/2
    double max_shift_frac = 0.1;
    double adv_weight_factor = 0.1;
    double gp_lambda = 10.0;
    double corrupted_fraction = 0.5;
    double corrupt_patch_frac = 0.1;
    double corrupt_flip_prob = 0.05;
    int corrupt_n_swaps = 2;
    uint64_t seed = 0;
    bool use_adaptor = true;
    bool use_smoothness = true;
    bool use_fake_anchors = true;

    void validate() const {
        if (learning_rate <= 0.0 || batch_size < 1 || max_epochs < 1)
            throw ConfigError("TrainConfig: positive rates and sizes required");
        if (val_patience < 1) throw ConfigError("TrainConfig: patience must be >= 1");
        if (corrupted_fraction < 0.0 || corrupted_fraction > 1.0)
            throw ConfigError("TrainConfig: corrupted_fraction must be in [0,1]");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_sup = 0.0, val_sup = 0.0;
    double train_disc_real = 0.0, train_disc_fake = 0.0;
    double val_disc_real = 0.0, val_disc_fake = 0.0;
    double gen_adv = 0.0;
    double dyn_weight = 0.0;
    double val_recon = 0.0; // causal bundles only
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
};

// True iff no new global minimum appeared within the last `patience` entries.
bool should_stop(const std::vector<double>& val_history, int patience);

void write_history_csv(const TrainHistory& h, const std::string& path);
TrainHistory read_history_csv(const std::string& path);

// Alternating optimization: one supervised step (labelled pairs) then one
// adversarial step (unpaired images + unpaired masks, fake anchors and
// discriminator-input augmentation) per iteration; causal bundles add a
// reconstruction step on the adapted image. Early stopping on the validation
// supervised loss with best-checkpoint restore.
class Trainer {
public:
    Trainer(ModelBundle& bundle, const SplitResult& split, const TrainConfig& cfg);

    // One optimizer step on (adaptor, segmentor) minimizing weighted CE.
    LossValue step_supervised(const Tensor& images, const Tensor& targets);
    // Generator step then discriminator step; returns (gen_adv, disc) losses.
    std::pair<LossValue, LossValue> step_adversarial(const Tensor& images, const Tensor& real_masks);
    // The two adversarial phases, separately steppable. The discriminator
    // phase consumes the detached predictions left by the generator phase.
    LossValue step_adversarial_generator(const Tensor& images);
    LossValue step_adversarial_discriminator(const Tensor& real_masks);
    // Reconstruction step (causal): MAE between adapted image and decoder output.
    LossValue step_reconstruction(const Tensor& images);

    TrainHistory fit();

    double validation_supervised_loss();
    void validation_disc_losses(double& real_loss, double& fake_loss);
    // one shared forward pass for all per-epoch validation records
    void validation_losses(double& sup_loss, double& real_loss, double& fake_loss,
                           double* recon_loss);

    // batch assembly helpers, exposed for tests
    Tensor next_labelled_batch(Tensor& targets);
    Tensor next_unlabelled_batch();
    Tensor next_mask_batch();
    Tensor next_image_batch(); // labelled + unlabelled images (reconstruction)
    Tensor make_fake_batch(const Tensor& preds, const Tensor& corrupted);

    double last_supervised_loss() const { return last_sup_loss_; }
    double last_dynamic_weight() const { return last_dyn_weight_; }

private:
    void build_pools();
    Tensor gather(const std::vector<const Tensor*>& pool, std::vector<size_t>& order, size_t& cursor,
                  int count);

    ModelBundle& bundle_;
    const SplitResult& split_;
    TrainConfig cfg_;
    Rng rng_;
    Adam gen_opt_, disc_opt_, dec_opt_;

    std::vector<const Tensor*> lab_images_, lab_masks_;
    std::vector<const Tensor*> unlab_images_, unpaired_masks_;
    std::vector<const Tensor*> all_images_;
    std::vector<size_t> lab_order_, unlab_order_, mask_order_, img_order_;
    size_t lab_cursor_ = 0, unlab_cursor_ = 0, mask_cursor_ = 0, img_cursor_ = 0;

    double last_sup_loss_ = 1.0;
    double last_dyn_weight_ = 0.0;
    Tensor last_preds_; // detached predictions from the generator phase
};

// Convenience wrapper: trains a fresh Trainer and returns its history. The
// bundle ends up holding the minimum-validation-loss parameters.
TrainHistory fit(ModelBundle& bundle, const SplitResult& split, const TrainConfig& cfg);

} // namespace attt
