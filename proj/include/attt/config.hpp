#pragma once

#include <map>
#include <string>

#include "attt/datagen.hpp"
#include "attt/nets.hpp"
#include "attt/train.hpp"
#include "attt/ttt.hpp"

namespace attt {

// Flat key=value experiment configuration. Precedence: CLI flag > config
// file > defaults; files may pull in other files with `include = path`.
// Unknown keys are rejected.
struct ExperimentConfig {
    std::string dataset_path = "dataset";
    std::string run_dir = "runs/default";
    std::string model = "gan"; // gan | causal
    uint64_t seed = 7;
    int jobs = 1;

    // synth
    int synth_n_patients = 40;
    int synth_slices = 8;
    int synth_image_size = 64;
    int synth_classes = 3;
    double synth_labelled_frac = 0.25;
    double synth_frac_train = 0.4;
    double synth_frac_val = 0.2;
    double synth_frac_test = 0.4;
    double prep_target_spacing = 1.0;
    // shift applied to the test split when requested
    double shift_gamma = 1.6;
    double shift_bias = 0.25;
    double shift_noise = 0.08;
    double shift_contrast = 1.25;

    // nets
    int net_unet_levels = 3;
    int net_unet_base = 16;
    int net_disc_base = 32;
    int net_adaptor_channels = 16;
    int net_residual_channels = 8;
    int net_decoder_width = 32;

    // train
    double train_learning_rate = 1e-4;
    int train_batch_size = 12;
    int train_max_epochs = 100;
    int train_val_patience = 10;
    double train_instance_noise_std = 0.1;
    double train_max_rotation = 1.5707963267948966;
    double train_max_shift_frac = 0.1;
    double train_adv_weight_factor = 0.1;
    double train_gp_lambda = 10.0;
    double train_corrupted_fraction = 0.5;
    double train_corrupt_patch_frac = 0.1;
    double train_corrupt_flip_prob = 0.05;
    int train_corrupt_n_swaps = 2;
    bool train_use_adaptor = true;
    bool train_use_smoothness = true;
    bool train_use_fake_anchors = true;

    // ttt
    int ttt_patience = 200;
    int ttt_max_iter = 1000;
    std::string ttt_mode = "adversarial"; // adversarial | reconstruction | both
    std::string ttt_unit = "patient";     // patient | slice
    bool ttt_continual = false;
    double ttt_learning_rate = 1e-4;
    int ttt_adapt_first_k = -1;

    // eval / diagnostics
    int eval_n_boot = 10000;
    int diag_window = 10;
    double diag_tol = 0.15;

    // ablate
    std::string ablate_table = "table2"; // table2 | table3
    int ablate_seeds = 1;

    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    static const std::vector<std::string>& keys();

    static ExperimentConfig from_file(const std::string& path);
    void load_file(const std::string& path);
    std::string to_text() const;

    NetConfig net_config() const;
    TrainConfig train_config() const;
    TTTConfig ttt_config() const;
    ShiftParams shift_params() const;
};

// Written atomically at run start (status "running") and completion.
struct RunManifest {
    std::string command;
    std::string status = "running"; // running | done | failed
    std::string started_at, finished_at;
    std::string config_text;
    uint64_t seed = 0;
    std::vector<std::string> artifacts;
    std::string error;

    void write(const std::string& run_dir) const;
};

std::string timestamp_utc();

} // namespace attt
