#include "attt/config.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

namespace attt {

namespace fs = std::filesystem;

namespace {

struct FieldDef {
    std::string key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("invalid boolean value: " + s);
}

double parse_double(const std::string& s) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid numeric value: " + s);
    }
}

int parse_int(const std::string& s) {
    try {
        size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid integer value: " + s);
    }
}

uint64_t parse_u64(const std::string& s) {
    try {
        size_t pos = 0;
        const uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("invalid seed value: " + s);
    }
}

#define STR_FIELD(key, member)                                                        \
    {key, [](const ExperimentConfig& c) { return c.member; },                        \
     [](ExperimentConfig& c, const std::string& v) { c.member = v; }}
#define INT_FIELD(key, member)                                                        \
    {key, [](const ExperimentConfig& c) { return std::to_string(c.member); },        \
     [](ExperimentConfig& c, const std::string& v) { c.member = parse_int(v); }}
#define DBL_FIELD(key, member)                                                        \
    {key, [](const ExperimentConfig& c) { return fmt_double(c.member); },            \
     [](ExperimentConfig& c, const std::string& v) { c.member = parse_double(v); }}
#define BOOL_FIELD(key, member)                                                       \
    {key, [](const ExperimentConfig& c) { return std::string(c.member ? "1" : "0"); },\
     [](ExperimentConfig& c, const std::string& v) { c.member = parse_bool(v); }}

const std::vector<FieldDef>& fields() {
    static const std::vector<FieldDef> defs = {
        STR_FIELD("dataset.path", dataset_path),
        STR_FIELD("run.dir", run_dir),
        STR_FIELD("model", model),
        {"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
         [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64(v); }},
        INT_FIELD("jobs", jobs),
        INT_FIELD("synth.n_patients", synth_n_patients),
        INT_FIELD("synth.slices", synth_slices),
        INT_FIELD("synth.image_size", synth_image_size),
        INT_FIELD("synth.classes", synth_classes),
        DBL_FIELD("synth.labelled_frac", synth_labelled_frac),
        DBL_FIELD("synth.frac_train", synth_frac_train),
        DBL_FIELD("synth.frac_val", synth_frac_val),
        DBL_FIELD("synth.frac_test", synth_frac_test),
        DBL_FIELD("prep.target_spacing", prep_target_spacing),
        DBL_FIELD("shift.gamma", shift_gamma),
        DBL_FIELD("shift.bias", shift_bias),
        DBL_FIELD("shift.noise", shift_noise),
        DBL_FIELD("shift.contrast", shift_contrast),
        INT_FIELD("net.unet_levels", net_unet_levels),
        INT_FIELD("net.unet_base", net_unet_base),
        INT_FIELD("net.disc_base", net_disc_base),
        INT_FIELD("net.adaptor_channels", net_adaptor_channels),
        INT_FIELD("net.residual_channels", net_residual_channels),
        INT_FIELD("net.decoder_width", net_decoder_width),
        DBL_FIELD("train.learning_rate", train_learning_rate),
        INT_FIELD("train.batch_size", train_batch_size),
        INT_FIELD("train.max_epochs", train_max_epochs),
        INT_FIELD("train.val_patience", train_val_patience),
        DBL_FIELD("train.instance_noise_std", train_instance_noise_std),
        DBL_FIELD("train.max_rotation", train_max_rotation),
        DBL_FIELD("train.max_shift_frac", train_max_shift_frac),
        DBL_FIELD("train.adv_weight_factor", train_adv_weight_factor),
        DBL_FIELD("train.gp_lambda", train_gp_lambda),
        DBL_FIELD("train.corrupted_fraction", train_corrupted_fraction),
        DBL_FIELD("train.corrupt_patch_frac", train_corrupt_patch_frac),
        DBL_FIELD("train.corrupt_flip_prob", train_corrupt_flip_prob),
        INT_FIELD("train.corrupt_n_swaps", train_corrupt_n_swaps),
        BOOL_FIELD("train.use_adaptor", train_use_adaptor),
        BOOL_FIELD("train.use_smoothness", train_use_smoothness),
        BOOL_FIELD("train.use_fake_anchors", train_use_fake_anchors),
        INT_FIELD("ttt.patience", ttt_patience),
        INT_FIELD("ttt.max_iter", ttt_max_iter),
        STR_FIELD("ttt.mode", ttt_mode),
        STR_FIELD("ttt.unit", ttt_unit),
        BOOL_FIELD("ttt.continual", ttt_continual),
        DBL_FIELD("ttt.learning_rate", ttt_learning_rate),
        INT_FIELD("ttt.adapt_first_k", ttt_adapt_first_k),
        INT_FIELD("eval.n_boot", eval_n_boot),
        INT_FIELD("diag.window", diag_window),
        DBL_FIELD("diag.tol", diag_tol),
        STR_FIELD("ablate.table", ablate_table),
        INT_FIELD("ablate.seeds", ablate_seeds),
    };
    return defs;
}

#undef STR_FIELD
#undef INT_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    for (const auto& f : fields()) {
        if (f.key == key) {
            f.set(*this, value);
            return;
        }
    }
    throw ConfigError("unknown config key: " + key);
}

std::string ExperimentConfig::get(const std::string& key) const {
    for (const auto& f : fields())
        if (f.key == key) return f.get(*this);
    throw ConfigError("unknown config key: " + key);
}

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> ks = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return ks;
}

void ExperimentConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "include") {
            const fs::path inc = fs::path(path).parent_path() / value;
            load_file(inc.string());
        } else {
            set(key, value);
        }
    }
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    ExperimentConfig cfg;
    cfg.load_file(path);
    return cfg;
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream out;
    for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << "\n";
    return out.str();
}

NetConfig ExperimentConfig::net_config() const {
    NetConfig n;
    n.image_size = synth_image_size;
    n.n_classes = synth_classes;
    n.unet_levels = net_unet_levels;
    n.unet_base = net_unet_base;
    n.disc_base = net_disc_base;
    n.adaptor_channels = net_adaptor_channels;
    n.residual_channels = net_residual_channels;
    n.decoder_width = net_decoder_width;
    n.smooth_disc = train_use_smoothness;
    n.use_adaptor = train_use_adaptor;
    return n;
}

TrainConfig ExperimentConfig::train_config() const {
    TrainConfig t;
    t.learning_rate = train_learning_rate;
    t.batch_size = train_batch_size;
    t.max_epochs = train_max_epochs;
    t.val_patience = train_val_patience;
    t.instance_noise_std = train_instance_noise_std;
    t.max_rotation = train_max_rotation;
    t.max_shift_frac = train_max_shift_frac;
    t.adv_weight_factor = train_adv_weight_factor;
    t.gp_lambda = train_gp_lambda;
    t.corrupted_fraction = train_corrupted_fraction;
    t.corrupt_patch_frac = train_corrupt_patch_frac;
    t.corrupt_flip_prob = train_corrupt_flip_prob;
    t.corrupt_n_swaps = train_corrupt_n_swaps;
    t.seed = seed;
    t.use_adaptor = train_use_adaptor;
    t.use_smoothness = train_use_smoothness;
    t.use_fake_anchors = train_use_fake_anchors;
    return t;
}

TTTConfig ExperimentConfig::ttt_config() const {
    TTTConfig t;
    t.patience = ttt_patience;
    t.max_iter = ttt_max_iter;
    if (ttt_mode == "adversarial") t.mode = TTTMode::adversarial;
    else if (ttt_mode == "reconstruction") t.mode = TTTMode::reconstruction;
    else if (ttt_mode == "both") t.mode = TTTMode::both;
    else throw ConfigError("ttt.mode must be adversarial, reconstruction, or both");
    if (ttt_unit == "patient") t.unit = TTTUnit::patient;
    else if (ttt_unit == "slice") t.unit = TTTUnit::slice;
    else throw ConfigError("ttt.unit must be patient or slice");
    t.continual = ttt_continual;
    t.learning_rate = ttt_learning_rate;
    t.seed = seed;
    t.adapt_first_k = ttt_adapt_first_k;
    return t;
}

ShiftParams ExperimentConfig::shift_params() const {
    ShiftParams s;
    s.gamma = shift_gamma;
    s.bias_field_amplitude = shift_bias;
    s.noise_std = shift_noise;
    s.contrast_scale = shift_contrast;
    return s;
}

// ---------------------------------------------------------------------------

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

void RunManifest::write(const std::string& run_dir) const {
    fs::create_directories(run_dir);
    nlohmann::json j;
    j["command"] = command;
    j["status"] = status;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["seed"] = seed;
    j["config"] = config_text;
    j["artifacts"] = artifacts;
    if (!error.empty()) j["error"] = error;
    const std::string tmp = run_dir + "/manifest.json.tmp";
    {
        std::ofstream f(tmp);
        f << j.dump(2) << "\n";
    }
    fs::rename(tmp, run_dir + "/manifest.json");
}

} // namespace attt
