// attt: stability-regularized segmentation GAN with re-usable discriminators
// for per-subject test-time training, on a built-in synthetic shape benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attt/config.hpp"
#include "attt/diagnostics.hpp"
#include "attt/losses.hpp"
#include "attt/metrics.hpp"
#include "attt/nets.hpp"
#include "attt/train.hpp"
#include "attt/ttt.hpp"

using namespace attt;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliError : std::runtime_error {
    std::string code;
    CliError(std::string code_, const std::string& msg)
        : std::runtime_error(msg), code(std::move(code_)) {}
};

void emit_error(const std::string& code, const std::string& message, const std::string& run_dir) {
    json j;
    j["error"] = code;
    j["message"] = message;
    std::cerr << j.dump() << "\n";
    if (!run_dir.empty()) {
        std::error_code ec;
        fs::create_directories(run_dir, ec);
        if (!ec) {
            std::ofstream f(run_dir + "/error.json");
            f << j.dump(2) << "\n";
        }
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SplitResult load_dataset_or_fail(const ExperimentConfig& cfg, int* n_classes) {
    if (!fs::exists(cfg.dataset_path + "/dataset.json"))
        throw CliError("MISSING_DATASET", "no dataset at " + cfg.dataset_path +
                                              " (run `attt synth` first)");
    return load_split_dataset(cfg.dataset_path, n_classes);
}

ModelBundle load_checkpoint_or_fail(const ExperimentConfig& cfg) {
    const std::string man = cfg.run_dir + "/checkpoint.json";
    if (!fs::exists(man))
        throw CliError("MISSING_CHECKPOINT",
                       "no checkpoint at " + man + " (run `attt train` first)");
    return load_bundle(cfg.run_dir, "checkpoint");
}

RunManifest start_manifest(const ExperimentConfig& cfg, const std::string& command) {
    RunManifest m;
    m.command = command;
    m.started_at = timestamp_utc();
    m.seed = cfg.seed;
    m.config_text = cfg.to_text();
    m.write(cfg.run_dir);
    return m;
}

void finish_manifest(RunManifest& m, const ExperimentConfig& cfg,
                     const std::vector<std::string>& artifacts) {
    m.status = "done";
    m.finished_at = timestamp_utc();
    m.artifacts = artifacts;
    m.write(cfg.run_dir);
}

SubjectOutcome outcome_from_result(const PatientVolume& subject, const TTTResult& r) {
    std::vector<Tensor> gt, pb, pa;
    for (size_t k = 0; k < subject.slices.size(); ++k) {
        gt.push_back(*subject.slices[k].mask);
        pb.push_back(harden(r.initial_mask.slice(int(k))));
        pa.push_back(harden(r.best_mask.slice(int(k))));
    }
    SubjectOutcome oc;
    oc.patient_id = subject.patient_id;
    oc.before = patient_record(subject.patient_id, "before", pb, gt);
    oc.after = patient_record(subject.patient_id, "after", pa, gt);
    oc.n_iter = r.n_iter;
    oc.best_loss = r.best_loss;
    oc.diverged = r.diverged;
    return oc;
}

ExperimentResult assemble_experiment(const std::vector<PatientVolume>& subjects,
                                     const std::vector<TTTResult>& results, int n_boot,
                                     uint64_t seed) {
    ExperimentResult res;
    std::vector<double> db, da, ib, ia, hb, ha;
    for (size_t i = 0; i < subjects.size(); ++i) {
        bool has_gt = true;
        for (const auto& sl : subjects[i].slices)
            if (!sl.mask) has_gt = false;
        if (!has_gt) {
            std::cerr << "[attt] warning: no ground truth for " << subjects[i].patient_id
                      << ", evaluation skipped\n";
            continue;
        }
        SubjectOutcome oc = outcome_from_result(subjects[i], results[i]);
        res.subjects.push_back(oc);
        res.records.push_back(oc.before);
        res.records.push_back(oc.after);
        db.push_back(oc.before.mean_fg_dice);
        da.push_back(oc.after.mean_fg_dice);
        ib.push_back(oc.before.mean_fg_iou);
        ia.push_back(oc.after.mean_fg_iou);
        hb.push_back(oc.before.mean_fg_hausdorff);
        ha.push_back(oc.after.mean_fg_hausdorff);
    }
    res.summary = aggregate(res.records);
    if (db.size() >= 5) {
        res.p_dice = bootstrap_ttest(db, da, n_boot, seed);
        res.p_iou = bootstrap_ttest(ib, ia, n_boot, seed);
        res.p_hausdorff = bootstrap_ttest(hb, ha, n_boot, seed);
    }
    return res;
}

// ---------------------------------------------------------------------------

int cmd_synth(const ExperimentConfig& cfg, bool force, bool shift) {
    if (fs::exists(cfg.dataset_path) && !fs::is_empty(cfg.dataset_path) && !force)
        throw CliError("TARGET_EXISTS",
                       cfg.dataset_path + " exists and is not empty (use --force to overwrite)");
    if (force && fs::exists(cfg.dataset_path)) fs::remove_all(cfg.dataset_path);

    auto raw = generate_synthetic_dataset(cfg.synth_n_patients, cfg.synth_slices,
                                          cfg.synth_image_size, cfg.synth_classes,
                                          derive_seed(cfg.seed, "synth"));
    std::vector<PatientVolume> prepped;
    for (const auto& vol : raw)
        prepped.push_back(preprocess_volume(vol, cfg.prep_target_spacing, cfg.synth_image_size));
    SplitResult split =
        split_patients(prepped, cfg.synth_frac_train, cfg.synth_frac_val, cfg.synth_frac_test,
                       cfg.synth_labelled_frac, derive_seed(cfg.seed, "split"));

    if (shift) {
        const ShiftParams sp = cfg.shift_params();
        uint64_t k = 0;
        for (auto& vol : split.test)
            for (auto& sl : vol.slices)
                sl.image = apply_domain_shift(sl.image, sp, derive_seed(cfg.seed, "shift", k++));
    }
    save_split_dataset(cfg.dataset_path, split, cfg.synth_classes);
    std::cout << "dataset written to " << cfg.dataset_path << ": " << split.train.size()
              << " train (" << split.labelled_ids.size() << " labelled) / " << split.val.size()
              << " val / " << split.test.size() << " test patients, " << cfg.synth_slices
              << " slices each, " << cfg.synth_image_size << "px, " << cfg.synth_classes
              << " classes" << (shift ? ", test split shifted" : "") << "\n";
    return 0;
}

int cmd_train(const ExperimentConfig& cfg) {
    int n_classes = 0;
    SplitResult split = load_dataset_or_fail(cfg, &n_classes);
    RunManifest manifest = start_manifest(cfg, "train");

    NetConfig net = cfg.net_config();
    net.n_classes = n_classes;
    net.image_size = split.train.at(0).slices.at(0).image.h();
    const ModelKind kind = cfg.model == "causal" ? ModelKind::causal : ModelKind::gan;
    ModelBundle bundle = init_models(net, kind, derive_seed(cfg.seed, "init"));

    TrainHistory history;
    try {
        history = fit(bundle, split, cfg.train_config());
    } catch (const DivergenceError& e) {
        json snap;
        snap["error"] = "DIVERGENCE";
        snap["message"] = e.what();
        std::ofstream f(cfg.run_dir + "/divergence_snapshot.json");
        f << snap.dump(2) << "\n";
        throw CliError("DIVERGENCE", e.what());
    }
    save_bundle(bundle, cfg.run_dir, "checkpoint");
    write_history_csv(history, cfg.run_dir + "/history.csv");
    finish_manifest(manifest, cfg,
                    {"checkpoint.bin", "checkpoint.json", "history.csv", "manifest.json"});
    std::cout << "trained " << cfg.model << " bundle: best epoch " << bundle.epoch
              << ", val loss " << bundle.val_loss << ", " << history.epochs.size()
              << " epochs -> " << cfg.run_dir << "\n";
    return 0;
}

void write_ttt_outputs(const ExperimentConfig& cfg, const ExperimentResult& res,
                       std::vector<std::string>& artifacts) {
    fs::create_directories(cfg.run_dir + "/subjects");
    std::ofstream csv(cfg.run_dir + "/ttt_results.csv");
    csv << "patient_id,n_iter,best_loss,dice_before,dice_after,iou_before,iou_after,"
           "hausdorff_before,hausdorff_after\n";
    for (const auto& s : res.subjects) {
        json j;
        j["patient_id"] = s.patient_id;
        j["n_iter"] = s.n_iter;
        j["best_loss"] = s.best_loss;
        j["diverged"] = s.diverged;
        j["dice_before"] = s.before.mean_fg_dice;
        j["dice_after"] = s.after.mean_fg_dice;
        j["iou_before"] = s.before.mean_fg_iou;
        j["iou_after"] = s.after.mean_fg_iou;
        j["hausdorff_before"] = s.before.mean_fg_hausdorff;
        j["hausdorff_after"] = s.after.mean_fg_hausdorff;
        std::ofstream f(cfg.run_dir + "/subjects/" + s.patient_id + ".json");
        f << j.dump(2) << "\n";
        csv << s.patient_id << ',' << s.n_iter << ',' << fmt(s.best_loss) << ','
            << fmt(s.before.mean_fg_dice) << ',' << fmt(s.after.mean_fg_dice) << ','
            << fmt(s.before.mean_fg_iou) << ',' << fmt(s.after.mean_fg_iou) << ','
            << fmt(s.before.mean_fg_hausdorff) << ',' << fmt(s.after.mean_fg_hausdorff) << '\n';
    }
    json agg;
    agg["n_subjects"] = res.subjects.size();
    agg["dice_before"] = res.summary.mean_dice_before;
    agg["dice_after"] = res.summary.mean_dice_after;
    agg["p_dice"] = res.p_dice;
    agg["p_iou"] = res.p_iou;
    agg["p_hausdorff"] = res.p_hausdorff;
    std::ofstream f(cfg.run_dir + "/ttt_summary.json");
    f << agg.dump(2) << "\n";
    artifacts.push_back("ttt_results.csv");
    artifacts.push_back("ttt_summary.json");
}

void write_predictions(const ExperimentConfig& cfg, const std::string& patient_id,
                       const Tensor& before, const Tensor& after) {
    const std::string dir = cfg.run_dir + "/predictions/" + patient_id;
    fs::create_directories(dir);
    for (int k = 0; k < before.n; ++k) {
        char name[512];
        std::snprintf(name, sizeof(name), "%s/before_%03d.msk", dir.c_str(), k);
        const auto lb = labels_from_mask(harden(before.slice(k)));
        std::ofstream fb(name, std::ios::binary);
        fb.write(reinterpret_cast<const char*>(lb.data()), std::streamsize(lb.size()));
        std::snprintf(name, sizeof(name), "%s/after_%03d.msk", dir.c_str(), k);
        const auto la = labels_from_mask(harden(after.slice(k)));
        std::ofstream fa(name, std::ios::binary);
        fa.write(reinterpret_cast<const char*>(la.data()), std::streamsize(la.size()));
    }
}

int cmd_ttt(const ExperimentConfig& cfg, bool continual) {
    int n_classes = 0;
    SplitResult split = load_dataset_or_fail(cfg, &n_classes);
    ModelBundle bundle = load_checkpoint_or_fail(cfg);
    RunManifest manifest = start_manifest(cfg, continual ? "continual" : "ttt");

    TTTConfig tc = cfg.ttt_config();
    tc.continual = continual;
    if (tc.mode != TTTMode::adversarial && bundle.kind != ModelKind::causal)
        throw CliError("CONFIG_ERROR", "reconstruction TTT modes require a causal checkpoint");

    std::vector<TTTResult> results(split.test.size());
    if (continual) {
        results = ttt_continual(bundle, split.test, tc);
    } else if (cfg.jobs > 1) {
        // independent subjects run in parallel on bundle snapshots
        const int jobs = std::min<int>(cfg.jobs, int(split.test.size()));
        std::vector<std::thread> threads;
        for (int j = 0; j < jobs; ++j) {
            threads.emplace_back([&, j] {
                ModelBundle local = bundle;
                for (size_t i = size_t(j); i < split.test.size(); i += size_t(jobs))
                    results[i] = ttt_adapt(local, split.test[i], tc);
            });
        }
        for (auto& t : threads) t.join();
    } else {
        for (size_t i = 0; i < split.test.size(); ++i)
            results[i] = ttt_adapt(bundle, split.test[i], tc);
    }

    for (size_t i = 0; i < split.test.size(); ++i)
        write_predictions(cfg, split.test[i].patient_id, results[i].initial_mask,
                          results[i].best_mask);
    ExperimentResult res = assemble_experiment(split.test, results, cfg.eval_n_boot, tc.seed);

    std::vector<std::string> artifacts{"manifest.json"};
    write_ttt_outputs(cfg, res, artifacts);
    finish_manifest(manifest, cfg, artifacts);

    double mean_iter = 0.0;
    for (const auto& s : res.subjects) mean_iter += s.n_iter;
    if (!res.subjects.empty()) mean_iter /= double(res.subjects.size());
    std::cout << (continual ? "continual " : "") << "ttt on " << res.subjects.size()
              << " subjects: dice " << res.summary.mean_dice_before << " -> "
              << res.summary.mean_dice_after << " (p=" << res.p_dice << "), mean n_iter "
              << mean_iter << "\n";
    return 0;
}

int cmd_eval(const ExperimentConfig& cfg) {
    int n_classes = 0;
    SplitResult split = load_dataset_or_fail(cfg, &n_classes);
    const std::string pred_root = cfg.run_dir + "/predictions";
    if (!fs::exists(pred_root))
        throw CliError("MISSING_PREDICTIONS",
                       "no predictions under " + pred_root + " (run `attt ttt` first)");
    RunManifest manifest = start_manifest(cfg, "eval");

    std::ofstream csv(cfg.run_dir + "/metrics.csv");
    csv << "patient_id,phase,class,dice,iou,hausdorff\n";
    std::vector<MetricRecord> records;
    std::vector<double> db, da, ib, ia, hb, ha;
    for (const auto& vol : split.test) {
        const std::string dir = pred_root + "/" + vol.patient_id;
        if (!fs::exists(dir)) continue;
        bool has_gt = true;
        for (const auto& sl : vol.slices)
            if (!sl.mask) has_gt = false;
        if (!has_gt) {
            std::cerr << "[attt] warning: no ground truth for " << vol.patient_id
                      << ", evaluation skipped\n";
            continue;
        }
        for (const char* phase : {"before", "after"}) {
            std::vector<Tensor> preds, gts;
            for (size_t k = 0; k < vol.slices.size(); ++k) {
                char name[64];
                std::snprintf(name, sizeof(name), "%s_%03zu.msk", phase, k);
                std::ifstream f(dir + "/" + name, std::ios::binary);
                if (!f) throw CliError("MISSING_PREDICTIONS", dir + "/" + name + " not found");
                const int h = vol.slices[k].image.h(), w = vol.slices[k].image.w();
                std::vector<uint8_t> labels(size_t(h) * w);
                f.read(reinterpret_cast<char*>(labels.data()), std::streamsize(labels.size()));
                preds.push_back(mask_from_labels(labels, h, w, n_classes));
                gts.push_back(*vol.slices[k].mask);
            }
            MetricRecord r = patient_record(vol.patient_id, phase, preds, gts);
            records.push_back(r);
            for (int c = 0; c < n_classes; ++c)
                csv << vol.patient_id << ',' << phase << ',' << c << ',' << fmt(r.dice[size_t(c)])
                    << ',' << fmt(r.iou[size_t(c)]) << ',' << fmt(r.hausdorff[size_t(c)]) << '\n';
            if (std::string(phase) == "before") {
                db.push_back(r.mean_fg_dice);
                ib.push_back(r.mean_fg_iou);
                hb.push_back(r.mean_fg_hausdorff);
            } else {
                da.push_back(r.mean_fg_dice);
                ia.push_back(r.mean_fg_iou);
                ha.push_back(r.mean_fg_hausdorff);
            }
        }
    }
    if (records.empty()) throw CliError("MISSING_PREDICTIONS", "no evaluable subjects found");

    MetricSummary s = aggregate(records);
    json out;
    out["n_patients"] = db.size();
    out["dice"] = {{"before_mean", s.mean_dice_before}, {"before_std", s.std_dice_before},
                   {"after_mean", s.mean_dice_after},   {"after_std", s.std_dice_after}};
    out["iou"] = {{"before_mean", s.mean_iou_before}, {"before_std", s.std_iou_before},
                  {"after_mean", s.mean_iou_after},   {"after_std", s.std_iou_after}};
    out["hausdorff"] = {{"before_mean", s.mean_hd_before}, {"before_std", s.std_hd_before},
                        {"after_mean", s.mean_hd_after},   {"after_std", s.std_hd_after}};
    if (db.size() >= 5) {
        const uint64_t es = derive_seed(cfg.seed, "eval");
        out["p_dice"] = bootstrap_ttest(db, da, cfg.eval_n_boot, es);
        out["p_iou"] = bootstrap_ttest(ib, ia, cfg.eval_n_boot, es);
        out["p_hausdorff"] = bootstrap_ttest(hb, ha, cfg.eval_n_boot, es);
    }
    std::ofstream f(cfg.run_dir + "/summary.json");
    f << out.dump(2) << "\n";
    std::cout << out.dump(2) << "\n";
    finish_manifest(manifest, cfg, {"metrics.csv", "summary.json", "manifest.json"});
    return 0;
}

int cmd_diagnose(const ExperimentConfig& cfg) {
    const std::string hist = cfg.run_dir + "/history.csv";
    if (!fs::exists(hist))
        throw CliError("MISSING_HISTORY", "no history at " + hist + " (run `attt train` first)");
    TrainHistory h = read_history_csv(hist);
    ConvergenceReport r = classify_convergence(h, cfg.diag_window, cfg.diag_tol);
    json j;
    j["mode"] = to_string(r.mode);
    j["window"] = r.window;
    j["tol"] = r.tol;
    j["evidence"] = {{"train_real", r.train_real},
                     {"train_fake", r.train_fake},
                     {"val_real", r.val_real},
                     {"val_fake", r.val_fake}};
    std::cout << j.dump(2) << "\n";
    std::ofstream f(cfg.run_dir + "/diagnosis.json");
    f << j.dump(2) << "\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
    int n_classes = 0;
    SplitResult split = load_dataset_or_fail(cfg, &n_classes);
    RunManifest manifest = start_manifest(cfg, "ablate");

    struct Row {
        std::string name;
        bool adaptor, smoothness, anchors, ttt;
        bool patch_swap = true, binary_noise = true;
    };
    std::vector<Row> rows;
    if (cfg.ablate_table == "table2") {
        rows = {{"full", true, true, true, true},
                {"no_ttt", true, true, true, false},
                {"no_fake_anchors", true, true, false, false},
                {"no_smoothness", true, false, false, false},
                {"no_adaptor", false, false, false, false}};
    } else if (cfg.ablate_table == "table3") {
        rows = {{"none", true, true, false, false},
                {"patch_swap", true, true, true, false, true, false},
                {"binary_noise", true, true, true, false, false, true},
                {"both", true, true, true, false},
                {"both_adv_ttt", true, true, true, true}};
    } else {
        throw CliError("CONFIG_ERROR", "ablate.table must be table2 or table3");
    }

    std::ofstream csv(cfg.run_dir + "/ablation.csv");
    csv << "row,seed,dice_mean,dice_std,reference\n";
    for (const auto& row : rows) {
        for (int s = 0; s < cfg.ablate_seeds; ++s) {
            const uint64_t seed = derive_seed(cfg.seed, "ablate", uint64_t(s));
            NetConfig net = cfg.net_config();
            net.n_classes = n_classes;
            net.image_size = split.train.at(0).slices.at(0).image.h();
            net.use_adaptor = row.adaptor;
            net.smooth_disc = row.smoothness;
            ModelBundle bundle = init_models(net, ModelKind::gan, derive_seed(seed, "init"));
            TrainConfig tc = cfg.train_config();
            tc.seed = seed;
            tc.use_adaptor = row.adaptor;
            tc.use_smoothness = row.smoothness;
            tc.use_fake_anchors = row.anchors;
            if (!row.patch_swap) tc.corrupt_n_swaps = 0;
            if (!row.binary_noise) tc.corrupt_flip_prob = 0.0;
            fit(bundle, split, tc);

            std::vector<double> dices;
            if (row.ttt) {
                TTTConfig ttc = cfg.ttt_config();
                ttc.seed = seed;
                ExperimentResult res = evaluate_ttt_experiment(bundle, split.test, ttc, 200);
                for (const auto& sub : res.subjects) dices.push_back(sub.after.mean_fg_dice);
            } else {
                for (const auto& vol : split.test) {
                    std::vector<Tensor> xs, gt;
                    bool has_gt = true;
                    for (const auto& sl : vol.slices) {
                        xs.push_back(sl.image.pix);
                        if (sl.mask) gt.push_back(*sl.mask);
                        else has_gt = false;
                    }
                    if (!has_gt) continue;
                    Tensor probs = bundle.segment(bundle.adapt(stack(xs), false), false, false);
                    std::vector<Tensor> preds;
                    for (int k = 0; k < probs.n; ++k) preds.push_back(harden(probs.slice(k)));
                    dices.push_back(
                        patient_record(vol.patient_id, "before", preds, gt).mean_fg_dice);
                }
            }
            csv << row.name << ',' << s << ',' << fmt(mean(dices)) << ','
                << fmt(stddev_pop(dices)) << ',' << (row.name == "full" ? 1 : 0) << '\n';
            csv.flush();
            std::cout << "ablation " << row.name << " seed " << s << ": dice " << mean(dices)
                      << "\n";
        }
    }
    finish_manifest(manifest, cfg, {"ablation.csv", "manifest.json"});
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability-regularized segmentation GAN with adversarial test-time training"};
    app.require_subcommand(1);

    std::string config_path, run_dir, dataset_path, mode, model;
    int64_t seed = -1;
    int jobs = 0;
    bool force = false, shift = false;

    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--run-dir", run_dir, "run directory for artifacts");
    app.add_option("--dataset", dataset_path, "dataset directory");
    app.add_option("--seed", seed, "root seed (overrides config)");
    app.add_option("--jobs", jobs, "parallel subjects for non-continual ttt");
    app.add_option("--mode", mode, "ttt mode: adversarial|reconstruction|both");
    app.add_option("--model", model, "model variant: gan|causal");

    auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
    synth->add_flag("--force", force, "overwrite an existing dataset directory");
    synth->add_flag("--shift", shift, "apply the configured distribution shift to the test split");
    auto* train = app.add_subcommand("train", "train a bundle on the dataset");
    auto* ttt = app.add_subcommand("ttt", "per-subject test-time training on the test split");
    auto* continual = app.add_subcommand("continual", "online continual test-time training");
    auto* eval = app.add_subcommand("eval", "metrics + significance from saved predictions");
    auto* ablate = app.add_subcommand("ablate", "train/evaluate toggle combinations");
    auto* diagnose = app.add_subcommand("diagnose", "classify discriminator convergence");

    CLI11_PARSE(app, argc, argv);

    ExperimentConfig cfg;
    try {
        if (!config_path.empty()) cfg.load_file(config_path);
        if (!run_dir.empty()) cfg.run_dir = run_dir;
        if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
        if (seed >= 0) cfg.seed = uint64_t(seed);
        if (jobs > 0) cfg.jobs = jobs;
        if (!mode.empty()) cfg.ttt_mode = mode;
        if (!model.empty()) cfg.model = model;

        if (synth->parsed()) return cmd_synth(cfg, force, shift);
        if (train->parsed()) return cmd_train(cfg);
        if (ttt->parsed()) return cmd_ttt(cfg, false);
        if (continual->parsed()) return cmd_ttt(cfg, true);
        if (eval->parsed()) return cmd_eval(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg);
        if (diagnose->parsed()) return cmd_diagnose(cfg);
    } catch (const CliError& e) {
        emit_error(e.code, e.what(), cfg.run_dir);
        return 1;
    } catch (const ConfigError& e) {
        emit_error("CONFIG_ERROR", e.what(), cfg.run_dir);
        return 1;
    } catch (const DegenerateVolumeError& e) {
        emit_error("DEGENERATE_VOLUME", e.what(), cfg.run_dir);
        return 1;
    } catch (const ContractError& e) {
        emit_error("CONTRACT_ERROR", e.what(), cfg.run_dir);
        return 1;
    } catch (const std::exception& e) {
        emit_error("INTERNAL_ERROR", e.what(), cfg.run_dir);
        return 1;
    }
    return 0;
}
