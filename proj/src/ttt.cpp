#include "attt/ttt.hpp"

#include <cmath>
#include <iostream>

namespace attt {

bool stopping_check(const std::vector<double>& trace, int patience, int max_iter) {
    if (trace.empty()) return false;
    if (int(trace.size()) >= max_iter) return true;
    size_t last_improve = 0;
    double best = trace[0];
    for (size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] < best) {
            best = trace[i];
            last_improve = i;
        }
    }
    return trace.size() - 1 - last_improve >= size_t(patience);
}

double ttt_loss(ModelBundle& bundle, const Tensor& x, TTTMode mode) {
    if (mode != TTTMode::adversarial && bundle.kind != ModelKind::causal)
        throw ConfigError("ttt_loss: reconstruction modes require a causal bundle");
    Tensor xp = bundle.adapt(x, false);
    Tensor probs = bundle.segment(xp, /*training=*/false, /*keep_cache=*/false);
    double loss = 0.0;
    if (mode == TTTMode::adversarial || mode == TTTMode::both) {
        auto scores = bundle.disc.forward(probs, false, false);
        loss += lsgan_generator_loss(scores).value;
    }
    if (mode == TTTMode::reconstruction || mode == TTTMode::both) {
        Tensor xrec = bundle.decoder.forward(probs, bundle.last_residual(), false);
        loss += mae_reconstruction(xp, xrec).value;
    }
    return loss;
}

// ---------------------------------------------------------------------------

TTTEngine::TTTEngine(ModelBundle& bundle, const TTTConfig& cfg) : bundle_(bundle), cfg_(cfg) {
    cfg_.validate();
    if (cfg_.mode != TTTMode::adversarial && bundle_.kind != ModelKind::causal)
        throw ConfigError("ttt: reconstruction modes require a causal bundle");
    if (!bundle_.cfg.use_adaptor)
        throw ConfigError("ttt: bundle has no adaptor to tune");
    opt_.lr = cfg_.learning_rate;
    adaptor_refs_ = bundle_.adaptor_params();
    opt_.reset(adaptor_refs_);
}

double TTTEngine::loss_and_grad(const Tensor& x, bool want_grad) {
    Tensor xp = bundle_.adapt(x, want_grad);
    Tensor probs = bundle_.segment(xp, /*training=*/false, /*keep_cache=*/true);
    double loss = 0.0;
    Tensor dprobs = Tensor::like(probs);
    Tensor dresid;
    Tensor g_direct;

    if (cfg_.mode == TTTMode::adversarial || cfg_.mode == TTTMode::both) {
        auto scores = bundle_.disc.forward(probs, true, /*update_stats=*/false);
        loss += lsgan_generator_loss(scores).value;
        if (want_grad) {
            auto dscores = lsgan_generator_grad(scores);
            Tensor da = bundle_.disc.backward(dscores, /*accum_param_grads=*/false);
            for (size_t i = 0; i < dprobs.size(); ++i) dprobs.v[i] += da.v[i];
        }
    }
    if (cfg_.mode == TTTMode::reconstruction || cfg_.mode == TTTMode::both) {
        Tensor residual = bundle_.last_residual();
        Tensor xrec = bundle_.decoder.forward(probs, residual, want_grad);
        loss += mae_reconstruction(xp, xrec).value;
        if (want_grad) {
            g_direct = mae_reconstruction_grad(xp, xrec);
            Tensor g_rec = Tensor::like(g_direct);
            for (size_t i = 0; i < g_rec.size(); ++i) g_rec.v[i] = -g_direct.v[i];
            Tensor dp, dr;
            bundle_.decoder.backward(g_rec, /*accum=*/false, dp, dr);
            for (size_t i = 0; i < dprobs.size(); ++i) dprobs.v[i] += dp.v[i];
            dresid = dr;
        }
    }

    if (want_grad) {
        Tensor dxp;
        if (bundle_.kind == ModelKind::gan)
            dxp = bundle_.segmentor.backward(dprobs, /*accum=*/false);
        else
            dxp = bundle_.encoder.backward(dprobs, dresid, /*accum=*/false);
        if (g_direct.size() > 0)
            for (size_t i = 0; i < dxp.size(); ++i) dxp.v[i] += g_direct.v[i];
        bundle_.adaptor.backward(dxp, /*accum=*/true);
    }
    last_probs_ = probs;
    return loss;
}

TTTResult TTTEngine::adapt_batch(const Tensor& x, const std::string& patient_id) {
    TTTResult res;
    res.patient_id = patient_id;
    res.best_loss = 1e300;

    while (true) {
        zero_grads(adaptor_refs_);
        const double loss = loss_and_grad(x, true);
        if (!std::isfinite(loss)) {
            res.diverged = true;
            break;
        }
        res.trace.push_back(loss);
        if (res.trace.size() == 1) res.initial_mask = last_probs_;
        if (loss < res.best_loss) {
            res.best_loss = loss;
            res.best_mask = last_probs_;
            res.best_adaptor_params.clear();
            for (const auto& ref : adaptor_refs_)
                res.best_adaptor_params.insert(res.best_adaptor_params.end(),
                                               ref.p->value.begin(), ref.p->value.end());
        }
        if (stopping_check(res.trace, cfg_.patience, cfg_.max_iter)) break;
        opt_.step(adaptor_refs_);
    }
    res.n_iter = int(res.trace.size());
    if (res.trace.empty()) {
        res.best_loss = 0.0;
        res.diverged = true;
    }
    res.best_slices.clear();
    for (int i = 0; i < res.best_mask.n; ++i) res.best_slices.push_back(res.best_mask.slice(i));
    return res;
}

TTTResult TTTEngine::adapt(const PatientVolume& subject) {
    if (subject.slices.empty()) throw ContractError("ttt_adapt: subject has no slices");

    // non-continual runs leave the bundle untouched: snapshot and restore
    std::vector<std::vector<double>> saved_v, saved_m, saved_vv;
    long saved_t = opt_.t;
    if (!cfg_.continual) {
        for (const auto& ref : adaptor_refs_) {
            saved_v.push_back(ref.p->value);
            saved_m.push_back(ref.p->m);
            saved_vv.push_back(ref.p->v);
        }
        opt_.reset(adaptor_refs_);
    }

    TTTResult res;
    if (cfg_.unit == TTTUnit::patient) {
        std::vector<Tensor> xs;
        for (const auto& sl : subject.slices) xs.push_back(sl.image.pix);
        res = adapt_batch(stack(xs), subject.patient_id);
    } else {
        // per-slice adaptation: independent mini-runs, concatenated records
        res.patient_id = subject.patient_id;
        res.best_loss = 1e300;
        std::vector<Tensor> bests, initials;
        for (const auto& sl : subject.slices) {
            TTTResult r = adapt_batch(sl.image.pix, subject.patient_id);
            res.trace.insert(res.trace.end(), r.trace.begin(), r.trace.end());
            res.n_iter += r.n_iter;
            res.diverged = res.diverged || r.diverged;
            if (r.best_loss < res.best_loss) {
                res.best_loss = r.best_loss;
                res.best_adaptor_params = r.best_adaptor_params;
            }
            bests.push_back(r.best_mask);
            initials.push_back(r.initial_mask);
            if (!cfg_.continual) {
                for (size_t i = 0; i < adaptor_refs_.size(); ++i)
                    adaptor_refs_[i].p->value = saved_v[i];
                opt_.reset(adaptor_refs_);
            }
        }
        res.best_mask = stack(bests);
        res.initial_mask = stack(initials);
        for (int i = 0; i < res.best_mask.n; ++i) res.best_slices.push_back(res.best_mask.slice(i));
    }

    if (!cfg_.continual) {
        for (size_t i = 0; i < adaptor_refs_.size(); ++i) {
            adaptor_refs_[i].p->value = saved_v[i];
            adaptor_refs_[i].p->m = saved_m[i];
            adaptor_refs_[i].p->v = saved_vv[i];
        }
        opt_.t = saved_t;
    }
    return res;
}

TTTResult TTTEngine::infer_only(const PatientVolume& subject) {
    std::vector<Tensor> xs;
    for (const auto& sl : subject.slices) xs.push_back(sl.image.pix);
    Tensor x = stack(xs);
    Tensor xp = bundle_.adapt(x, false);
    Tensor probs = bundle_.segment(xp, false, false);
    TTTResult res;
    res.patient_id = subject.patient_id;
    res.best_mask = probs;
    res.initial_mask = probs;
    res.best_loss = ttt_loss(bundle_, x, cfg_.mode);
    res.trace = {res.best_loss};
    res.n_iter = 0;
    for (int i = 0; i < probs.n; ++i) res.best_slices.push_back(probs.slice(i));
    return res;
}

// ---------------------------------------------------------------------------

TTTResult ttt_adapt(ModelBundle& bundle, const PatientVolume& subject, const TTTConfig& config) {
    TTTConfig cfg = config;
    cfg.continual = false;
    TTTEngine engine(bundle, cfg);
    return engine.adapt(subject);
}

std::vector<TTTResult> ttt_continual(ModelBundle& bundle,
                                     const std::vector<PatientVolume>& subjects,
                                     const TTTConfig& config) {
    if (subjects.empty()) throw ContractError("ttt_continual: empty stream");
    TTTConfig cfg = config;
    cfg.continual = true;
    TTTEngine engine(bundle, cfg);
    std::vector<TTTResult> out;
    int adapted = 0;
    for (const auto& s : subjects) {
        if (cfg.adapt_first_k >= 0 && adapted >= cfg.adapt_first_k)
            out.push_back(engine.infer_only(s));
        else {
            out.push_back(engine.adapt(s));
            ++adapted;
        }
    }
    return out;
}

ExperimentResult evaluate_ttt_experiment(ModelBundle& bundle,
                                         const std::vector<PatientVolume>& test_set,
                                         const TTTConfig& config, int n_boot) {
    ExperimentResult out;
    std::vector<TTTResult> results;
    if (config.continual) {
        results = ttt_continual(bundle, test_set, config);
    } else {
        for (const auto& s : test_set) results.push_back(ttt_adapt(bundle, s, config));
    }

    std::vector<double> dice_b, dice_a, iou_b, iou_a, hd_b, hd_a;
    for (size_t si = 0; si < test_set.size(); ++si) {
        const auto& subject = test_set[si];
        const auto& r = results[si];
        bool has_gt = !subject.slices.empty();
        for (const auto& sl : subject.slices)
            if (!sl.mask) has_gt = false;
        if (!has_gt) {
            std::cerr << "[attt] warning: subject " << subject.patient_id
                      << " lacks ground truth, evaluation skipped\n";
            continue;
        }
        std::vector<Tensor> gt, pred_before, pred_after;
        for (size_t k = 0; k < subject.slices.size(); ++k) {
            gt.push_back(*subject.slices[k].mask);
            pred_before.push_back(harden(r.initial_mask.slice(int(k))));
            pred_after.push_back(harden(r.best_mask.slice(int(k))));
        }
        SubjectOutcome oc;
        oc.patient_id = subject.patient_id;
        oc.before = patient_record(subject.patient_id, "before", pred_before, gt);
        oc.after = patient_record(subject.patient_id, "after", pred_after, gt);
        oc.n_iter = r.n_iter;
        oc.best_loss = r.best_loss;
        oc.diverged = r.diverged;
        out.subjects.push_back(oc);
        out.records.push_back(oc.before);
        out.records.push_back(oc.after);
        dice_b.push_back(oc.before.mean_fg_dice);
        dice_a.push_back(oc.after.mean_fg_dice);
        iou_b.push_back(oc.before.mean_fg_iou);
        iou_a.push_back(oc.after.mean_fg_iou);
        hd_b.push_back(oc.before.mean_fg_hausdorff);
        hd_a.push_back(oc.after.mean_fg_hausdorff);
    }
    out.summary = aggregate(out.records);
    if (dice_b.size() >= 5) {
        out.p_dice = bootstrap_ttest(dice_b, dice_a, n_boot, config.seed);
        out.p_iou = bootstrap_ttest(iou_b, iou_a, n_boot, config.seed);
        out.p_hausdorff = bootstrap_ttest(hd_b, hd_a, n_boot, config.seed);
    }
    return out;
}

} // namespace attt
