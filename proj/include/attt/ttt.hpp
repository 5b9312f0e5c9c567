#pragma once

#include <string>
#include <vector>

#include "attt/datagen.hpp"
#include "attt/losses.hpp"
#include "attt/metrics.hpp"
#include "attt/nets.hpp"

namespace attt {

enum class TTTMode { adversarial, reconstruction, both };
enum class TTTUnit { patient, slice };

struct TTTConfig {
    int patience = 200;
    int max_iter = 1000;
    TTTMode mode = TTTMode::adversarial;
    TTTUnit unit = TTTUnit::patient;
    bool continual = false;
    double learning_rate = 1e-4;
    uint64_t seed = 0;
    // continual streams: adapt only the first k subjects, then run plain
    // inference on the rest (-1 adapts the whole stream)
    int adapt_first_k = -1;

    void validate() const {
        if (patience < 1 || patience > max_iter)
            throw ConfigError("TTTConfig: need 0 < patience <= max_iter");
        if (learning_rate <= 0.0) throw ConfigError("TTTConfig: positive learning rate required");
    }
};

struct TTTResult {
    std::string patient_id;
    Tensor best_mask;                 // slices stacked along the batch axis
    std::vector<Tensor> best_slices;  // per-slice view of best_mask
    double best_loss = 0.0;
    int n_iter = 0;
    std::vector<double> trace;
    Tensor initial_mask;
    bool diverged = false;
    std::vector<double> best_adaptor_params; // snapshot at the argmin step
};

// True iff the trace reached max_iter or no new global minimum appeared
// within the last `patience` entries.
bool stopping_check(const std::vector<double>& trace, int patience, int max_iter);

// Label-free adaptation loss on one batch of slices: adversarial
// 1/2 mean[d(segment(adapt(x)))^2], reconstruction MAE(adapt(x), decoded),
// or their unweighted sum.
double ttt_loss(ModelBundle& bundle, const Tensor& x, TTTMode mode);

// Per-subject test-time training against the frozen discriminator. Only the
// adaptor is mutated while running; in non-continual mode the adaptor and
// optimizer state are restored afterwards, so the bundle is unchanged.
TTTResult ttt_adapt(ModelBundle& bundle, const PatientVolume& subject, const TTTConfig& config);

// Online continual adaptation: adaptor and optimizer state persist across
// the stream; each subject is adapted exactly once, in order.
std::vector<TTTResult> ttt_continual(ModelBundle& bundle,
                                     const std::vector<PatientVolume>& subjects,
                                     const TTTConfig& config);

struct SubjectOutcome {
    std::string patient_id;
    MetricRecord before, after;
    int n_iter = 0;
    double best_loss = 0.0;
    bool diverged = false;
};

struct ExperimentResult {
    std::vector<SubjectOutcome> subjects;
    std::vector<MetricRecord> records; // before/after per patient, flattened
    MetricSummary summary;
    double p_dice = 1.0, p_iou = 1.0, p_hausdorff = 1.0;
};

// Before/after metrics per subject; ground truth is consumed only here, the
// adaptation itself never sees a mask.
ExperimentResult evaluate_ttt_experiment(ModelBundle& bundle,
                                         const std::vector<PatientVolume>& test_set,
                                         const TTTConfig& config, int n_boot = 10000);

// Internal engine, exposed so continual streams and tests can drive single
// subjects while keeping optimizer state.
class TTTEngine {
public:
    TTTEngine(ModelBundle& bundle, const TTTConfig& cfg);
    TTTResult adapt(const PatientVolume& subject);
    TTTResult infer_only(const PatientVolume& subject); // no adaptation

private:
    TTTResult adapt_batch(const Tensor& x, const std::string& patient_id);
    double loss_and_grad(const Tensor& x, bool want_grad);

    ModelBundle& bundle_;
    TTTConfig cfg_;
    Adam opt_;
    std::vector<ParamRef> adaptor_refs_;
    Tensor last_probs_;
};

} // namespace attt
