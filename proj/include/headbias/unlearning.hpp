#pragma once

#include <cstdint>
#include <string>

#include "headbias/data.hpp"
#include "headbias/model.hpp"

namespace headbias {

enum class Method {
    retrain,
    fine_tune,
    shallow_fine_tune,
    neg_grad_plus,
    random_label,
    bias_shift,
    ts_bgm,
    ts_bgrm,
    lb_hr,
};

// Canonical config-file / report spellings: "retrain", "finetune",
// "shallow-finetune", "neggrad-plus", "random-label", "biasshift", "tsbgm",
// "tsbgrm", "lbhr".
std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct UnlearnConfig {
    Method method = Method::fine_tune;
    double eta = 0.05;
    std::size_t epochs = 10;          // single-stage methods
    std::size_t destroy_epochs = 2;   // ts_bgm / ts_bgrm stage 1
    std::size_t repair_epochs = 5;    // ts_bgm / ts_bgrm stage 2
    std::size_t batch_size = 32;
    double beta = 15.0;               // bias_shift, when beta_auto is off
    bool beta_auto = false;           // doubles beta from 1 until forget acc hits 0
    double lambda = 1.0;              // lb_hr
    double b_min = 0.0;               // lb_hr, when b_min_auto is off
    bool b_min_auto = true;           // default: min retained-class bias of the origin model
    double retention_weight = 0.7;    // neg_grad_plus
    std::uint64_t seed = 0;
};

struct UnlearnOutcome {
    Classifier model;
    double elapsed_seconds = 0.0;
    Method method = Method::fine_tune;
    UnlearnConfig config;
};

struct TrainConfig {
    double eta = 0.05;
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
};

// Mini-batch SGD: shuffles the sample order each epoch with `rng`, takes
// one sgd_step per batch with the mean-batch gradient. Throws NumericError
// naming the epoch when the loss goes non-finite.
void sgd_train(Classifier& model, const Dataset& data, const TrainConfig& cfg,
               const GradientMode& mode, SeededRng& rng);

// Fresh model trained on `data`; used for the origin model.
Classifier train_classifier(const ArchConfig& arch, const Dataset& data, const TrainConfig& cfg,
                            std::uint64_t seed);

// b_c <- b_c - beta for every forgotten class; no other parameter changes.
UnlearnOutcome bias_shift(const Classifier& origin, const ClassSplit& split, double beta);

// Smallest power-of-two beta (from 1, capped at 4096) that drives accuracy
// on `calibration` to zero. Returns the cap if even that is not enough.
double auto_beta(const Classifier& origin, const ClassSplit& split, const Dataset& calibration);

UnlearnOutcome fine_tune(const Classifier& origin, const Dataset& retain,
                         const UnlearnConfig& cfg);

UnlearnOutcome shallow_fine_tune(const Classifier& origin, const Dataset& retain,
                                 const UnlearnConfig& cfg);

UnlearnOutcome retrain(const ArchConfig& arch, const Dataset& retain, const UnlearnConfig& cfg,
                       SeededRng& rng);

// Per step, minimizes
//   retention_weight * ce(retain batch) - (1 - retention_weight) * ce(forget batch).
UnlearnOutcome neg_grad_plus(const Classifier& origin, const Dataset& retain,
                             const Dataset& forget, const UnlearnConfig& cfg);

// Relabels every forget sample uniformly over the retained classes, then
// fine-tunes on retain + relabeled forget.
UnlearnOutcome random_label(const Classifier& origin, const Dataset& retain,
                            const Dataset& forget, const ClassSplit& split,
                            const UnlearnConfig& cfg, SeededRng& rng);

// Destroy-then-repair with standard gradients in both stages (the ablation
// variant). The feature extractor is frozen throughout.
UnlearnOutcome ts_bgm(const Classifier& origin, const Dataset& retain, const Dataset& forget,
                      const UnlearnConfig& cfg);

// Destroy-then-repair with forgotten-class bias-gradient reversal in the
// destroy stage. The feature extractor is frozen throughout.
UnlearnOutcome ts_bgrm(const Classifier& origin, const Dataset& retain, const Dataset& forget,
                       const ClassSplit& split, const UnlearnConfig& cfg);

// Head-only fine-tuning on retain with the lower-bound hinge penalty
// lambda * sum_{c in V} max(0, b_min - b_c)^2 keeping forgotten-class biases
// from drifting far below b_min.
UnlearnOutcome lb_hr(const Classifier& origin, const Dataset& retain, const ClassSplit& split,
                     const UnlearnConfig& cfg);

// Dispatches on cfg.method; wall-clock timing brackets exactly the method
// body. Auto-beta calibration is hyperparameter selection and runs before
// the clock starts; only the bias modification itself is timed. `arch` is
// needed only for retrain.
UnlearnOutcome run_method(const Classifier& origin, const ClassSplit& split,
                          const Dataset& retain, const Dataset& forget, const UnlearnConfig& cfg,
                          const ArchConfig& arch);

}  // namespace headbias
