#include "headbias/unlearning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace headbias {

std::string method_name(Method method) {
    switch (method) {
        case Method::retrain: return "retrain";
        case Method::fine_tune: return "finetune";
        case Method::shallow_fine_tune: return "shallow-finetune";
        case Method::neg_grad_plus: return "neggrad-plus";
        case Method::random_label: return "random-label";
        case Method::bias_shift: return "biasshift";
        case Method::ts_bgm: return "tsbgm";
        case Method::ts_bgrm: return "tsbgrm";
        case Method::lb_hr: return "lbhr";
    }
    throw ConfigError("method_name: unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "retrain") return Method::retrain;
    if (name == "finetune") return Method::fine_tune;
    if (name == "shallow-finetune") return Method::shallow_fine_tune;
    if (name == "neggrad-plus") return Method::neg_grad_plus;
    if (name == "random-label") return Method::random_label;
    if (name == "biasshift") return Method::bias_shift;
    if (name == "tsbgm") return Method::ts_bgm;
    if (name == "tsbgrm") return Method::ts_bgrm;
    if (name == "lbhr") return Method::lb_hr;
    throw ConfigError("unknown unlearning method '" + name + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

// Seconds between two steady-clock points, floored at the reporting
// resolution of one microsecond so ratios against it stay well-defined.
double elapsed_seconds(Clock::time_point start, Clock::time_point end) {
    const double s = std::chrono::duration<double>(end - start).count();
    return std::max(s, 1e-6);
}

std::vector<std::size_t> index_range(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

std::vector<Sample> gather(const Dataset& data, const std::vector<std::size_t>& order,
                           std::size_t begin, std::size_t end) {
    std::vector<Sample> batch;
    batch.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) batch.push_back(data.samples[order[i]]);
    return batch;
}

void check_iterative_cfg(const UnlearnConfig& cfg, std::size_t epochs) {
    if (epochs == 0) throw ConfigError("unlearning: epochs must be >= 1");
    if (cfg.eta <= 0.0) throw ConfigError("unlearning: eta must be positive");
    if (cfg.batch_size == 0) throw ConfigError("unlearning: batch size must be positive");
}

// Accumulates dst += scale * src over every parameter array.
void axpy(Gradients& dst, const Gradients& src, double scale) {
    for (std::size_t i = 0; i < dst.head_b.size(); ++i) dst.head_b[i] += scale * src.head_b[i];
    for (std::size_t i = 0; i < dst.head_w.size(); ++i) {
        dst.head_w.data()[i] += scale * src.head_w.data()[i];
    }
    for (std::size_t l = 0; l < dst.extractor.size(); ++l) {
        for (std::size_t i = 0; i < dst.extractor[l].b.size(); ++i) {
            dst.extractor[l].b[i] += scale * src.extractor[l].b[i];
        }
        for (std::size_t i = 0; i < dst.extractor[l].w.size(); ++i) {
            dst.extractor[l].w.data()[i] += scale * src.extractor[l].w.data()[i];
        }
    }
    dst.loss += scale * src.loss;
}

void scale_gradients(Gradients& g, double s) {
    for (double& v : g.head_b) v *= s;
    for (double& v : g.head_w.data()) v *= s;
    for (AffineLayer& layer : g.extractor) {
        for (double& v : layer.b) v *= s;
        for (double& v : layer.w.data()) v *= s;
    }
    g.loss *= s;
}

double dataset_accuracy(const Classifier& model, const Dataset& data) {
    std::size_t correct = 0;
    for (const Sample& s : data.samples) {
        if (predict(forward(model, s.x)) == s.y) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace

void sgd_train(Classifier& model, const Dataset& data, const TrainConfig& cfg,
               const GradientMode& mode, SeededRng& rng) {
    if (data.samples.empty()) throw std::invalid_argument("sgd_train: empty dataset");
    std::vector<std::size_t> order = index_range(data.size());
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, order.size());
            const std::vector<Sample> batch = gather(data, order, begin, end);
            const Gradients grads = backward(model, batch, mode);
            if (!std::isfinite(grads.loss)) {
                throw NumericError("sgd_train: non-finite loss at epoch " +
                                   std::to_string(epoch));
            }
            sgd_step(model, grads, cfg.eta);
        }
    }
}

Classifier train_classifier(const ArchConfig& arch, const Dataset& data, const TrainConfig& cfg,
                            std::uint64_t seed) {
    SeededRng rng(seed);
    Classifier model = init_classifier(arch, rng);
    sgd_train(model, data, cfg, GradientMode::standard(), rng);
    return model;
}

UnlearnOutcome bias_shift(const Classifier& origin, const ClassSplit& split, double beta) {
    if (beta <= 0.0) throw ConfigError("bias_shift: beta must be positive");
    UnlearnOutcome outcome;
    outcome.method = Method::bias_shift;
    outcome.config.method = Method::bias_shift;
    outcome.config.beta = beta;
    outcome.model = origin;
    const auto start = Clock::now();
    for (std::size_t c : split.forgotten) outcome.model.head.b[c] -= beta;
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    return outcome;
}

double auto_beta(const Classifier& origin, const ClassSplit& split, const Dataset& calibration) {
    if (calibration.samples.empty()) {
        throw std::invalid_argument("auto_beta: empty calibration set");
    }
    constexpr double kCap = 4096.0;  // 2^12
    for (double beta = 1.0; beta <= kCap; beta *= 2.0) {
        Classifier shifted = origin;
        for (std::size_t c : split.forgotten) shifted.head.b[c] -= beta;
        if (dataset_accuracy(shifted, calibration) == 0.0) return beta;
    }
    return kCap;
}

namespace {

UnlearnOutcome timed_train(const Classifier& origin, const Dataset& data,
                           const UnlearnConfig& cfg, Method method, bool freeze_extractor,
                           const GradientMode& mode) {
    check_iterative_cfg(cfg, cfg.epochs);
    UnlearnOutcome outcome;
    outcome.method = method;
    outcome.config = cfg;
    outcome.config.method = method;
    outcome.model = origin;
    outcome.model.extractor.frozen = freeze_extractor || origin.extractor.frozen;
    SeededRng rng(cfg.seed);
    const TrainConfig train{cfg.eta, cfg.epochs, cfg.batch_size};
    const auto start = Clock::now();
    sgd_train(outcome.model, data, train, mode, rng);
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    outcome.model.extractor.frozen = origin.extractor.frozen;
    return outcome;
}

}  // namespace

UnlearnOutcome fine_tune(const Classifier& origin, const Dataset& retain,
                         const UnlearnConfig& cfg) {
    return timed_train(origin, retain, cfg, Method::fine_tune, false, GradientMode::standard());
}

UnlearnOutcome shallow_fine_tune(const Classifier& origin, const Dataset& retain,
                                 const UnlearnConfig& cfg) {
    return timed_train(origin, retain, cfg, Method::shallow_fine_tune, true,
                       GradientMode::standard());
}

UnlearnOutcome retrain(const ArchConfig& arch, const Dataset& retain, const UnlearnConfig& cfg,
                       SeededRng& rng) {
    check_iterative_cfg(cfg, cfg.epochs);
    UnlearnOutcome outcome;
    outcome.method = Method::retrain;
    outcome.config = cfg;
    outcome.config.method = Method::retrain;
    const TrainConfig train{cfg.eta, cfg.epochs, cfg.batch_size};
    const auto start = Clock::now();
    outcome.model = init_classifier(arch, rng);
    sgd_train(outcome.model, retain, train, GradientMode::standard(), rng);
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    return outcome;
}

UnlearnOutcome neg_grad_plus(const Classifier& origin, const Dataset& retain,
                             const Dataset& forget, const UnlearnConfig& cfg) {
    check_iterative_cfg(cfg, cfg.epochs);
    if (cfg.retention_weight < 0.0 || cfg.retention_weight > 1.0) {
        throw ConfigError("neggrad-plus: retention_weight must lie in [0, 1]");
    }
    if (retain.samples.empty() || forget.samples.empty()) {
        throw std::invalid_argument("neggrad-plus: retain and forget sets must be non-empty");
    }
    UnlearnOutcome outcome;
    outcome.method = Method::neg_grad_plus;
    outcome.config = cfg;
    outcome.config.method = Method::neg_grad_plus;
    outcome.model = origin;

    // Separate streams so the retain batch order matches a fine_tune run
    // with the same seed.
    SeededRng retain_rng(cfg.seed);
    SeededRng forget_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const double w = cfg.retention_weight;

    const auto start = Clock::now();
    std::vector<std::size_t> retain_order = index_range(retain.size());
    std::vector<std::size_t> forget_order = index_range(forget.size());
    std::size_t forget_pos = forget.size();  // forces an initial shuffle
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(retain_order, retain_rng);
        for (std::size_t begin = 0; begin < retain_order.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, retain_order.size());
            const std::vector<Sample> retain_batch = gather(retain, retain_order, begin, end);
            Gradients combined = backward(outcome.model, retain_batch, GradientMode::standard());
            const double retain_loss = combined.loss;
            scale_gradients(combined, w);

            if (forget_pos >= forget_order.size()) {
                shuffle(forget_order, forget_rng);
                forget_pos = 0;
            }
            const std::size_t take = std::min(cfg.batch_size, forget_order.size() - forget_pos);
            const std::vector<Sample> forget_batch =
                gather(forget, forget_order, forget_pos, forget_pos + take);
            forget_pos += take;
            const Gradients ascent = backward(outcome.model, forget_batch,
                                              GradientMode::standard());
            axpy(combined, ascent, -(1.0 - w));

            const double objective = w * retain_loss - (1.0 - w) * ascent.loss;
            if (!std::isfinite(objective)) {
                throw NumericError("neggrad-plus: non-finite objective at epoch " +
                                   std::to_string(epoch));
            }
            sgd_step(outcome.model, combined, cfg.eta);
        }
    }
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    return outcome;
}

UnlearnOutcome random_label(const Classifier& origin, const Dataset& retain,
                            const Dataset& forget, const ClassSplit& split,
                            const UnlearnConfig& cfg, SeededRng& rng) {
    check_iterative_cfg(cfg, cfg.epochs);
    if (split.retained.empty()) throw ConfigError("random-label: retained set is empty");
    UnlearnOutcome outcome;
    outcome.method = Method::random_label;
    outcome.config = cfg;
    outcome.config.method = Method::random_label;
    outcome.model = origin;

    const std::vector<std::size_t> retained(split.retained.begin(), split.retained.end());
    const auto start = Clock::now();
    Dataset mixed;
    mixed.class_count = retain.class_count;
    mixed.samples = retain.samples;
    for (Sample s : forget.samples) {
        s.y = retained[rng.next_index(retained.size())];
        mixed.samples.push_back(std::move(s));
    }
    const TrainConfig train{cfg.eta, cfg.epochs, cfg.batch_size};
    sgd_train(outcome.model, mixed, train, GradientMode::standard(), rng);
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    return outcome;
}

namespace {

// Shared two-stage body: destroy on forget, repair on retain, extractor
// frozen throughout. The stages differ between TS-BGM and TS-BGRM only in
// the destroy-stage gradient mode.
UnlearnOutcome two_stage(const Classifier& origin, const Dataset& retain, const Dataset& forget,
                         const UnlearnConfig& cfg, Method method,
                         const GradientMode& destroy_mode) {
    if (cfg.destroy_epochs == 0 || cfg.repair_epochs == 0) {
        throw ConfigError("two-stage unlearning: destroy and repair epochs must be >= 1");
    }
    check_iterative_cfg(cfg, cfg.destroy_epochs);
    UnlearnOutcome outcome;
    outcome.method = method;
    outcome.config = cfg;
    outcome.config.method = method;
    outcome.model = origin;
    outcome.model.extractor.frozen = true;
    SeededRng rng(cfg.seed);
    const auto start = Clock::now();
    sgd_train(outcome.model, forget, {cfg.eta, cfg.destroy_epochs, cfg.batch_size}, destroy_mode,
              rng);
    sgd_train(outcome.model, retain, {cfg.eta, cfg.repair_epochs, cfg.batch_size},
              GradientMode::standard(), rng);
    outcome.elapsed_seconds = elapsed_seconds(start, Clock::now());
    outcome.model.extractor.frozen = origin.extractor.frozen;
    return outcome;
}

}  // namespace

UnlearnOutcome ts_bgm(const Classifier& origin, const Dataset& retain, const Dataset& forget,
                      const UnlearnConfig& cfg) {
    return two_stage(origin, retain, forget, cfg, Method::ts_bgm, GradientMode::standard());
}

UnlearnOutcome ts_bgrm(const Classifier& origin, const Dataset& retain, const Dataset& forget,
                       const ClassSplit& split, const UnlearnConfig& cfg) {
    return two_stage(origin, retain, forget, cfg, Method::ts_bgrm,
                     GradientMode::bias_reversal(split));
}

UnlearnOutcome lb_hr(const Classifier& origin, const Dataset& retain, const ClassSplit& split,
                     const UnlearnConfig& cfg) {
    check_iterative_cfg(cfg, cfg.epochs);
    if (cfg.lambda < 0.0) throw ConfigError("lbhr: lambda must be >= 0");
    double bound = cfg.b_min;
    if (cfg.b_min_auto) {
        bound = std::numeric_limits<double>::infinity();
        for (std::size_t c : split.retained) bound = std::min(bound, origin.head.b[c]);
    }
    if (!std::isfinite(bound)) throw ConfigError("lbhr: b_min must be finite");
    UnlearnConfig resolved = cfg;
    resolved.b_min = bound;
    resolved.b_min_auto = false;
    UnlearnOutcome outcome =
        timed_train(origin, retain, resolved, Method::lb_hr, true,
                    GradientMode::hinge_bound(bound, cfg.lambda, split));
    return outcome;
}

UnlearnOutcome run_method(const Classifier& origin, const ClassSplit& split,
                          const Dataset& retain, const Dataset& forget, const UnlearnConfig& cfg,
                          const ArchConfig& arch) {
    switch (cfg.method) {
        case Method::bias_shift: {
            const double beta = cfg.beta_auto ? auto_beta(origin, split, forget) : cfg.beta;
            UnlearnOutcome outcome = bias_shift(origin, split, beta);
            outcome.config.beta_auto = cfg.beta_auto;
            outcome.config.seed = cfg.seed;
            return outcome;
        }
        case Method::fine_tune:
            return fine_tune(origin, retain, cfg);
        case Method::shallow_fine_tune:
            return shallow_fine_tune(origin, retain, cfg);
        case Method::retrain: {
            SeededRng rng(cfg.seed);
            return retrain(arch, retain, cfg, rng);
        }
        case Method::neg_grad_plus:
            return neg_grad_plus(origin, retain, forget, cfg);
        case Method::random_label: {
            SeededRng rng(cfg.seed);
            return random_label(origin, retain, forget, split, cfg, rng);
        }
        case Method::ts_bgm:
            return ts_bgm(origin, retain, forget, cfg);
        case Method::ts_bgrm:
            return ts_bgrm(origin, retain, forget, split, cfg);
        case Method::lb_hr:
            return lb_hr(origin, retain, split, cfg);
    }
    throw ConfigError("run_method: unknown method");
}

}  // namespace headbias
