#include "headbias/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace headbias {

namespace {

void check_split(const Vector& bias, const ClassSplit& split) {
    if (split.class_count() != bias.size()) {
        throw ShapeError("bias metrics: split covers " + std::to_string(split.class_count()) +
                         " classes but bias vector has length " + std::to_string(bias.size()));
    }
}

Vector gather_biases(const Vector& bias, const std::set<std::size_t>& classes) {
    Vector out;
    out.reserve(classes.size());
    for (std::size_t c : classes) out.push_back(bias[c]);
    return out;
}

double mean(const Vector& v) {
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
}

// Mean of the two central values for even length (documented convention).
double median(Vector v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double minimum(const Vector& v) {
    return *std::min_element(v.begin(), v.end());
}

}  // namespace

double accuracy(const Classifier& model, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("accuracy: empty dataset");
    std::size_t correct = 0;
    for (const Sample& s : data.samples) {
        if (predict(forward(model, s.x)) == s.y) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(data.size());
}

double rtr(double t_unlearn, double t_retrain) {
    if (t_unlearn <= 0.0 || t_retrain <= 0.0) {
        throw std::invalid_argument("rtr: both times must be positive");
    }
    return t_unlearn / t_retrain * 100.0;
}

double bsc(const Vector& bias, const ClassSplit& split) {
    check_split(bias, split);
    const double gap = mean(gather_biases(bias, split.forgotten)) -
                       mean(gather_biases(bias, split.retained));
    return 100.0 / (1.0 + std::abs(gap));
}

double mbg(const Vector& bias, const ClassSplit& split) {
    check_split(bias, split);
    return 100.0 * sigmoid(median(gather_biases(bias, split.forgotten)) -
                           minimum(gather_biases(bias, split.retained)));
}

double mbs(const Vector& bias, const ClassSplit& split) {
    check_split(bias, split);
    return 100.0 * sigmoid(minimum(gather_biases(bias, split.forgotten)) -
                           minimum(gather_biases(bias, split.retained)));
}

std::set<std::size_t> leakage_attack(const Vector& bias, std::size_t k) {
    if (k == 0 || k >= bias.size()) {
        throw std::invalid_argument("leakage_attack: k must satisfy 1 <= k < class count");
    }
    std::vector<std::size_t> order(bias.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    // Stable sort on value keeps the lowest index first among ties.
    std::stable_sort(order.begin(), order.end(),
                     [&bias](std::size_t a, std::size_t b) { return bias[a] < bias[b]; });
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k)};
}

BiasReport bias_report(const Vector& bias, const ClassSplit& split) {
    BiasReport report;
    report.bias_vector = bias;
    report.split = split;
    report.bsc = bsc(bias, split);
    report.mbg = mbg(bias, split);
    report.mbs = mbs(bias, split);
    report.leakage_prediction = leakage_attack(bias, split.forgotten.size());
    report.leakage_exact_match = report.leakage_prediction == split.forgotten;
    return report;
}

EvalResult evaluate_model(const Classifier& model, const Dataset& retain_test,
                          const Dataset& forget_test, const ClassSplit& split) {
    EvalResult result;
    result.retain_acc = accuracy(model, retain_test);
    result.forget_acc = accuracy(model, forget_test);
    result.bias = bias_report(model.head.b, split);
    result.bias_dominated_suspected = result.forget_acc == 0.0 && result.bias.mbs < 25.0;
    return result;
}

EvalResult evaluate(const UnlearnOutcome& outcome, const Dataset& retain_test,
                    const Dataset& forget_test, const ClassSplit& split, double t_retrain) {
    if (retain_test.samples.empty() || forget_test.samples.empty()) {
        throw std::invalid_argument("evaluate: held-out sets must be non-empty");
    }
    EvalResult result = evaluate_model(outcome.model, retain_test, forget_test, split);
    result.elapsed_seconds = outcome.elapsed_seconds;
    result.rtr = rtr(outcome.elapsed_seconds, t_retrain);
    return result;
}

}  // namespace headbias
