#pragma once

#include <optional>
#include <set>

#include "headbias/model.hpp"
#include "headbias/unlearning.hpp"

namespace headbias {

// Bias-oriented view of one model's classification head. All three scores
// depend only on differences between bias entries:
//   bsc = 100 / (1 + |mean(b_V) - mean(b_R)|)
//   mbg = 100 * sigmoid(median(b_V) - min(b_R))
//   mbs = 100 * sigmoid(min(b_V) - min(b_R))
// For an even-sized forgotten set the median is the mean of the two central
// values.
struct BiasReport {
    Vector bias_vector;
    ClassSplit split;
    double bsc = 0.0;
    double mbg = 0.0;
    double mbs = 0.0;
    std::set<std::size_t> leakage_prediction;
    bool leakage_exact_match = false;
};

struct EvalResult {
    double retain_acc = 0.0;
    double forget_acc = 0.0;
    std::optional<double> elapsed_seconds;
    std::optional<double> rtr;
    BiasReport bias;
    // Shortcut alarm: forget accuracy exactly 0 while mbs < 25.
    bool bias_dominated_suspected = false;
};

// 100 * correct / |data|, using predict's lowest-index tie-break.
double accuracy(const Classifier& model, const Dataset& data);

// (t_unlearn / t_retrain) * 100. Both times must be positive.
double rtr(double t_unlearn, double t_retrain);

double bsc(const Vector& bias, const ClassSplit& split);
double mbg(const Vector& bias, const ClassSplit& split);
double mbs(const Vector& bias, const ClassSplit& split);

// The k labels with the smallest bias values, ties to the lowest index.
// Requires 1 <= k < bias.size().
std::set<std::size_t> leakage_attack(const Vector& bias, std::size_t k);

// Computes all bias metrics plus the bottom-|V| attack for one bias vector.
BiasReport bias_report(const Vector& bias, const ClassSplit& split);

// Accuracy on both held-out splits, RTR against t_retrain, and the bias
// report for the outcome's model.
EvalResult evaluate(const UnlearnOutcome& outcome, const Dataset& retain_test,
                    const Dataset& forget_test, const ClassSplit& split, double t_retrain);

// Same, for a model with no timing attached (the Original and Retrain
// reference rows).
EvalResult evaluate_model(const Classifier& model, const Dataset& retain_test,
                          const Dataset& forget_test, const ClassSplit& split);

}  // namespace headbias
