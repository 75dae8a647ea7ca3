#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "headbias/data.hpp"
#include "headbias/numerics.hpp"

namespace headbias {

struct AffineLayer {
    Matrix w;
    Vector b;

    bool operator==(const AffineLayer&) const = default;
};

// Stack of affine layers with tanh after each; an empty stack is the
// identity map. When frozen, parameters stay bit-identical through any
// number of optimization steps.
struct FeatureExtractor {
    std::vector<AffineLayer> layers;
    bool frozen = false;

    Vector features(const Vector& x) const;

    bool operator==(const FeatureExtractor&) const = default;
};

// Final linear layer: logits z_k = w_k . phi(x) + b_k. Row k of w and entry
// k of b belong to class k.
struct ClassificationHead {
    Matrix w;  // C x d
    Vector b;  // length C

    bool operator==(const ClassificationHead&) const = default;
};

struct Classifier {
    FeatureExtractor extractor;
    ClassificationHead head;
    std::size_t class_count = 0;
    std::size_t input_dim = 0;

    std::size_t feature_dim() const noexcept { return head.w.cols(); }

    bool operator==(const Classifier&) const = default;
};

struct ArchConfig {
    std::size_t input_dim = 0;
    std::size_t hidden = 32;
    std::size_t features = 16;
    std::size_t class_count = 0;
};

// Fresh model: weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
// all biases zero. The extractor is the two-layer MLP
// input -> hidden -> features, tanh after each layer.
Classifier init_classifier(const ArchConfig& arch, SeededRng& rng);

// How `backward` shapes the head-bias gradient.
struct GradientMode {
    enum class Kind { standard, bias_reversal, hinge_bound };

    Kind kind = Kind::standard;
    ClassSplit forgotten;  // bias_reversal and hinge_bound
    double b_min = 0.0;    // hinge_bound
    double lambda = 0.0;   // hinge_bound

    static GradientMode standard() { return {}; }
    static GradientMode bias_reversal(ClassSplit split);
    static GradientMode hinge_bound(double b_min, double lambda, ClassSplit split);
};

// Mirrors the Classifier parameter shapes; `loss` is the mean batch
// objective (cross-entropy plus any penalty term).
struct Gradients {
    std::vector<AffineLayer> extractor;
    Matrix head_w;
    Vector head_b;
    double loss = 0.0;
};

Vector forward(const Classifier& model, const Vector& x);

// Index of the maximum logit; ties go to the lowest index.
std::size_t predict(const Vector& logits);

// -log softmax(logits)[y] via log-sum-exp.
double ce_loss(const Vector& logits, std::size_t y);

// d(ce)/db_k = p_k - [k == y]. probs must sum to 1 within 1e-9.
Vector bias_gradient(const Vector& probs, std::size_t y);

// Mean-over-batch gradients of softmax cross-entropy, with the head-bias
// entries adjusted per `mode`:
//  - bias_reversal: entries for forgotten classes are sign-flipped;
//  - hinge_bound:   adds -2*lambda*(b_min - b_c) for each forgotten class c
//    with b_c < b_min, and the quadratic penalty (added once per batch)
//    to the loss.
// A frozen extractor yields exactly-zero extractor gradients.
Gradients backward(const Classifier& model, std::span<const Sample> batch,
                   const GradientMode& mode);

// theta <- theta - eta * g for every unfrozen parameter; frozen parameters
// are left untouched. Throws NumericError on non-finite gradients (the model
// is not modified).
void sgd_step(Classifier& model, const Gradients& grads, double eta);

}  // namespace headbias
