#include "headbias/model.hpp"

#include <cmath>

namespace headbias {

Vector FeatureExtractor::features(const Vector& x) const {
    Vector a = x;
    for (const AffineLayer& layer : layers) {
        a = affine(layer.w, a, layer.b);
        for (double& v : a) v = std::tanh(v);
    }
    return a;
}

Classifier init_classifier(const ArchConfig& arch, SeededRng& rng) {
    if (arch.input_dim == 0 || arch.class_count == 0 || arch.features == 0) {
        throw ConfigError("init_classifier: input_dim, features and class_count must be positive");
    }
    auto init_layer = [&rng](std::size_t out_dim, std::size_t in_dim) {
        AffineLayer layer;
        layer.w = Matrix(out_dim, in_dim);
        layer.b = Vector(out_dim, 0.0);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
        for (double& v : layer.w.data()) v = rng.uniform(-bound, bound);
        return layer;
    };

    Classifier model;
    model.input_dim = arch.input_dim;
    model.class_count = arch.class_count;
    if (arch.hidden > 0) {
        model.extractor.layers.push_back(init_layer(arch.hidden, arch.input_dim));
        model.extractor.layers.push_back(init_layer(arch.features, arch.hidden));
    } else {
        model.extractor.layers.push_back(init_layer(arch.features, arch.input_dim));
    }
    AffineLayer head = init_layer(arch.class_count, arch.features);
    model.head.w = std::move(head.w);
    model.head.b = std::move(head.b);
    return model;
}

GradientMode GradientMode::bias_reversal(ClassSplit split) {
    if (split.forgotten.empty()) {
        throw ConfigError("bias_reversal: forgotten set must be non-empty");
    }
    GradientMode mode;
    mode.kind = Kind::bias_reversal;
    mode.forgotten = std::move(split);
    return mode;
}

GradientMode GradientMode::hinge_bound(double b_min, double lambda, ClassSplit split) {
    if (split.forgotten.empty()) {
        throw ConfigError("hinge_bound: forgotten set must be non-empty");
    }
    if (!std::isfinite(b_min)) throw ConfigError("hinge_bound: b_min must be finite");
    if (lambda < 0.0) throw ConfigError("hinge_bound: lambda must be >= 0");
    GradientMode mode;
    mode.kind = Kind::hinge_bound;
    mode.forgotten = std::move(split);
    mode.b_min = b_min;
    mode.lambda = lambda;
    return mode;
}

Vector forward(const Classifier& model, const Vector& x) {
    if (x.size() != model.input_dim) {
        throw ShapeError("forward: input has length " + std::to_string(x.size()) +
                         ", model expects " + std::to_string(model.input_dim));
    }
    return affine(model.head.w, model.extractor.features(x), model.head.b);
}

std::size_t predict(const Vector& logits) {
    if (logits.empty()) throw std::invalid_argument("predict: empty logits");
    std::size_t best = 0;
    for (std::size_t k = 1; k < logits.size(); ++k) {
        if (logits[k] > logits[best]) best = k;
    }
    return best;
}

double ce_loss(const Vector& logits, std::size_t y) {
    if (y >= logits.size()) {
        throw std::invalid_argument("ce_loss: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(logits.size()) +
                                    " logits");
    }
    return log_sum_exp(logits) - logits[y];
}

Vector bias_gradient(const Vector& probs, std::size_t y) {
    if (probs.empty() || !all_finite(probs)) {
        throw std::invalid_argument("bias_gradient: probs must be non-empty and finite");
    }
    if (y >= probs.size()) throw std::invalid_argument("bias_gradient: label out of range");
    double total = 0.0;
    for (double p : probs) total += p;
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("bias_gradient: probs sum to " + std::to_string(total) +
                                    ", expected 1");
    }
    Vector g = probs;
    g[y] -= 1.0;
    return g;
}

Gradients backward(const Classifier& model, std::span<const Sample> batch,
                   const GradientMode& mode) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");

    Gradients grads;
    grads.head_w = Matrix(model.head.w.rows(), model.head.w.cols());
    grads.head_b = Vector(model.head.b.size(), 0.0);
    grads.extractor.reserve(model.extractor.layers.size());
    for (const AffineLayer& layer : model.extractor.layers) {
        grads.extractor.push_back({Matrix(layer.w.rows(), layer.w.cols()),
                                   Vector(layer.b.size(), 0.0)});
    }
    const bool train_extractor = !model.extractor.frozen;

    for (const Sample& sample : batch) {
        if (sample.y >= model.class_count) {
            throw std::invalid_argument("backward: label " + std::to_string(sample.y) +
                                        " out of range");
        }
        // Forward pass, keeping each layer's activation for backprop.
        std::vector<Vector> activations;
        activations.reserve(model.extractor.layers.size() + 1);
        activations.push_back(sample.x);
        for (const AffineLayer& layer : model.extractor.layers) {
            Vector a = affine(layer.w, activations.back(), layer.b);
            for (double& v : a) v = std::tanh(v);
            activations.push_back(std::move(a));
        }
        const Vector& phi = activations.back();
        const Vector logits = affine(model.head.w, phi, model.head.b);
        grads.loss += ce_loss(logits, sample.y);

        // dL/dz_k = p_k - [k == y]
        Vector dz = softmax(logits);
        dz[sample.y] -= 1.0;

        for (std::size_t k = 0; k < model.class_count; ++k) {
            grads.head_b[k] += dz[k];
            for (std::size_t j = 0; j < phi.size(); ++j) {
                grads.head_w(k, j) += dz[k] * phi[j];
            }
        }

        if (!train_extractor || model.extractor.layers.empty()) continue;

        // d(phi) = W_head^T dz, then back through tanh layers.
        Vector delta(phi.size(), 0.0);
        for (std::size_t j = 0; j < phi.size(); ++j) {
            for (std::size_t k = 0; k < model.class_count; ++k) {
                delta[j] += model.head.w(k, j) * dz[k];
            }
        }
        for (std::size_t l = model.extractor.layers.size(); l-- > 0;) {
            const AffineLayer& layer = model.extractor.layers[l];
            const Vector& out = activations[l + 1];
            const Vector& in = activations[l];
            // tanh backprop: ds = delta * (1 - out^2)
            Vector ds(out.size());
            for (std::size_t i = 0; i < out.size(); ++i) ds[i] = delta[i] * (1.0 - out[i] * out[i]);
            AffineLayer& g = grads.extractor[l];
            for (std::size_t i = 0; i < ds.size(); ++i) {
                g.b[i] += ds[i];
                for (std::size_t j = 0; j < in.size(); ++j) g.w(i, j) += ds[i] * in[j];
            }
            if (l > 0) {
                Vector next(in.size(), 0.0);
                for (std::size_t j = 0; j < in.size(); ++j) {
                    for (std::size_t i = 0; i < ds.size(); ++i) {
                        next[j] += layer.w(i, j) * ds[i];
                    }
                }
                delta = std::move(next);
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    grads.loss *= inv_n;
    for (double& v : grads.head_b) v *= inv_n;
    for (double& v : grads.head_w.data()) v *= inv_n;
    for (AffineLayer& g : grads.extractor) {
        for (double& v : g.b) v *= inv_n;
        for (double& v : g.w.data()) v *= inv_n;
    }

    if (mode.kind == GradientMode::Kind::bias_reversal) {
        for (std::size_t c : mode.forgotten.forgotten) {
            if (c >= grads.head_b.size()) throw ShapeError("backward: forgotten class out of range");
            grads.head_b[c] = -grads.head_b[c];
        }
    } else if (mode.kind == GradientMode::Kind::hinge_bound) {
        // Penalty lambda * sum_c max(0, b_min - b_c)^2, parameters only, so
        // it enters loss and gradient once per batch.
        for (std::size_t c : mode.forgotten.forgotten) {
            if (c >= grads.head_b.size()) throw ShapeError("backward: forgotten class out of range");
            const double gap = mode.b_min - model.head.b[c];
            if (gap > 0.0) {
                grads.loss += mode.lambda * gap * gap;
                grads.head_b[c] += -2.0 * mode.lambda * gap;
            }
        }
    }
    return grads;
}

namespace {

bool grads_finite(const Gradients& grads) {
    if (!std::isfinite(grads.loss)) return false;
    if (!all_finite(grads.head_b) || !all_finite(grads.head_w.data())) return false;
    for (const AffineLayer& g : grads.extractor) {
        if (!all_finite(g.b) || !all_finite(g.w.data())) return false;
    }
    return true;
}

}  // namespace

void sgd_step(Classifier& model, const Gradients& grads, double eta) {
    if (eta <= 0.0) throw std::invalid_argument("sgd_step: eta must be positive");
    if (grads.head_b.size() != model.head.b.size() ||
        grads.head_w.rows() != model.head.w.rows() ||
        grads.head_w.cols() != model.head.w.cols() ||
        grads.extractor.size() != model.extractor.layers.size()) {
        throw ShapeError("sgd_step: gradient shapes do not match model");
    }
    if (!grads_finite(grads)) throw NumericError("sgd_step: non-finite gradient, step aborted");

    for (std::size_t i = 0; i < model.head.b.size(); ++i) {
        model.head.b[i] -= eta * grads.head_b[i];
    }
    for (std::size_t i = 0; i < model.head.w.size(); ++i) {
        model.head.w.data()[i] -= eta * grads.head_w.data()[i];
    }
    if (model.extractor.frozen) return;
    for (std::size_t l = 0; l < model.extractor.layers.size(); ++l) {
        AffineLayer& layer = model.extractor.layers[l];
        const AffineLayer& g = grads.extractor[l];
        if (g.b.size() != layer.b.size() || g.w.size() != layer.w.size()) {
            throw ShapeError("sgd_step: extractor gradient shapes do not match");
        }
        for (std::size_t i = 0; i < layer.b.size(); ++i) layer.b[i] -= eta * g.b[i];
        for (std::size_t i = 0; i < layer.w.size(); ++i) {
            layer.w.data()[i] -= eta * g.w.data()[i];
        }
    }
}

}  // namespace headbias
