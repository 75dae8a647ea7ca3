#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "headbias/checkpoint.hpp"
#include "headbias/experiment.hpp"
#include "headbias/metrics.hpp"
#include "headbias/unlearning.hpp"
#include "headbias/version.hpp"

namespace py = pybind11;
using namespace headbias;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) return {};
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != m.cols()) {
            throw ShapeError("matrix rows must all have the same length");
        }
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
    }
    return m;
}

std::vector<std::vector<double>> matrix_to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
    }
    return rows;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Classification-head bias diagnostics for class-level unlearning";
    m.attr("__version__") = kVersion;

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<SeededRng>(m, "SeededRng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def_property_readonly("seed", &SeededRng::seed)
        .def("next_u64", &SeededRng::next_u64)
        .def("next_double", &SeededRng::next_double)
        .def("uniform", &SeededRng::uniform, py::arg("lo"), py::arg("hi"))
        .def("next_index", &SeededRng::next_index, py::arg("n"))
        .def("normal", &SeededRng::normal);

    m.def("softmax", &softmax, py::arg("logits"));
    m.def("sigmoid", &sigmoid, py::arg("x"));
    m.def(
        "affine",
        [](const std::vector<std::vector<double>>& w, const Vector& x, const Vector& b) {
            return affine(matrix_from_rows(w), x, b);
        },
        py::arg("w"), py::arg("x"), py::arg("b"));

    py::class_<Sample>(m, "Sample")
        .def(py::init([](Vector x, std::size_t y) { return Sample{std::move(x), y}; }),
             py::arg("x"), py::arg("y"))
        .def_readwrite("x", &Sample::x)
        .def_readwrite("y", &Sample::y);

    py::class_<Dataset>(m, "Dataset")
        .def(py::init())
        .def_readwrite("samples", &Dataset::samples)
        .def_readwrite("class_count", &Dataset::class_count)
        .def("__len__", &Dataset::size)
        .def_property_readonly("dim", &Dataset::dim);

    py::class_<ClassSplit>(m, "ClassSplit")
        .def_static("make", &ClassSplit::make, py::arg("class_count"), py::arg("forgotten"))
        .def_readonly("forgotten", &ClassSplit::forgotten)
        .def_readonly("retained", &ClassSplit::retained);

    m.def("make_blobs", &make_blobs, py::arg("class_count"), py::arg("per_class"),
          py::arg("dim"), py::arg("separation"), py::arg("rng"));
    m.def("split_by_classes", &split_by_classes, py::arg("dataset"), py::arg("forgotten"));
    m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));

    py::class_<ClassificationHead>(m, "ClassificationHead")
        .def_property(
            "w", [](const ClassificationHead& h) { return matrix_to_rows(h.w); },
            [](ClassificationHead& h, const std::vector<std::vector<double>>& rows) {
                h.w = matrix_from_rows(rows);
            })
        .def_readwrite("b", &ClassificationHead::b);

    py::class_<Classifier>(m, "Classifier")
        .def_readwrite("head", &Classifier::head)
        .def_readonly("class_count", &Classifier::class_count)
        .def_readonly("input_dim", &Classifier::input_dim)
        .def_property_readonly(
            "frozen", [](const Classifier& c) { return c.extractor.frozen; })
        .def("clone", [](const Classifier& c) { return c; });

    py::class_<ArchConfig>(m, "ArchConfig")
        .def(py::init([](std::size_t input_dim, std::size_t hidden, std::size_t features,
                         std::size_t class_count) {
                 return ArchConfig{input_dim, hidden, features, class_count};
             }),
             py::arg("input_dim"), py::arg("hidden") = 32, py::arg("features") = 16,
             py::arg("class_count") = 10)
        .def_readwrite("input_dim", &ArchConfig::input_dim)
        .def_readwrite("hidden", &ArchConfig::hidden)
        .def_readwrite("features", &ArchConfig::features)
        .def_readwrite("class_count", &ArchConfig::class_count);

    m.def("init_classifier", &init_classifier, py::arg("arch"), py::arg("rng"));
    m.def("forward", &forward, py::arg("model"), py::arg("x"));
    m.def("predict", &predict, py::arg("logits"));
    m.def("ce_loss", &ce_loss, py::arg("logits"), py::arg("y"));
    m.def("bias_gradient", &bias_gradient, py::arg("probs"), py::arg("y"));
    m.def("accuracy", &accuracy, py::arg("model"), py::arg("data"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init([](double eta, std::size_t epochs, std::size_t batch) {
                 return TrainConfig{eta, epochs, batch};
             }),
             py::arg("eta") = 0.05, py::arg("epochs") = 10, py::arg("batch") = 32)
        .def_readwrite("eta", &TrainConfig::eta)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("batch", &TrainConfig::batch_size);

    m.def("train_classifier", &train_classifier, py::arg("arch"), py::arg("data"),
          py::arg("config"), py::arg("seed"));

    py::enum_<Method>(m, "Method")
        .value("RETRAIN", Method::retrain)
        .value("FINETUNE", Method::fine_tune)
        .value("SHALLOW_FINETUNE", Method::shallow_fine_tune)
        .value("NEGGRAD_PLUS", Method::neg_grad_plus)
        .value("RANDOM_LABEL", Method::random_label)
        .value("BIASSHIFT", Method::bias_shift)
        .value("TSBGM", Method::ts_bgm)
        .value("TSBGRM", Method::ts_bgrm)
        .value("LBHR", Method::lb_hr);

    m.def("method_name", &method_name, py::arg("method"));
    m.def("method_from_name", &method_from_name, py::arg("name"));

    py::class_<UnlearnConfig>(m, "UnlearnConfig")
        .def(py::init())
        .def_readwrite("method", &UnlearnConfig::method)
        .def_readwrite("eta", &UnlearnConfig::eta)
        .def_readwrite("epochs", &UnlearnConfig::epochs)
        .def_readwrite("destroy_epochs", &UnlearnConfig::destroy_epochs)
        .def_readwrite("repair_epochs", &UnlearnConfig::repair_epochs)
        .def_readwrite("batch_size", &UnlearnConfig::batch_size)
        .def_readwrite("beta", &UnlearnConfig::beta)
        .def_readwrite("beta_auto", &UnlearnConfig::beta_auto)
        .def_readwrite("lambda_", &UnlearnConfig::lambda)
        .def_readwrite("b_min", &UnlearnConfig::b_min)
        .def_readwrite("b_min_auto", &UnlearnConfig::b_min_auto)
        .def_readwrite("retention_weight", &UnlearnConfig::retention_weight)
        .def_readwrite("seed", &UnlearnConfig::seed);

    py::class_<UnlearnOutcome>(m, "UnlearnOutcome")
        .def_readonly("model", &UnlearnOutcome::model)
        .def_readonly("elapsed_seconds", &UnlearnOutcome::elapsed_seconds)
        .def_readonly("method", &UnlearnOutcome::method)
        .def_readonly("config", &UnlearnOutcome::config);

    m.def("bias_shift", &bias_shift, py::arg("origin"), py::arg("split"), py::arg("beta"));
    m.def("auto_beta", &auto_beta, py::arg("origin"), py::arg("split"), py::arg("calibration"));
    m.def("run_method", &run_method, py::arg("origin"), py::arg("split"), py::arg("retain"),
          py::arg("forget"), py::arg("config"), py::arg("arch"));

    py::class_<BiasReport>(m, "BiasReport")
        .def_readonly("bias_vector", &BiasReport::bias_vector)
        .def_readonly("bsc", &BiasReport::bsc)
        .def_readonly("mbg", &BiasReport::mbg)
        .def_readonly("mbs", &BiasReport::mbs)
        .def_readonly("leakage_prediction", &BiasReport::leakage_prediction)
        .def_readonly("leakage_exact_match", &BiasReport::leakage_exact_match);

    py::class_<EvalResult>(m, "EvalResult")
        .def_readonly("retain_acc", &EvalResult::retain_acc)
        .def_readonly("forget_acc", &EvalResult::forget_acc)
        .def_readonly("elapsed_seconds", &EvalResult::elapsed_seconds)
        .def_readonly("rtr", &EvalResult::rtr)
        .def_readonly("bias", &EvalResult::bias)
        .def_readonly("bias_dominated_suspected", &EvalResult::bias_dominated_suspected);

    m.def("rtr", &rtr, py::arg("t_unlearn"), py::arg("t_retrain"));
    m.def("bsc", &bsc, py::arg("bias"), py::arg("split"));
    m.def("mbg", &mbg, py::arg("bias"), py::arg("split"));
    m.def("mbs", &mbs, py::arg("bias"), py::arg("split"));
    m.def("leakage_attack", &leakage_attack, py::arg("bias"), py::arg("k"));
    m.def("bias_report", &bias_report, py::arg("bias"), py::arg("split"));
    m.def("evaluate", &evaluate, py::arg("outcome"), py::arg("retain_test"),
          py::arg("forget_test"), py::arg("split"), py::arg("t_retrain"));

    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("model"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
    m.def("audit_checkpoint", &audit_checkpoint, py::arg("path"), py::arg("forgotten"));
}
