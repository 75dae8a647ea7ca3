#include "headbias/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "headbias/checkpoint.hpp"
#include "headbias/version.hpp"

namespace headbias {

namespace {

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& message) {
    throw ConfigError("config line " + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& value, std::size_t line, const std::string& key) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(line, "key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& value, std::size_t line, const std::string& key) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        fail(line, "key '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
}

std::size_t parse_count(const std::string& value, std::size_t line, const std::string& key) {
    const std::uint64_t v = parse_u64(value, line, key);
    if (v == 0) fail(line, "key '" + key + "' must be positive");
    return static_cast<std::size_t>(v);
}

std::set<std::size_t> parse_label_list(const std::string& value, std::size_t line,
                                       const std::string& key) {
    std::set<std::size_t> labels;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) fail(line, "key '" + key + "' has an empty list entry");
        labels.insert(static_cast<std::size_t>(parse_u64(item, line, key)));
    }
    if (labels.empty()) fail(line, "key '" + key + "' expects a comma-separated label list");
    return labels;
}

struct MethodKeys {
    bool epochs = false;
    bool stage_epochs = false;  // destroy_epochs / repair_epochs
    bool beta = false;
    bool lambda_bmin = false;
    bool retention = false;
    bool eta_batch_seed = true;  // every iterative method
};

MethodKeys allowed_keys(Method method) {
    MethodKeys keys;
    switch (method) {
        case Method::bias_shift:
            keys.beta = true;
            keys.eta_batch_seed = false;
            break;
        case Method::ts_bgm:
        case Method::ts_bgrm:
            keys.stage_epochs = true;
            break;
        case Method::lb_hr:
            keys.epochs = true;
            keys.lambda_bmin = true;
            break;
        case Method::neg_grad_plus:
            keys.epochs = true;
            keys.retention = true;
            break;
        case Method::retrain:
        case Method::fine_tune:
        case Method::shallow_fine_tune:
        case Method::random_label:
            keys.epochs = true;
            break;
    }
    return keys;
}

void apply_method_key(MethodRequest& request, const std::string& key, const std::string& value,
                      std::size_t line) {
    const MethodKeys keys = allowed_keys(request.method);
    UnlearnConfig& cfg = request.config;
    const std::string name = method_name(request.method);
    auto reject = [&]() {
        fail(line, "method '" + name + "' does not use key '" + key + "'");
    };

    if (key == "eta") {
        if (!keys.eta_batch_seed) reject();
        cfg.eta = parse_double(value, line, key);
    } else if (key == "batch") {
        if (!keys.eta_batch_seed) reject();
        cfg.batch_size = parse_count(value, line, key);
    } else if (key == "seed") {
        if (!keys.eta_batch_seed) reject();
        cfg.seed = parse_u64(value, line, key);
    } else if (key == "epochs") {
        if (!keys.epochs) reject();
        cfg.epochs = parse_count(value, line, key);
    } else if (key == "destroy_epochs") {
        if (!keys.stage_epochs) reject();
        cfg.destroy_epochs = parse_count(value, line, key);
    } else if (key == "repair_epochs") {
        if (!keys.stage_epochs) reject();
        cfg.repair_epochs = parse_count(value, line, key);
    } else if (key == "beta") {
        if (!keys.beta) reject();
        if (value == "auto") {
            cfg.beta_auto = true;
        } else {
            cfg.beta_auto = false;
            cfg.beta = parse_double(value, line, key);
            if (cfg.beta <= 0.0) fail(line, "beta must be positive");
        }
    } else if (key == "lambda") {
        if (!keys.lambda_bmin) reject();
        cfg.lambda = parse_double(value, line, key);
        if (cfg.lambda < 0.0) fail(line, "lambda must be >= 0");
    } else if (key == "b_min") {
        if (!keys.lambda_bmin) reject();
        if (value == "auto") {
            cfg.b_min_auto = true;
        } else {
            cfg.b_min_auto = false;
            cfg.b_min = parse_double(value, line, key);
        }
    } else if (key == "retention_weight") {
        if (!keys.retention) reject();
        cfg.retention_weight = parse_double(value, line, key);
        if (cfg.retention_weight < 0.0 || cfg.retention_weight > 1.0) {
            fail(line, "retention_weight must lie in [0, 1]");
        }
    } else {
        fail(line, "unknown method key '" + key + "'");
    }
}

enum class Section { top, dataset, split, model, train, sweep, method };

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    config.forgotten.clear();
    config.source_text = text;

    Section section = Section::top;
    MethodRequest* current_method = nullptr;
    std::set<std::string> seen_methods;
    bool dataset_kind_set = false;
    bool split_seen = false;
    std::map<std::string, std::size_t> dataset_keys;  // key -> line, validated at the end

    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (const auto hash = s.find('#'); hash != std::string::npos) s.erase(hash);
        s = trim(s);
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']') fail(line, "unterminated section header");
            const std::string header = trim(s.substr(1, s.size() - 2));
            if (header == "dataset") {
                section = Section::dataset;
            } else if (header == "split") {
                section = Section::split;
            } else if (header == "model") {
                section = Section::model;
            } else if (header == "train") {
                section = Section::train;
            } else if (header == "sweep") {
                section = Section::sweep;
            } else if (header.rfind("method", 0) == 0) {
                const std::string name = trim(header.substr(6));
                if (name.empty()) fail(line, "method section needs a name: [method <name>]");
                Method method;
                try {
                    method = method_from_name(name);
                } catch (const ConfigError&) {
                    fail(line, "unknown method '" + name + "'");
                }
                if (!seen_methods.insert(name).second) {
                    fail(line, "method '" + name + "' requested twice");
                }
                MethodRequest request;
                request.method = method;
                request.config.method = method;
                request.config.seed = config.seed;
                config.methods.push_back(request);
                current_method = &config.methods.back();
                section = Section::method;
            } else {
                fail(line, "unknown section [" + header + "]");
            }
            continue;
        }

        const auto eq = s.find('=');
        if (eq == std::string::npos) fail(line, "expected 'key = value', got '" + s + "'");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) fail(line, "empty key");
        if (value.empty()) fail(line, "key '" + key + "' has no value");

        switch (section) {
            case Section::top:
                if (key == "seed") {
                    config.seed = parse_u64(value, line, key);
                } else if (key == "output_dir") {
                    config.output_dir = value;
                } else {
                    fail(line, "unknown top-level key '" + key + "'");
                }
                break;
            case Section::dataset:
                if (key == "kind") {
                    if (value == "blobs") {
                        config.dataset.kind = DatasetConfig::Kind::blobs;
                    } else if (value == "idx") {
                        config.dataset.kind = DatasetConfig::Kind::idx;
                    } else {
                        fail(line, "dataset kind must be 'blobs' or 'idx'");
                    }
                    dataset_kind_set = true;
                } else if (key == "classes") {
                    config.dataset.blobs.classes = parse_count(value, line, key);
                    dataset_keys.emplace("classes", line);
                } else if (key == "per_class") {
                    config.dataset.blobs.per_class = parse_count(value, line, key);
                    dataset_keys.emplace("per_class", line);
                } else if (key == "dim") {
                    config.dataset.blobs.dim = parse_count(value, line, key);
                    dataset_keys.emplace("dim", line);
                } else if (key == "separation") {
                    config.dataset.blobs.separation = parse_double(value, line, key);
                    if (config.dataset.blobs.separation <= 0.0) {
                        fail(line, "separation must be positive");
                    }
                    dataset_keys.emplace("separation", line);
                } else if (key == "images") {
                    config.dataset.idx.images = value;
                    dataset_keys.emplace("images", line);
                } else if (key == "labels") {
                    config.dataset.idx.labels = value;
                    dataset_keys.emplace("labels", line);
                } else if (key == "test_images") {
                    config.dataset.idx.test_images = value;
                    dataset_keys.emplace("test_images", line);
                } else if (key == "test_labels") {
                    config.dataset.idx.test_labels = value;
                    dataset_keys.emplace("test_labels", line);
                } else {
                    fail(line, "unknown dataset key '" + key + "'");
                }
                break;
            case Section::split:
                if (key == "forgotten") {
                    config.forgotten = parse_label_list(value, line, key);
                    split_seen = true;
                } else {
                    fail(line, "unknown split key '" + key + "'");
                }
                break;
            case Section::model:
                if (key == "hidden") {
                    config.hidden = static_cast<std::size_t>(parse_u64(value, line, key));
                } else if (key == "features") {
                    config.features = parse_count(value, line, key);
                } else {
                    fail(line, "unknown model key '" + key + "'");
                }
                break;
            case Section::train:
                if (key == "eta") {
                    config.train.eta = parse_double(value, line, key);
                    if (config.train.eta <= 0.0) fail(line, "eta must be positive");
                } else if (key == "epochs") {
                    config.train.epochs = parse_count(value, line, key);
                } else if (key == "batch") {
                    config.train.batch_size = parse_count(value, line, key);
                } else {
                    fail(line, "unknown train key '" + key + "'");
                }
                break;
            case Section::sweep:
                if (key == "min") {
                    config.sweep.min = parse_double(value, line, key);
                } else if (key == "max") {
                    config.sweep.max = parse_double(value, line, key);
                } else if (key == "step") {
                    config.sweep.step = parse_double(value, line, key);
                    if (config.sweep.step <= 0.0) fail(line, "sweep step must be positive");
                } else {
                    fail(line, "unknown sweep key '" + key + "'");
                }
                break;
            case Section::method:
                apply_method_key(*current_method, key, value, line);
                break;
        }
    }

    // Cross-field validation, still before any work starts.
    const bool is_blobs = config.dataset.kind == DatasetConfig::Kind::blobs;
    for (const auto& [key, key_line] : dataset_keys) {
        const bool blobs_key = key == "classes" || key == "per_class" || key == "dim" ||
                               key == "separation";
        if (is_blobs && !blobs_key) {
            fail(key_line, "dataset key '" + key + "' requires kind = idx");
        }
        if (!is_blobs && blobs_key) {
            fail(key_line, "dataset key '" + key + "' requires kind = blobs");
        }
    }
    if (!is_blobs) {
        if (config.dataset.idx.images.empty() || config.dataset.idx.labels.empty() ||
            config.dataset.idx.test_images.empty() || config.dataset.idx.test_labels.empty()) {
            throw ConfigError(
                "config: idx datasets need images, labels, test_images and test_labels");
        }
    }
    if (!split_seen || config.forgotten.empty()) {
        throw ConfigError("config: a [split] section with a forgotten label list is required");
    }
    (void)dataset_kind_set;
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

// ---------------------------------------------------------------------------
// orchestration
// ---------------------------------------------------------------------------

namespace {

struct ExperimentSetup {
    Dataset train;
    Dataset test;
    ClassSplit split;
    Dataset retain_train, forget_train;
    Dataset retain_test, forget_test;
    ArchConfig arch;
    Classifier origin;
    std::uint64_t retrain_seed = 0;
};

ExperimentSetup prepare(const ExperimentConfig& config) {
    SeededRng root(config.seed);
    const std::uint64_t data_seed = root.fork_seed();
    const std::uint64_t origin_seed = root.fork_seed();
    const std::uint64_t retrain_seed = root.fork_seed();

    ExperimentSetup setup;
    if (config.dataset.kind == DatasetConfig::Kind::blobs) {
        const BlobsConfig& blobs = config.dataset.blobs;
        SeededRng data_rng(data_seed);
        const Matrix centers =
            blob_centers(blobs.classes, blobs.dim, blobs.separation, data_rng);
        setup.train = sample_blobs(centers, blobs.per_class, data_rng);
        setup.test = sample_blobs(centers, blobs.per_class, data_rng);
    } else {
        setup.train = load_idx(config.dataset.idx.images, config.dataset.idx.labels);
        setup.test = load_idx(config.dataset.idx.test_images, config.dataset.idx.test_labels);
        const std::size_t classes = std::max(setup.train.class_count, setup.test.class_count);
        setup.train.class_count = classes;
        setup.test.class_count = classes;
    }

    setup.split = ClassSplit::make(setup.train.class_count, config.forgotten);
    std::tie(setup.retain_train, setup.forget_train) =
        split_by_classes(setup.train, config.forgotten);
    std::tie(setup.retain_test, setup.forget_test) =
        split_by_classes(setup.test, config.forgotten);

    setup.arch = ArchConfig{setup.train.dim(), config.hidden, config.features,
                            setup.train.class_count};
    setup.origin = train_classifier(setup.arch, setup.train, config.train, origin_seed);
    setup.retrain_seed = retrain_seed;
    return setup;
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buffer[32];
    std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buffer;
}

UnlearnConfig retrain_config(const ExperimentConfig& config) {
    UnlearnConfig cfg;
    cfg.method = Method::retrain;
    cfg.eta = config.train.eta;
    cfg.epochs = config.train.epochs;
    cfg.batch_size = config.train.batch_size;
    return cfg;
}

void save_checkpoint_for(const std::string& name, const Classifier& model,
                         const std::string& output_dir) {
    save_checkpoint((std::filesystem::path(output_dir) / (name + ".ckpt")).string(), model);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, bool parallel) {
    ExperimentSetup setup = prepare(config);

    ExperimentReport report;
    report.version = kVersion;
    report.timestamp = utc_timestamp();
    report.seed = config.seed;
    report.config_text = config.source_text;

    SeededRng retrain_rng(setup.retrain_seed);
    const UnlearnOutcome retrain_outcome =
        retrain(setup.arch, setup.retain_train, retrain_config(config), retrain_rng);
    report.t_retrain = retrain_outcome.elapsed_seconds;

    ReportRow original_row;
    original_row.method = "original";
    original_row.result =
        evaluate_model(setup.origin, setup.retain_test, setup.forget_test, setup.split);
    report.rows.push_back(std::move(original_row));

    ReportRow retrain_row;
    retrain_row.method = "retrain";
    retrain_row.result = evaluate_model(retrain_outcome.model, setup.retain_test,
                                        setup.forget_test, setup.split);
    retrain_row.result.elapsed_seconds = retrain_outcome.elapsed_seconds;
    report.rows.push_back(std::move(retrain_row));

    auto run_one = [&](const MethodRequest& request) {
        ReportRow row;
        row.method = method_name(request.method);
        try {
            const UnlearnOutcome outcome =
                run_method(setup.origin, setup.split, setup.retain_train, setup.forget_train,
                           request.config, setup.arch);
            row.result = evaluate(outcome, setup.retain_test, setup.forget_test, setup.split,
                                  report.t_retrain);
            if (parallel) {
                row.result.elapsed_seconds.reset();
                row.result.rtr.reset();
            }
            save_checkpoint_for(row.method, outcome.model, config.output_dir);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        return row;
    };

    std::filesystem::create_directories(config.output_dir);
    save_checkpoint_for("original", setup.origin, config.output_dir);
    save_checkpoint_for("retrain", retrain_outcome.model, config.output_dir);

    if (parallel) {
        std::vector<std::future<ReportRow>> futures;
        futures.reserve(config.methods.size());
        for (const MethodRequest& request : config.methods) {
            futures.push_back(std::async(std::launch::async, run_one, request));
        }
        for (auto& f : futures) report.rows.push_back(f.get());
    } else {
        for (const MethodRequest& request : config.methods) {
            report.rows.push_back(run_one(request));
        }
    }

    {
        std::ofstream csv(std::filesystem::path(config.output_dir) / "report.csv");
        write_report_csv(report, csv);
        std::ofstream json_out(std::filesystem::path(config.output_dir) / "report.json");
        write_report_json(report, json_out);
    }
    return report;
}

// ---------------------------------------------------------------------------
// report serialization
// ---------------------------------------------------------------------------

namespace {

std::string fmt_double(double v) {
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.17g", v);
    return buffer;
}

}  // namespace

void write_report_csv(const ExperimentReport& report, std::ostream& out) {
    out << "method,retain_acc,forget_acc,time_s,rtr,bsc,mbg,mbs,leak_match\n";
    for (const ReportRow& row : report.rows) {
        out << row.method << ',';
        if (row.failed) {
            out << ",,,,,,,\n";
            continue;
        }
        const EvalResult& r = row.result;
        out << fmt_double(r.retain_acc) << ',' << fmt_double(r.forget_acc) << ',';
        if (r.elapsed_seconds) out << fmt_double(*r.elapsed_seconds);
        out << ',';
        if (r.rtr) out << fmt_double(*r.rtr);
        out << ',';
        out << fmt_double(r.bias.bsc) << ',' << fmt_double(r.bias.mbg) << ','
            << fmt_double(r.bias.mbs) << ',' << (r.bias.leakage_exact_match ? 1 : 0) << '\n';
    }
}

void write_report_json(const ExperimentReport& report, std::ostream& out) {
    nlohmann::json doc;
    doc["version"] = report.version;
    doc["timestamp"] = report.timestamp;
    doc["seed"] = report.seed;
    doc["t_retrain"] = report.t_retrain;
    doc["config"] = report.config_text;
    doc["rows"] = nlohmann::json::array();
    for (const ReportRow& row : report.rows) {
        nlohmann::json j;
        j["method"] = row.method;
        if (row.failed) {
            j["failed"] = true;
            j["error"] = row.error;
        } else {
            const EvalResult& r = row.result;
            j["retain_acc"] = r.retain_acc;
            j["forget_acc"] = r.forget_acc;
            j["time_s"] = r.elapsed_seconds ? nlohmann::json(*r.elapsed_seconds)
                                            : nlohmann::json(nullptr);
            j["rtr"] = r.rtr ? nlohmann::json(*r.rtr) : nlohmann::json(nullptr);
            j["bsc"] = r.bias.bsc;
            j["mbg"] = r.bias.mbg;
            j["mbs"] = r.bias.mbs;
            j["leak_match"] = r.bias.leakage_exact_match;
            j["leak_prediction"] = r.bias.leakage_prediction;
            j["suspected"] = r.bias_dominated_suspected;
            j["bias"] = r.bias.bias_vector;
            j["forgotten"] = r.bias.split.forgotten;
        }
        doc["rows"].push_back(std::move(j));
    }
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// checkpoint inspection
// ---------------------------------------------------------------------------

BiasReport audit_checkpoint(const std::string& path, const std::set<std::size_t>& v) {
    const auto [head, class_count] = load_checkpoint_head(path);
    const ClassSplit split = ClassSplit::make(class_count, v);
    return bias_report(head.b, split);
}

void dump_bias(const std::string& path, const std::set<std::size_t>& v, std::ostream& out) {
    const auto [head, class_count] = load_checkpoint_head(path);
    out << "class,bias,in_v\n";
    for (std::size_t c = 0; c < class_count; ++c) {
        out << c << ',' << fmt_double(head.b[c]) << ',' << (v.count(c) ? 1 : 0) << '\n';
    }
}

std::vector<SweepPoint> sweep_beta(const ExperimentConfig& config) {
    if (config.sweep.min > config.sweep.max) {
        throw ConfigError("sweep: min must not exceed max");
    }
    ExperimentSetup setup = prepare(config);
    const std::size_t steps = static_cast<std::size_t>(
        std::floor((config.sweep.max - config.sweep.min) / config.sweep.step + 1e-9));
    std::vector<SweepPoint> points;
    points.reserve(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        const double beta = config.sweep.min + static_cast<double>(i) * config.sweep.step;
        Classifier shifted = setup.origin;
        for (std::size_t c : setup.split.forgotten) shifted.head.b[c] -= beta;
        SweepPoint point;
        point.beta = beta;
        point.retain_acc = accuracy(shifted, setup.retain_test);
        point.forget_acc = accuracy(shifted, setup.forget_test);
        points.push_back(point);
    }
    return points;
}

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out) {
    out << "beta,retain_acc,forget_acc\n";
    for (const SweepPoint& p : points) {
        out << fmt_double(p.beta) << ',' << fmt_double(p.retain_acc) << ','
            << fmt_double(p.forget_acc) << '\n';
    }
}

}  // namespace headbias
