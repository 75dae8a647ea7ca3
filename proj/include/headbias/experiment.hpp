#pragma once

#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "headbias/metrics.hpp"
#include "headbias/unlearning.hpp"

namespace headbias {

// Config file grammar (see README for the full key reference):
//   - '#' starts a comment, blank lines are ignored;
//   - top-level `key = value` pairs must precede the first section
//     (keys: seed, output_dir);
//   - `[dataset]`, `[split]`, `[model]`, `[train]`, `[sweep]` sections hold
//     flat key/value pairs;
//   - each `[method <name>]` block requests one unlearning method with its
//     hyperparameters; a method may appear at most once.
// Unknown sections, unknown keys, malformed values and keys a method does
// not use are hard errors; the file parses completely before any work runs.

struct BlobsConfig {
    std::size_t classes = 10;
    std::size_t per_class = 200;
    std::size_t dim = 16;
    double separation = 6.0;
};

struct IdxConfig {
    std::string images;
    std::string labels;
    std::string test_images;
    std::string test_labels;
};

struct DatasetConfig {
    enum class Kind { blobs, idx };
    Kind kind = Kind::blobs;
    BlobsConfig blobs;
    IdxConfig idx;
};

struct SweepConfig {
    double min = -20.0;
    double max = 20.0;
    double step = 1.0;
};

struct MethodRequest {
    Method method = Method::fine_tune;
    UnlearnConfig config;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "out";
    DatasetConfig dataset;
    std::set<std::size_t> forgotten = {3, 4, 5};
    std::size_t hidden = 32;
    std::size_t features = 16;
    TrainConfig train;  // origin training; also the retrain reference config
    std::vector<MethodRequest> methods;
    SweepConfig sweep;
    std::string source_text;  // raw config file contents, kept for the report snapshot
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct ReportRow {
    std::string method;
    bool failed = false;
    std::string error;
    EvalResult result;
};

struct ExperimentReport {
    std::string version;
    std::string timestamp;  // ISO-8601 UTC
    std::string config_text;
    std::uint64_t seed = 0;
    double t_retrain = 0.0;
    std::vector<ReportRow> rows;
};

// Trains the origin model once, retrains once (fixing t_retrain), runs every
// requested method from a fresh clone of the origin, and evaluates all of
// them on the same held-out splits. Writes report.csv, report.json and one
// checkpoint per row into config.output_dir. A method failure becomes a
// failed row; the remaining methods still run. With parallel=true the
// methods run concurrently on independent clones and the time/RTR columns
// are left blank (timings under contention would not be honest).
ExperimentReport run_experiment(const ExperimentConfig& config, bool parallel = false);

// CSV columns: method,retain_acc,forget_acc,time_s,rtr,bsc,mbg,mbs,leak_match.
// Numbers are printed with 17 significant digits so the CSV and JSON files
// carry bit-identical values.
void write_report_csv(const ExperimentReport& report, std::ostream& out);
void write_report_json(const ExperimentReport& report, std::ostream& out);

// Head-only checkpoint inspection: bias metrics plus the bottom-|v| attack.
BiasReport audit_checkpoint(const std::string& path, const std::set<std::size_t>& v);

// Plain CSV rows (class,bias,in_v) ordered by class index; v may be empty
// when the forgotten set is unknown.
void dump_bias(const std::string& path, const std::set<std::size_t>& v, std::ostream& out);

struct SweepPoint {
    double beta = 0.0;  // amount subtracted from each forgotten-class bias
    double retain_acc = 0.0;
    double forget_acc = 0.0;
};

// Bias-sweep curve: trains the origin model from `config`, then evaluates a
// grid of bias shifts (config.sweep) applied to clones of it.
std::vector<SweepPoint> sweep_beta(const ExperimentConfig& config);

void write_sweep_csv(const std::vector<SweepPoint>& points, std::ostream& out);

}  // namespace headbias
