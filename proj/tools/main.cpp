// headbias command line tool.
//
//   headbias run <config> [--parallel]
//   headbias audit <checkpoint> --forgotten <list>
//   headbias dump-bias <checkpoint> [--forgotten <list>] [-o <file>]
//   headbias sweep-beta <config> [-o <file>]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "headbias/experiment.hpp"
#include "headbias/version.hpp"

namespace {

std::set<std::size_t> parse_labels(const std::string& csv) {
    std::set<std::size_t> labels;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        labels.insert(std::stoul(item));
    }
    return labels;
}

void print_row_table(const headbias::ExperimentReport& report) {
    std::printf("%-18s %10s %10s %10s %10s %8s %8s %8s %5s\n", "method", "retain", "forget",
                "time_s", "rtr", "bsc", "mbg", "mbs", "leak");
    for (const headbias::ReportRow& row : report.rows) {
        if (row.failed) {
            std::printf("%-18s FAILED: %s\n", row.method.c_str(), row.error.c_str());
            continue;
        }
        const headbias::EvalResult& r = row.result;
        std::printf("%-18s %10.2f %10.2f ", row.method.c_str(), r.retain_acc, r.forget_acc);
        if (r.elapsed_seconds) {
            std::printf("%10.6f ", *r.elapsed_seconds);
        } else {
            std::printf("%10s ", "-");
        }
        if (r.rtr) {
            std::printf("%10.4g ", *r.rtr);
        } else {
            std::printf("%10s ", "-");
        }
        std::printf("%8.3g %8.3g %8.3g %5s\n", r.bias.bsc, r.bias.mbg, r.bias.mbs,
                    r.bias.leakage_exact_match ? "yes" : "no");
    }
}

int cmd_run(const std::string& config_path, bool parallel) {
    headbias::ExperimentConfig config = headbias::load_config(config_path);
    const headbias::ExperimentReport report = headbias::run_experiment(config, parallel);
    print_row_table(report);
    std::cout << "report written to " << config.output_dir << "/report.{csv,json}\n";
    return 0;
}

int cmd_audit(const std::string& checkpoint, const std::string& forgotten_csv) {
    const std::set<std::size_t> v = parse_labels(forgotten_csv);
    const headbias::BiasReport report = headbias::audit_checkpoint(checkpoint, v);
    std::printf("classes: %zu, forgotten: %zu\n", report.bias_vector.size(), v.size());
    std::printf("bsc: %.6g  mbg: %.6g  mbs: %.6g\n", report.bsc, report.mbg, report.mbs);
    std::printf("bottom-%zu bias attack predicts: {", v.size());
    bool first = true;
    for (std::size_t c : report.leakage_prediction) {
        std::printf("%s%zu", first ? "" : ", ", c);
        first = false;
    }
    std::printf("}%s\n", report.leakage_exact_match ? "  <- exact match" : "");
    if (report.leakage_exact_match || report.mbs < 25.0) {
        std::printf("verdict: SUSPICIOUS - forgotten-class biases look suppressed; "
                    "the forgotten labels may be inferable from the head\n");
        return 2;
    }
    std::printf("verdict: ok - no abnormal forgotten-class bias signature\n");
    return 0;
}

int cmd_dump_bias(const std::string& checkpoint, const std::string& forgotten_csv,
                  const std::string& out_path) {
    const std::set<std::size_t> v = parse_labels(forgotten_csv);
    if (out_path.empty()) {
        headbias::dump_bias(checkpoint, v, std::cout);
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        headbias::dump_bias(checkpoint, v, out);
        std::cout << "bias table written to " << out_path << "\n";
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_path) {
    headbias::ExperimentConfig config = headbias::load_config(config_path);
    const auto points = headbias::sweep_beta(config);
    if (out_path.empty()) {
        headbias::write_sweep_csv(points, std::cout);
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("cannot write " + out_path);
        headbias::write_sweep_csv(points, out);
        std::cout << "sweep written to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"classification-head bias diagnostics for class-level unlearning"};
    app.set_version_flag("--version", headbias::kVersion);
    app.require_subcommand(1);

    std::string config_path;
    std::string checkpoint;
    std::string forgotten_csv;
    std::string out_path;
    bool parallel = false;

    CLI::App* run = app.add_subcommand("run", "train, unlearn and evaluate from a config file");
    run->add_option("config", config_path, "experiment config file")->required();
    run->add_flag("--parallel", parallel,
                  "run methods concurrently (time/RTR columns are blanked)");

    CLI::App* audit = app.add_subcommand("audit", "inspect a checkpoint for bias signatures");
    audit->add_option("checkpoint", checkpoint, "model checkpoint")->required();
    audit->add_option("--forgotten", forgotten_csv, "comma-separated forgotten labels")
        ->required();

    CLI::App* dump = app.add_subcommand("dump-bias", "dump head biases as CSV");
    dump->add_option("checkpoint", checkpoint, "model checkpoint")->required();
    dump->add_option("--forgotten", forgotten_csv, "labels to flag in the in_v column");
    dump->add_option("-o,--output", out_path, "output file (default: stdout)");

    CLI::App* sweep = app.add_subcommand("sweep-beta", "bias-shift sweep curve as CSV");
    sweep->add_option("config", config_path, "experiment config file")->required();
    sweep->add_option("-o,--output", out_path, "output file (default: stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, parallel);
        if (audit->parsed()) return cmd_audit(checkpoint, forgotten_csv);
        if (dump->parsed()) return cmd_dump_bias(checkpoint, forgotten_csv, out_path);
        if (sweep->parsed()) return cmd_sweep(config_path, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
