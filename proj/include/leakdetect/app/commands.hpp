#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "leakdetect/app/config.hpp"
#include "leakdetect/signal/dataset.hpp"
#include "leakdetect/sim/hydraulics.hpp"

namespace leakdetect::app {

namespace fs = std::filesystem;

// Each command prints `seed=... config_digest=...` first, then a short
// summary, to `out`. Artifacts land in out_dir.

struct SimulateOptions {
    fs::path out_dir;
    std::vector<sim::LeakClass> classes{sim::LeakClass::NoLeak, sim::LeakClass::LowLeak, sim::LeakClass::HighLeak};
};
/// Writes trace_<class>_<rep>.csv for every class and repetition.
void cmd_simulate(const RunConfig& config, const SimulateOptions& options, std::ostream& out);

struct DatasetCommandOptions {
    fs::path traces_dir;
    fs::path out_dir;
};
/// Writes train.csv, test.csv, peaks.csv and dataset.json.
void cmd_dataset(const RunConfig& config, const DatasetCommandOptions& options, std::ostream& out);

/// Reads a directory written by cmd_dataset.
signal::Dataset load_dataset_dir(const fs::path& dir);

struct TrainCommandOptions {
    fs::path dataset_dir;
    fs::path out_dir;
    bool progress = true;
};
/// Writes model.json and history.csv.
void cmd_train(const RunConfig& config, const TrainCommandOptions& options, std::ostream& out);

struct EvalCommandOptions {
    fs::path model;
    fs::path dataset_dir;
    fs::path confusion;  // when set, metrics come from this matrix instead
    fs::path out_dir;
};
/// Writes report.json, pr_class{0,1,2}.csv and predictions.csv.
void cmd_eval(const RunConfig& config, const EvalCommandOptions& options, std::ostream& out);

struct DetectCommandOptions {
    fs::path model;
    fs::path input;
    fs::path out_dir;
    bool realtime = false;
    bool handoff = false;
    double budget_ms = 5.0;
};
/// Writes detections.jsonl and latency.json.
void cmd_detect(const RunConfig& config, const DetectCommandOptions& options, std::ostream& out);

std::vector<sim::LeakClass> parse_classes(const std::string& spec);

}  // namespace leakdetect::app
