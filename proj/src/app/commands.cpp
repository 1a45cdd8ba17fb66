#include "leakdetect/app/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <thread>

#include "leakdetect/error.hpp"
#include "leakdetect/metrics/metrics.hpp"
#include "leakdetect/nn/model_io.hpp"
#include "leakdetect/rt/detector.hpp"
#include "leakdetect/signal/peaks.hpp"
#include "leakdetect/sim/trace_io.hpp"
#include "leakdetect/train/trainer.hpp"

namespace leakdetect::app {

namespace {

using json = nlohmann::ordered_json;

constexpr int kDatasetMetaVersion = 1;

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void print_header(const RunConfig& config, std::ostream& out)
{
    out << "seed=" << config.seed << " config_digest=" << config.digest() << '\n';
}

void prepare_out_dir(const fs::path& dir)
{
    if (dir.empty()) throw Error(ErrorCode::usage, "an output directory is required");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw Error(ErrorCode::io, "cannot create output directory " + dir.string());
    const fs::path probe = dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw Error(ErrorCode::io, "output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
}

void require_file(const fs::path& p, const char* what)
{
    if (p.empty()) throw Error(ErrorCode::usage, std::string(what) + " path is required");
    if (!fs::is_regular_file(p)) throw Error(ErrorCode::io, std::string(what) + " not found: " + p.string());
}

void write_json(const fs::path& path, const json& doc)
{
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
}

json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::data, path.string() + ": " + e.what());
    }
}

std::vector<fs::path> trace_files(const fs::path& dir)
{
    if (!fs::is_directory(dir)) throw Error(ErrorCode::io, "trace directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("trace_") && name.ends_with(".csv")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::data, "no trace_*.csv files in " + dir.string());
    return files;
}

signal::DatasetOptions dataset_options(const RunConfig& c)
{
    signal::DatasetOptions o;
    o.sequence_length = c.sequence_length;
    o.seed = c.seed;
    o.min_cycle_samples = c.min_cycle_samples;
    o.train_fraction = c.train_fraction;
    return o;
}

const char* direction_name(signal::Direction d) { return d == signal::Direction::extend ? "extend" : "retract"; }

}  // namespace

std::vector<sim::LeakClass> parse_classes(const std::string& spec)
{
    if (spec == "all") return {sim::LeakClass::NoLeak, sim::LeakClass::LowLeak, sim::LeakClass::HighLeak};
    std::vector<sim::LeakClass> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        sim::LeakClass c;
        if (item == "none") {
            c = sim::LeakClass::NoLeak;
        } else if (item == "low") {
            c = sim::LeakClass::LowLeak;
        } else if (item == "high") {
            c = sim::LeakClass::HighLeak;
        } else {
            throw Error(ErrorCode::usage, "unknown class '" + item + "' (use all or none,low,high)");
        }
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    if (out.empty()) throw Error(ErrorCode::usage, "no classes selected");
    return out;
}

void cmd_simulate(const RunConfig& config, const SimulateOptions& options, std::ostream& out)
{
    if (config.sim.n_cycles < 1) throw Error(ErrorCode::usage, "cycles must be >= 1");
    config.validate();
    prepare_out_dir(options.out_dir);
    print_header(config, out);

    for (const auto c : options.classes) {
        sim::ActuatorParams params = config.actuator;
        params.leak_coefficient = sim::leak_coefficient(c, config.sim.leak);
        double p1_sum = 0.0, speed_sum = 0.0;
        for (int rep = 0; rep < config.repetitions; ++rep) {
            sim::SimConfig sc = config.sim;
            sc.seed = trace_seed(config.seed, c, rep);
            const auto trace = sim::run_cycles(params, sc, c);
            char name[64];
            std::snprintf(name, sizeof name, "trace_%s_%03d.csv", std::string(sim::to_string(c)).c_str(), rep);
            sim::write_trace_csv(options.out_dir / name, trace);
            p1_sum += sim::mean_extension_pressure(trace);
            speed_sum += sim::mean_extension_speed(trace);
        }
        const double n = config.repetitions;
        out << "class=" << sim::to_string(c) << " k_leak=" << fmt(params.leak_coefficient)
            << " traces=" << config.repetitions << " mean_extension_p1=" << fmt(p1_sum / n)
            << " mean_extension_speed=" << fmt(speed_sum / n) << '\n';
    }
}

void cmd_dataset(const RunConfig& config, const DatasetCommandOptions& options, std::ostream& out)
{
    config.validate();
    const auto files = trace_files(options.traces_dir);
    prepare_out_dir(options.out_dir);
    print_header(config, out);

    std::vector<sim::Trace> traces;
    traces.reserve(files.size());
    for (const auto& f : files) traces.push_back(sim::read_trace_csv(f));

    const auto ds = signal::build_dataset(traces, dataset_options(config));
    signal::write_split_csv(options.out_dir / "train.csv", ds.train);
    signal::write_split_csv(options.out_dir / "test.csv", ds.test);

    const double min_prominence = config.peak_prominence_fraction * (ds.train_max - ds.train_min);
    {
        std::ofstream peaks(options.out_dir / "peaks.csv");
        if (!peaks) throw Error(ErrorCode::io, "cannot write peaks.csv");
        peaks << "trace,segment,direction,label,index,value,prominence\n";
        for (std::size_t ti = 0; ti < traces.size(); ++ti) {
            const auto segments = signal::segment_cycles(traces[ti], config.min_cycle_samples);
            for (std::size_t si = 0; si < segments.size(); ++si) {
                const auto& seg = segments[si];
                for (const auto& p : signal::detect_peaks(seg.samples, min_prominence, config.peak_min_distance)) {
                    peaks << files[ti].filename().string() << ',' << si << ',' << direction_name(seg.direction) << ','
                          << static_cast<int>(seg.label) << ',' << p.index << ',' << fmt(p.value) << ','
                          << fmt(p.prominence) << '\n';
                }
            }
        }
    }

    std::array<std::size_t, 3> train_counts{}, test_counts{};
    for (const auto& s : ds.train) ++train_counts[static_cast<std::size_t>(s.label_code())];
    for (const auto& s : ds.test) ++test_counts[static_cast<std::size_t>(s.label_code())];
    json meta;
    meta["schema_version"] = kDatasetMetaVersion;
    meta["sequence_length"] = ds.sequence_length;
    meta["seed"] = ds.seed;
    meta["norm"] = {{"mean", ds.norm.mean}, {"std", ds.norm.std}};
    meta["train_min"] = ds.train_min;
    meta["train_max"] = ds.train_max;
    meta["train_per_class"] = train_counts;
    meta["test_per_class"] = test_counts;
    meta["config_digest"] = config.digest();
    write_json(options.out_dir / "dataset.json", meta);

    out << "traces=" << traces.size() << " train=" << ds.train.size() << " test=" << ds.test.size()
        << " sequence_length=" << ds.sequence_length << " norm_mean=" << fmt(ds.norm.mean)
        << " norm_std=" << fmt(ds.norm.std) << '\n';
}

signal::Dataset load_dataset_dir(const fs::path& dir)
{
    require_file(dir / "dataset.json", "dataset metadata");
    require_file(dir / "train.csv", "train split");
    require_file(dir / "test.csv", "test split");
    const json meta = read_json(dir / "dataset.json");
    signal::Dataset ds;
    try {
        if (meta.at("schema_version").get<int>() != kDatasetMetaVersion)
            throw Error(ErrorCode::incompatible, "unsupported dataset schema_version");
        ds.sequence_length = meta.at("sequence_length").get<std::size_t>();
        ds.seed = meta.at("seed").get<std::uint64_t>();
        ds.norm.mean = meta.at("norm").at("mean").get<double>();
        ds.norm.std = meta.at("norm").at("std").get<double>();
        ds.train_min = meta.at("train_min").get<double>();
        ds.train_max = meta.at("train_max").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::data, "dataset.json: " + std::string(e.what()));
    }
    ds.train = signal::read_split_csv(dir / "train.csv");
    ds.test = signal::read_split_csv(dir / "test.csv");
    for (const auto* split : {&ds.train, &ds.test}) {
        for (const auto& s : *split) {
            if (s.values.size() != ds.sequence_length)
                throw Error(ErrorCode::incompatible, "split rows do not match the recorded sequence length");
        }
    }
    return ds;
}

void cmd_train(const RunConfig& config, const TrainCommandOptions& options, std::ostream& out)
{
    config.validate();
    if (options.dataset_dir.empty()) throw Error(ErrorCode::usage, "--dataset is required");
    const auto ds = load_dataset_dir(options.dataset_dir);
    prepare_out_dir(options.out_dir);
    print_header(config, out);

    auto net = nn::init_network<nn::RuntimeScalar>(config.network, config.seed);
    out << "parameters=" << net.parameter_count() << " train=" << ds.train.size() << " test=" << ds.test.size()
        << " epochs=" << config.training.epochs << '\n';

    train::TrainConfig tc = config.training;
    tc.seed = config.seed;
    const auto history = train::train(net, ds, tc, [&](const train::EpochStats& e) {
        if (options.progress && (e.epoch == 1 || e.epoch % 10 == 0 || e.epoch == tc.epochs)) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "epoch=%d train_loss=%.6f train_acc=%.4f val_loss=%.6f val_acc=%.4f\n",
                          e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy);
            out << buf << std::flush;
        }
    });
    nn::save_model(options.out_dir / "model.json", net);
    train::write_history_csv(options.out_dir / "history.csv", history);
    out << "final_val_acc=" << fmt(history.epochs.back().val_accuracy) << '\n';
}

void cmd_eval(const RunConfig& config, const EvalCommandOptions& options, std::ostream& out)
{
    metrics::ConfusionMatrix3 cm;
    train::Evaluation ev;
    const bool from_matrix = !options.confusion.empty();
    if (from_matrix) {
        require_file(options.confusion, "confusion matrix");
        prepare_out_dir(options.out_dir);
        print_header(config, out);
        cm = metrics::read_confusion_csv(options.confusion);
    } else {
        require_file(options.model, "model");
        if (options.dataset_dir.empty()) throw Error(ErrorCode::usage, "--dataset or --confusion is required");
        const auto net = nn::load_model<nn::RuntimeScalar>(options.model);
        const auto ds = load_dataset_dir(options.dataset_dir);
        if (net.sequence_length != ds.sequence_length)
            throw Error(ErrorCode::incompatible, "model sequence length " + std::to_string(net.sequence_length) +
                                                     " != dataset sequence length " +
                                                     std::to_string(ds.sequence_length));
        if (!(net.norm == ds.norm))
            throw Error(ErrorCode::incompatible, "model norm stats differ from the dataset's");
        prepare_out_dir(options.out_dir);
        print_header(config, out);
        ev = train::evaluate(net, ds.test);
        cm = metrics::confusion(ev.labels, ev.predictions);
        for (int k = 0; k < metrics::kClasses; ++k) {
            const auto curve = metrics::pr_curve(ev.scores, ev.labels, k);
            metrics::write_pr_csv(options.out_dir / ("pr_class" + std::to_string(k) + ".csv"), curve);
        }
        std::ofstream pred(options.out_dir / "predictions.csv");
        if (!pred) throw Error(ErrorCode::io, "cannot write predictions.csv");
        pred << "label,predicted,p0,p1,p2\n";
        for (std::size_t i = 0; i < ev.labels.size(); ++i) {
            pred << ev.labels[i] << ',' << ev.predictions[i] << ',' << fmt(ev.scores[i][0]) << ','
                 << fmt(ev.scores[i][1]) << ',' << fmt(ev.scores[i][2]) << '\n';
        }
    }
    metrics::write_report_json(options.out_dir / "report.json", cm);

    out << "samples=" << cm.total() << " accuracy=" << fmt(metrics::accuracy(cm));
    if (!from_matrix) out << " loss=" << fmt(ev.loss);
    out << '\n';
    for (int k = 0; k < metrics::kClasses; ++k) {
        const auto m = metrics::class_metrics(cm, k);
        out << "class=" << k << " precision=" << fmt(m.precision) << " recall=" << fmt(m.recall)
            << " f1=" << fmt(m.f1) << '\n';
    }
}

void cmd_detect(const RunConfig& config, const DetectCommandOptions& options, std::ostream& out)
{
    require_file(options.model, "model");
    require_file(options.input, "input trace");
    if (!(options.budget_ms > 0.0)) throw Error(ErrorCode::usage, "latency budget must be positive");
    auto net = nn::load_model<nn::RuntimeScalar>(options.model);
    const auto trace = sim::read_trace_csv(options.input);
    prepare_out_dir(options.out_dir);
    print_header(config, out);

    rt::DetectorConfig dc;
    dc.min_cycle_samples = config.min_cycle_samples;
    dc.max_cycle_samples = config.max_cycle_samples;

    std::ofstream log(options.out_dir / "detections.jsonl");
    if (!log) throw Error(ErrorCode::io, "cannot write detections.jsonl");
    const auto emit = [&](const rt::Classification& c) {
        json rec;
        rec["cycle"] = c.cycle_index;
        rec["class"] = static_cast<int>(c.predicted);
        rec["probs"] = c.probs;
        rec["direction"] = direction_name(c.direction);
        rec["samples"] = c.samples;
        rec["latency_us"] = c.latency * 1e6;
        rec["preprocess_us"] = c.preprocess_latency * 1e6;
        log << rec.dump() << '\n';
    };

    const auto start = std::chrono::steady_clock::now();
    const auto pace = [&](std::size_t i) {
        if (!options.realtime) return;
        const auto offset = std::chrono::duration<double>(trace.t[i] - trace.t.front());
        std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(offset));
    };

    rt::LatencyReport report;
    if (options.handoff) {
        rt::AsyncDetector det(std::move(net), dc);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            pace(i);
            det.push_sample(trace.t[i], trace.p1[i], trace.u[i]);
            for (const auto& c : det.poll()) emit(c);
        }
        for (const auto& c : det.flush()) emit(c);
        report = det.latency_report();
    } else {
        rt::Detector det(std::move(net), dc);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            pace(i);
            if (auto c = det.push_sample(trace.t[i], trace.p1[i], trace.u[i])) emit(*c);
        }
        report = det.latency_report();
    }

    const double mean_ms = report.total.mean * 1e3;
    json lat;
    lat["count"] = report.count;
    lat["mode"] = options.handoff ? "handoff" : "sync";
    lat["pace"] = options.realtime ? "realtime" : "native";
    lat["latency_us"] = {{"mean", report.total.mean * 1e6}, {"p95", report.total.p95 * 1e6}, {"max", report.total.max * 1e6}};
    lat["preprocess_us"] = {
        {"mean", report.preprocess.mean * 1e6}, {"p95", report.preprocess.p95 * 1e6}, {"max", report.preprocess.max * 1e6}};
    lat["budget_ms"] = options.budget_ms;
    lat["within_budget"] = mean_ms < options.budget_ms;
    write_json(options.out_dir / "latency.json", lat);

    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "cycles=%zu latency_mean_ms=%.4f latency_p95_ms=%.4f latency_max_ms=%.4f preprocess_mean_ms=%.4f "
                  "budget_ms=%.3f within_budget=%s\n",
                  report.count, mean_ms, report.total.p95 * 1e3, report.total.max * 1e3, report.preprocess.mean * 1e3,
                  options.budget_ms, mean_ms < options.budget_ms ? "true" : "false");
    out << buf;
}

}  // namespace leakdetect::app
