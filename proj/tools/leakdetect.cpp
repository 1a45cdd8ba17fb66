#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "leakdetect/app/commands.hpp"
#include "leakdetect/error.hpp"

namespace {

using leakdetect::Error;
using leakdetect::ErrorCode;

int fail(ErrorCode code, const std::string& message)
{
    std::string flat = message;
    for (char& c : flat)
        if (c == '\n') c = ' ';
    const int status = leakdetect::exit_status(code);
    std::fprintf(stderr, "error: code=%s exit=%d message=\"%s\"\n", std::string(leakdetect::to_string(code)).c_str(),
                 status, flat.c_str());
    return status;
}

}  // namespace

int main(int argc, char** argv)
{
    namespace app = leakdetect::app;

    CLI::App cli{"Hydraulic cylinder internal-leak simulator, LSTM trainer and streaming detector"};
    cli.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out_dir;

    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "flat key = value config file");
        sub->add_option("--set", overrides, "override one config key (key=value), repeatable");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "run seed");
        sub->add_option("--out", out_dir, "output directory")->required();
    };

    app::SimulateOptions sim_opts;
    std::string classes = "all";
    int cycles = -1;
    auto* simulate = cli.add_subcommand("simulate", "simulate labeled traces");
    common(simulate);
    simulate->add_option("--classes", classes, "all or a comma list of none,low,high");
    simulate->add_option("--cycles", cycles, "extend/retract cycles per trace");

    app::DatasetCommandOptions ds_opts;
    auto* dataset = cli.add_subcommand("dataset", "segment traces into train/test splits");
    common(dataset);
    dataset->add_option("--traces", ds_opts.traces_dir, "directory of trace_*.csv")->required();

    app::TrainCommandOptions train_opts;
    bool quiet = false;
    auto* train = cli.add_subcommand("train", "train the LSTM classifier");
    common(train);
    train->add_option("--dataset", train_opts.dataset_dir, "dataset directory")->required();
    train->add_flag("--quiet", quiet, "suppress per-epoch progress");

    app::EvalCommandOptions eval_opts;
    auto* eval = cli.add_subcommand("eval", "metrics on the test split or on a confusion matrix");
    common(eval);
    eval->add_option("--model", eval_opts.model, "model.json");
    eval->add_option("--dataset", eval_opts.dataset_dir, "dataset directory");
    eval->add_option("--confusion", eval_opts.confusion, "CSV of a 3x3 confusion matrix");

    app::DetectCommandOptions det_opts;
    std::string pace = "native";
    auto* detect = cli.add_subcommand("detect", "replay a trace through the streaming detector");
    common(detect);
    detect->add_option("--model", det_opts.model, "model.json")->required();
    detect->add_option("--input", det_opts.input, "trace CSV")->required();
    detect->add_option("--pace", pace, "native or realtime")->check(CLI::IsMember({"native", "realtime"}));
    detect->add_flag("--handoff", det_opts.handoff, "classify on a worker thread");
    detect->add_option("--budget-ms", det_opts.budget_ms, "mean latency budget in ms");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(ErrorCode::usage, e.what());
    }

    try {
        app::RunConfig config;
        if (!config_path.empty()) config.load_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Error(ErrorCode::usage, "--set expects key=value, got '" + kv + "'");
            config.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_given) config.seed = seed;

        if (*simulate) {
            if (cycles != -1) {
                if (cycles < 1) throw Error(ErrorCode::usage, "--cycles must be >= 1");
                config.sim.n_cycles = cycles;
            }
            sim_opts.classes = app::parse_classes(classes);
            sim_opts.out_dir = out_dir;
            app::cmd_simulate(config, sim_opts, std::cout);
        } else if (*dataset) {
            ds_opts.out_dir = out_dir;
            app::cmd_dataset(config, ds_opts, std::cout);
        } else if (*train) {
            train_opts.out_dir = out_dir;
            train_opts.progress = !quiet;
            app::cmd_train(config, train_opts, std::cout);
        } else if (*eval) {
            eval_opts.out_dir = out_dir;
            app::cmd_eval(config, eval_opts, std::cout);
        } else if (*detect) {
            det_opts.out_dir = out_dir;
            det_opts.realtime = pace == "realtime";
            app::cmd_detect(config, det_opts, std::cout);
        }
    } catch (const Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail(ErrorCode::io, e.what());
    }
    return 0;
}
