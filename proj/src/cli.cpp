#include "bsa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bsa/baselines.hpp"
#include "bsa/distance.hpp"
#include "bsa/errors.hpp"
#include "bsa/io.hpp"
#include "bsa/sequential_test.hpp"
#include "bsa/simulation.hpp"

namespace bsa {

namespace {

std::shared_ptr<std::istream> open_scores(const std::string& path) {
    if (path == "-") {
        return {&std::cin, [](std::istream*) {}};
    }
    auto file = std::make_shared<std::ifstream>(path);
    if (!*file) throw ParseError("cannot open " + path);
    return file;
}

NetConfig load_net_config(const std::string& path) {
    if (path.empty()) return NetConfig{};
    return net_config_from_json(load_json_file(path));
}

// Pulls the first batch to learn the score dimension, then replays it ahead
// of the remaining stream.
std::pair<BatchSource, int> peek_dim(BatchSource source) {
    std::optional<PairedBatch> first = source();
    const int dim = first ? static_cast<int>(first->pairs.front().a.size()) : 1;
    auto cache = std::make_shared<std::optional<PairedBatch>>(std::move(first));
    BatchSource peeked = [cache, source]() -> std::optional<PairedBatch> {
        if (*cache) {
            std::optional<PairedBatch> out = std::move(*cache);
            cache->reset();
            return out;
        }
        return source();
    };
    return {std::move(peeked), dim};
}

void print_verdict(const Verdict& v, double alpha, const std::string& label = {}) {
    const double threshold = -std::log(alpha);
    if (!label.empty()) std::cout << label << ": ";
    if (v.rejected()) {
        std::cout << "REJECTED at round " << v.rejected_at_round << " (" << v.samples_seen
                  << " samples";
        if (std::isfinite(v.final_log_wealth)) {
            std::cout << ", log wealth " << v.final_log_wealth << " >= threshold " << threshold;
        }
        std::cout << ")\n";
    } else {
        std::cout << "NOT-REJECTED after " << v.samples_seen << " samples";
        if (std::isfinite(v.final_log_wealth)) {
            std::cout << " (log wealth " << v.final_log_wealth << ", threshold " << threshold
                      << ")";
        }
        std::cout << "\n";
    }
}

void write_trace(const std::string& path, const AuditTrace& trace, const TestConfig& cfg) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open " + path + " for writing");
    out << to_json(trace, cfg).dump(2) << '\n';
}

struct AuditArgs {
    std::string scores;
    double alpha = 0.05;
    double epsilon = 0.0;
    int batch_size = 100;
    long long max_samples = 4000;
    std::uint64_t seed = 0;
    std::string net_config;
    std::string trace_out;
};

void add_audit_flags(CLI::App* cmd, AuditArgs& args, bool with_epsilon) {
    cmd->add_option("--scores", args.scores, "paired-score JSONL file, or - for stdin")
        ->required();
    cmd->add_option("--alpha", args.alpha, "significance level in (0,1)");
    if (with_epsilon) {
        cmd->add_option("--epsilon", args.epsilon, "tolerance in neural-net-distance units");
    }
    cmd->add_option("--batch-size", args.batch_size, "pairs per betting round");
    cmd->add_option("--max-samples", args.max_samples, "sample cap N");
    cmd->add_option("--seed", args.seed, "run seed");
    cmd->add_option("--net-config", args.net_config, "betting-net config JSON file");
    cmd->add_option("--trace-out", args.trace_out, "write the audit trace JSON here");
}

int do_audit(const AuditArgs& args, bool exact) {
    auto stream = open_scores(args.scores);
    auto [source, dim] = peek_dim(make_file_source(stream, args.batch_size));

    TestConfig cfg;
    cfg.alpha = args.alpha;
    cfg.epsilon = exact ? 0.0 : args.epsilon;
    cfg.batch_size = args.batch_size;
    cfg.max_samples = args.max_samples;
    cfg.dim = dim;
    cfg.seed = args.seed;
    cfg.net = load_net_config(args.net_config);
    cfg.net.input_dim = dim;

    AuditTrace trace = run_audit(source, cfg);
    write_trace(args.trace_out, trace, cfg);
    print_verdict(trace.verdict, cfg.alpha);
    return 0;
}

struct DistanceArgs {
    std::string scores;
    int batch_size = 100;
    long long max_samples = 0;  // 0: fit to the file
    int repeats = 10;
    std::uint64_t seed = 0;
    std::string net_config;
    std::string report;
    std::vector<long long> sizes;
    bool verbose = false;
};

void add_distance_flags(CLI::App* cmd, DistanceArgs& args) {
    cmd->add_option("--scores", args.scores, "reference paired-score JSONL file")->required();
    cmd->add_option("--batch-size", args.batch_size, "estimator batch size b");
    cmd->add_option("--max-samples", args.max_samples,
                    "pairs per repeat N (default: spread the file across repeats)");
    cmd->add_option("--repeats", args.repeats, "independent repeats to average");
    cmd->add_option("--seed", args.seed, "estimation seed");
    cmd->add_option("--net-config", args.net_config, "betting-net config JSON file");
    cmd->add_option("--report", args.report, "write a JSON calibration report here");
}

// Loads the whole reference file so repeats can be budgeted; calibration
// files are bounded, unlike audit streams.
std::vector<ScorePair> load_all_pairs(const std::string& path) {
    auto stream = open_scores(path);
    PairedScoreReader reader(*stream, 1024);
    std::vector<ScorePair> pairs;
    while (auto batch = reader.next()) {
        for (ScorePair& p : batch->pairs) pairs.push_back(std::move(p));
    }
    return pairs;
}

std::pair<DistanceEstimate, NetConfig> estimate_from_file(DistanceArgs& args) {
    std::vector<ScorePair> pairs = load_all_pairs(args.scores);
    if (pairs.empty()) throw InsufficientDataError("no pairs in " + args.scores);
    if (args.max_samples == 0) {
        args.max_samples = static_cast<long long>(pairs.size()) / std::max(1, args.repeats);
    }
    NetConfig net = load_net_config(args.net_config);
    net.input_dim = static_cast<int>(pairs.front().a.size());

    auto cursor = std::make_shared<std::size_t>(0);
    auto shared = std::make_shared<std::vector<ScorePair>>(std::move(pairs));
    PairSource source = [shared, cursor]() -> std::optional<ScorePair> {
        if (*cursor >= shared->size()) return std::nullopt;
        return (*shared)[(*cursor)++];
    };
    DistanceEstimate est = estimate_nn_distance(source, args.batch_size, args.max_samples, net,
                                                args.repeats, args.seed);
    return {est, net};
}

int do_calibrate(DistanceArgs args) {
    auto [est, net] = estimate_from_file(args);
    const double epsilon = std::max(0.0, est.value);
    std::cout << "epsilon " << epsilon << " (distance " << est.value << " +- "
              << est.std_across_repeats << ", b=" << est.batch_size << ", N=" << est.sample_budget
              << ", repeats=" << est.repeats << ", seed=" << args.seed << ")\n";
    if (!args.report.empty()) {
        std::ofstream out(args.report);
        if (!out) throw ParseError("cannot open " + args.report + " for writing");
        nlohmann::json j = to_json(est, args.seed);
        j["epsilon"] = epsilon;
        out << j.dump(2) << '\n';
    }
    return 0;
}

int do_distance(DistanceArgs args) {
    if (!args.sizes.empty()) {
        std::vector<ScorePair> pairs = load_all_pairs(args.scores);
        NetConfig net = load_net_config(args.net_config);
        if (pairs.empty()) throw InsufficientDataError("no pairs in " + args.scores);
        net.input_dim = static_cast<int>(pairs.front().a.size());
        auto cursor = std::make_shared<std::size_t>(0);
        auto shared = std::make_shared<std::vector<ScorePair>>(std::move(pairs));
        PairSource source = [shared, cursor]() -> std::optional<ScorePair> {
            if (*cursor >= shared->size()) return std::nullopt;
            return (*shared)[(*cursor)++];
        };
        const auto table =
            convergence_study(source, args.sizes, args.batch_size, net, args.repeats, args.seed);
        std::cout << "training_size,mean,std\n";
        for (const ConvergenceRow& row : table) {
            std::cout << row.training_size << ',' << row.mean << ',' << row.std << '\n';
        }
        return 0;
    }
    auto [est, net] = estimate_from_file(args);
    std::cout << "distance " << est.value << " (std " << est.std_across_repeats << ", b="
              << est.batch_size << ", N=" << est.sample_budget << ", repeats=" << est.repeats
              << ")\n";
    if (args.verbose) {
        std::cout << "literal average betting score " << est.literal() << " (normalized by -1)\n";
    }
    if (!args.report.empty()) {
        std::ofstream out(args.report);
        if (!out) throw ParseError("cannot open " + args.report + " for writing");
        out << to_json(est, args.seed).dump(2) << '\n';
    }
    return 0;
}

void write_records(const std::filesystem::path& dir, const std::string& stem,
                   const std::vector<RunRecord>& records) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / (stem + ".csv"));
    records_to_csv(csv, records);
    std::ofstream json(dir / (stem + ".json"));
    json << to_json(records).dump(2) << '\n';
}

nlohmann::json group_summary(const ExperimentSpec& spec, const std::vector<RunRecord>& records) {
    nlohmann::json groups = nlohmann::json::array();
    for (double eps : spec.epsilon_grid) {
        for (double sigma : spec.noise_sigmas) {
            std::vector<RunRecord> cell;
            for (const RunRecord& r : records) {
                if (r.epsilon == eps && r.sigma == sigma) cell.push_back(r);
            }
            if (cell.empty()) continue;
            const RateWithCI rate = false_positive_rate(cell);
            groups.push_back({{"epsilon", eps},
                              {"sigma", sigma},
                              {"folds", cell.size()},
                              {"rejection_rate", rate.rate},
                              {"wilson_ci", {rate.ci_lo, rate.ci_hi}}});
        }
    }
    return groups;
}

int do_simulate(const std::string& spec_path, const std::string& out_dir) {
    const ExperimentSpec spec = experiment_from_json(load_json_file(spec_path));
    const std::vector<RunRecord> records = run_experiment(spec);
    const nlohmann::json summary = group_summary(spec, records);
    if (!out_dir.empty()) {
        write_records(out_dir, "records", records);
        std::ofstream out(std::filesystem::path(out_dir) / "summary.json");
        out << summary.dump(2) << '\n';
    }
    for (const auto& g : summary) {
        std::cout << "epsilon=" << g["epsilon"] << " sigma=" << g["sigma"] << " rate="
                  << g["rejection_rate"] << " folds=" << g["folds"] << '\n';
    }
    return 0;
}

int do_sweep(const std::string& spec_path, const std::string& out_dir) {
    const ExperimentSpec spec = experiment_from_json(load_json_file(spec_path));
    const std::vector<RunRecord> records = run_experiment(spec);
    if (!out_dir.empty()) write_records(out_dir, "records", records);
    std::cout << "epsilon,detection_rate\n";
    for (const auto& [eps, rate] : epsilon_sweep(spec, records)) {
        std::cout << eps << ',' << rate << '\n';
    }
    return 0;
}

int do_baseline_ks(const std::string& scores, const std::string& spec_path,
                   const std::string& out_dir, double alpha, int batch_size) {
    if (!scores.empty()) {
        auto stream = open_scores(scores);
        Verdict v = repeated_ks_audit(make_file_source(stream, batch_size), alpha);
        print_verdict(v, alpha, "repeated-KS");
        return 0;
    }
    const ExperimentSpec spec = experiment_from_json(load_json_file(spec_path));
    const BaselineComparison cmp = run_ks_comparison(spec);
    const RateWithCI betting = false_positive_rate(cmp.betting);
    const RateWithCI ks = false_positive_rate(cmp.ks);
    std::cout << "betting rejection rate " << betting.rate << " (Wilson CI [" << betting.ci_lo
              << ", " << betting.ci_hi << "], folds=" << cmp.betting.size() << ")\n";
    std::cout << "repeated-KS rejection rate " << ks.rate << " (Wilson CI [" << ks.ci_lo << ", "
              << ks.ci_hi << "], folds=" << cmp.ks.size() << ")\n";
    if (!out_dir.empty()) {
        write_records(out_dir, "betting_records", cmp.betting);
        write_records(out_dir, "ks_records", cmp.ks);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Anytime-valid behavioral shift auditing"};
    app.require_subcommand(1);

    AuditArgs run_args, exact_args;
    CLI::App* run_cmd = app.add_subcommand("run", "sequential tolerance audit on a score file");
    add_audit_flags(run_cmd, run_args, true);
    CLI::App* exact_cmd =
        app.add_subcommand("exact", "sequential audit with the tolerance pinned to 0");
    add_audit_flags(exact_cmd, exact_args, false);

    DistanceArgs calib_args, dist_args;
    CLI::App* calib_cmd =
        app.add_subcommand("calibrate", "estimate a tolerance epsilon from reference scores");
    add_distance_flags(calib_cmd, calib_args);
    CLI::App* dist_cmd =
        app.add_subcommand("distance", "neural-net distance estimate / convergence study");
    add_distance_flags(dist_cmd, dist_args);
    dist_cmd->add_option("--sizes", dist_args.sizes,
                         "sample budgets for a convergence study (emits a table)")
        ->delimiter(',');
    dist_cmd->add_flag("--verbose", dist_args.verbose, "also print the literal estimator value");

    std::string ks_scores, ks_spec, ks_out;
    double ks_alpha = 0.05;
    int ks_batch = 25;
    CLI::App* ks_cmd = app.add_subcommand(
        "baseline-ks", "repeated Kolmogorov-Smirnov audit (uncorrected baseline)");
    ks_cmd->add_option("--scores", ks_scores, "paired-score JSONL file, or - for stdin");
    ks_cmd->add_option("--spec", ks_spec, "experiment spec JSON: compare betting vs repeated-KS");
    ks_cmd->add_option("--alpha", ks_alpha, "significance level");
    ks_cmd->add_option("--batch-size", ks_batch, "pairs per KS round");
    ks_cmd->add_option("--out", ks_out, "output directory for comparison records");

    std::string sim_spec, sim_out;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "fold-based synthetic experiment harness");
    sim_cmd->add_option("--spec", sim_spec, "experiment spec JSON file")->required();
    sim_cmd->add_option("--out", sim_out, "output directory (records.csv/.json, summary.json)");

    std::string sweep_spec, sweep_out;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "detection rate across an epsilon grid");
    sweep_cmd->add_option("--spec", sweep_spec, "experiment spec JSON file with epsilon_grid")
        ->required();
    sweep_cmd->add_option("--out", sweep_out, "output directory for records");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run_cmd->parsed()) return do_audit(run_args, false);
        if (exact_cmd->parsed()) return do_audit(exact_args, true);
        if (calib_cmd->parsed()) return do_calibrate(calib_args);
        if (dist_cmd->parsed()) return do_distance(dist_args);
        if (sim_cmd->parsed()) return do_simulate(sim_spec, sim_out);
        if (sweep_cmd->parsed()) return do_sweep(sweep_spec, sweep_out);
        if (ks_cmd->parsed()) {
            if (ks_scores.empty() == ks_spec.empty()) {
                std::cerr << "baseline-ks needs exactly one of --scores or --spec\n";
                return 2;
            }
            return do_baseline_ks(ks_scores, ks_spec, ks_out, ks_alpha, ks_batch);
        }
    } catch (const TransportError& e) {
        std::cerr << "transport error: " << e.what() << '\n';
        return 4;
    } catch (const ContractViolationError& e) {
        std::cerr << "scorer contract violation: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}

}  // namespace bsa
