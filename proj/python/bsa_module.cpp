#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>
#include <sstream>

#include "bsa/baselines.hpp"
#include "bsa/distance.hpp"
#include "bsa/errors.hpp"
#include "bsa/io.hpp"
#include "bsa/rng.hpp"
#include "bsa/scorer_client.hpp"
#include "bsa/sequential_test.hpp"
#include "bsa/simulation.hpp"

namespace py = pybind11;
using namespace bsa;

namespace {

// Accepts a list of scalars or a list of per-behavior vectors.
std::vector<std::vector<double>> as_scores(const py::sequence& seq) {
    std::vector<std::vector<double>> out;
    out.reserve(py::len(seq));
    for (py::handle item : seq) {
        if (py::isinstance<py::float_>(item) || py::isinstance<py::int_>(item)) {
            out.push_back({item.cast<double>()});
        } else {
            out.push_back(item.cast<std::vector<double>>());
        }
    }
    return out;
}

BatchSource paired_source(std::vector<std::vector<double>> a, std::vector<std::vector<double>> b,
                          int batch_size) {
    if (a.size() != b.size()) {
        throw DimMismatchError("scores_a and scores_b must have the same length");
    }
    struct State {
        std::vector<std::vector<double>> a, b;
        std::size_t next = 0;
        int round = 0;
    };
    auto st = std::make_shared<State>(State{std::move(a), std::move(b)});
    return [st, batch_size]() -> std::optional<PairedBatch> {
        if (st->next >= st->a.size()) return std::nullopt;
        PairedBatch batch;
        batch.round_index = ++st->round;
        while (st->next < st->a.size() &&
               static_cast<int>(batch.pairs.size()) < batch_size) {
            batch.pairs.push_back({st->a[st->next], st->b[st->next]});
            ++st->next;
        }
        return batch;
    };
}

PairSource pair_source(std::vector<std::vector<double>> a, std::vector<std::vector<double>> b) {
    if (a.size() != b.size()) {
        throw DimMismatchError("scores_a and scores_b must have the same length");
    }
    struct State {
        std::vector<std::vector<double>> a, b;
        std::size_t next = 0;
    };
    auto st = std::make_shared<State>(State{std::move(a), std::move(b)});
    return [st]() -> std::optional<ScorePair> {
        if (st->next >= st->a.size()) return std::nullopt;
        ScorePair p{st->a[st->next], st->b[st->next]};
        ++st->next;
        return p;
    };
}

TestConfig with_dim(TestConfig cfg, const std::vector<std::vector<double>>& scores) {
    if (!scores.empty()) {
        cfg.dim = static_cast<int>(scores.front().size());
        cfg.net.input_dim = cfg.dim;
    }
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_bsa, m) {
    m.doc() = "Anytime-valid behavioral shift auditing: betting-score wealth tests, "
              "neural-net distance calibration, and a repeated-KS baseline.";

    py::register_exception<Error>(m, "AuditError");

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init<>())
        .def_readwrite("input_dim", &NetConfig::input_dim)
        .def_readwrite("hidden_widths", &NetConfig::hidden_widths)
        .def_readwrite("dropout_rate", &NetConfig::dropout_rate)
        .def_readwrite("output_bound", &NetConfig::output_bound)
        .def_readwrite("learning_rate", &NetConfig::learning_rate)
        .def_readwrite("max_epochs", &NetConfig::max_epochs)
        .def_readwrite("patience", &NetConfig::patience)
        .def_readwrite("holdout_fraction", &NetConfig::holdout_fraction);

    py::class_<TestConfig>(m, "TestConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &TestConfig::alpha)
        .def_readwrite("epsilon", &TestConfig::epsilon)
        .def_readwrite("batch_size", &TestConfig::batch_size)
        .def_readwrite("max_samples", &TestConfig::max_samples)
        .def_readwrite("dim", &TestConfig::dim)
        .def_readwrite("seed", &TestConfig::seed)
        .def_readwrite("net", &TestConfig::net);

    py::class_<Verdict>(m, "Verdict")
        .def_property_readonly("rejected", &Verdict::rejected)
        .def_property_readonly("outcome",
                               [](const Verdict& v) {
                                   return v.rejected() ? "REJECTED" : "NOT-REJECTED";
                               })
        .def_readonly("rejected_at_round", &Verdict::rejected_at_round)
        .def_readonly("samples_seen", &Verdict::samples_seen)
        .def_readonly("final_log_wealth", &Verdict::final_log_wealth)
        .def("__repr__", [](const Verdict& v) {
            std::ostringstream os;
            os << "Verdict(" << (v.rejected() ? "REJECTED" : "NOT-REJECTED") << ", samples="
               << v.samples_seen << ")";
            return os.str();
        });

    py::class_<RoundRecord>(m, "RoundRecord")
        .def_readonly("round", &RoundRecord::round)
        .def_readonly("samples_seen", &RoundRecord::samples_seen)
        .def_readonly("log_score", &RoundRecord::log_score)
        .def_readonly("log_wealth", &RoundRecord::log_wealth)
        .def_readonly("holdout_objective", &RoundRecord::holdout_objective);

    py::class_<AuditTrace>(m, "AuditTrace")
        .def_readonly("verdict", &AuditTrace::verdict)
        .def_readonly("rounds", &AuditTrace::rounds)
        .def_readonly("effective_epsilon", &AuditTrace::effective_epsilon)
        .def_property_readonly("log_score_trace",
                               [](const AuditTrace& t) { return t.wealth.log_score_trace; });

    py::class_<DistanceEstimate>(m, "DistanceEstimate")
        .def_readonly("value", &DistanceEstimate::value)
        .def_readonly("batch_size", &DistanceEstimate::batch_size)
        .def_readonly("sample_budget", &DistanceEstimate::sample_budget)
        .def_readonly("repeats", &DistanceEstimate::repeats)
        .def_readonly("std_across_repeats", &DistanceEstimate::std_across_repeats)
        .def_property_readonly("literal", &DistanceEstimate::literal);

    py::class_<RunRecord>(m, "RunRecord")
        .def_readonly("fold", &RunRecord::fold)
        .def_readonly("epsilon", &RunRecord::epsilon)
        .def_readonly("sigma", &RunRecord::sigma)
        .def_readonly("verdict", &RunRecord::verdict)
        .def_readonly("seed", &RunRecord::seed);

    m.def(
        "run_audit",
        [](const py::sequence& scores_a, const py::sequence& scores_b, TestConfig cfg) {
            auto a = as_scores(scores_a);
            auto b = as_scores(scores_b);
            cfg = with_dim(cfg, a);
            return run_audit(paired_source(std::move(a), std::move(b), cfg.batch_size), cfg);
        },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("config") = TestConfig{},
        "Sequential tolerance audit over paired score arrays. The score dimension "
        "is inferred from the data.");

    m.def(
        "run_exact",
        [](const py::sequence& scores_a, const py::sequence& scores_b, TestConfig cfg) {
            auto a = as_scores(scores_a);
            auto b = as_scores(scores_b);
            cfg = with_dim(cfg, a);
            return run_exact(paired_source(std::move(a), std::move(b), cfg.batch_size), cfg);
        },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("config") = TestConfig{},
        "Audit with the tolerance pinned to zero.");

    m.def(
        "estimate_nn_distance",
        [](const py::sequence& scores_a, const py::sequence& scores_b, int batch_size,
           long long n_samples, NetConfig net, int repeats, std::uint64_t seed) {
            auto a = as_scores(scores_a);
            auto b = as_scores(scores_b);
            if (!a.empty()) net.input_dim = static_cast<int>(a.front().size());
            return estimate_nn_distance(pair_source(std::move(a), std::move(b)), batch_size,
                                        n_samples, net, repeats, seed);
        },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("batch_size") = 100,
        py::arg("n_samples") = 0, py::arg("net") = NetConfig{}, py::arg("repeats") = 10,
        py::arg("seed") = 0,
        "Neural-net distance estimate; n_samples = 0 spreads the data across repeats.");

    m.def(
        "calibrate_epsilon",
        [](const py::sequence& scores_a, const py::sequence& scores_b, int batch_size,
           long long n_samples, NetConfig net, int repeats, std::uint64_t seed) {
            auto a = as_scores(scores_a);
            auto b = as_scores(scores_b);
            if (!a.empty()) net.input_dim = static_cast<int>(a.front().size());
            if (n_samples == 0) {
                n_samples = static_cast<long long>(a.size()) / std::max(1, repeats);
            }
            return calibrate_epsilon(pair_source(std::move(a), std::move(b)), batch_size,
                                     n_samples, net, repeats, seed);
        },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("batch_size") = 100,
        py::arg("n_samples") = 0, py::arg("net") = NetConfig{}, py::arg("repeats") = 10,
        py::arg("seed") = 0, "Tolerance calibration: the distance estimate floored at zero.");

    m.def("wasserstein1", &wasserstein1, py::arg("sample_a"), py::arg("sample_b"),
          "Exact empirical 1-Wasserstein distance between scalar samples.");
    m.def("mean_shift", &mean_shift, py::arg("sample_a"), py::arg("sample_b"));

    m.def("ks_statistic", &ks_statistic, py::arg("sample_a"), py::arg("sample_b"));
    m.def("ks_pvalue", &ks_pvalue, py::arg("statistic"), py::arg("n"), py::arg("m"));
    m.def(
        "repeated_ks_audit",
        [](const std::vector<double>& scores_a, const std::vector<double>& scores_b,
           int batch_size, double alpha) {
            std::vector<std::vector<double>> a, b;
            for (double x : scores_a) a.push_back({x});
            for (double x : scores_b) b.push_back({x});
            return repeated_ks_audit(paired_source(std::move(a), std::move(b), batch_size),
                                     alpha);
        },
        py::arg("scores_a"), py::arg("scores_b"), py::arg("batch_size") = 25,
        py::arg("alpha") = 0.05,
        "Uncorrected repeated two-sample KS audit (the alpha-inflating baseline).");

    m.def(
        "sample_scores",
        [](const std::string& dist_json, long long n, std::uint64_t seed) {
            const DistributionSpec spec =
                distribution_from_json(nlohmann::json::parse(dist_json));
            std::mt19937_64 rng = make_rng(seed);
            return sample_scores(spec, n, rng);
        },
        py::arg("dist_json"), py::arg("n"), py::arg("seed") = 0,
        "Draws from a distribution spec given as JSON, e.g. "
        "'{\"family\": \"beta\", \"alpha\": 2, \"beta\": 5}'.");

    m.def(
        "run_experiment",
        [](const std::string& spec_json) {
            return run_experiment(experiment_from_json(nlohmann::json::parse(spec_json)));
        },
        py::arg("spec_json"), "Fold-based experiment harness; spec given as JSON.");

    m.def(
        "false_positive_rate",
        [](const std::vector<RunRecord>& records) {
            const RateWithCI r = false_positive_rate(records);
            return py::make_tuple(r.rate, py::make_tuple(r.ci_lo, r.ci_hi));
        },
        py::arg("records"), "Rejected fraction with its Wilson 95% interval.");

    m.def("detection_curve", &detection_curve, py::arg("records"), py::arg("sample_grid"));

    m.def(
        "fetch_scores",
        [](const std::string& endpoint, const std::vector<std::string>& texts, double timeout_s,
           int retries, int concurrency) {
            FetchOptions opt;
            opt.timeout_s = timeout_s;
            opt.retries = retries;
            opt.concurrency = concurrency;
            return fetch_scores(endpoint, texts, opt);
        },
        py::arg("endpoint"), py::arg("texts"), py::arg("timeout_s") = 10.0,
        py::arg("retries") = 3, py::arg("concurrency") = 4,
        "POST {\"texts\": [...]} to a scorer endpoint and validate the returned scores.");
}
