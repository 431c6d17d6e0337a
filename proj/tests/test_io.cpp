#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "bsa/cli.hpp"
#include "bsa/errors.hpp"
#include "bsa/io.hpp"
#include "bsa/rng.hpp"
#include "bsa/scorer_client.hpp"
#include "bsa/sequential_test.hpp"
#include "bsa/simulation.hpp"

using namespace bsa;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("bsa_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::string jsonl_line(double a, double b, int id) {
    nlohmann::json j{{"prompt_id", "p" + std::to_string(id)}, {"score_a", a}, {"score_b", b}};
    return j.dump() + "\n";
}

fs::path write_identical_fixture(const TempDir& dir, int n, std::uint64_t seed) {
    std::mt19937_64 rng = make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    fs::path file = dir.path / "scores.jsonl";
    std::ofstream out(file);
    for (int i = 0; i < n; ++i) {
        const double x = u(rng);
        const double y = u(rng);
        nlohmann::json j{{"prompt_id", "p" + std::to_string(i)}, {"score_a", x}, {"score_b", y}};
        out << j.dump() << '\n';
    }
    return file;
}

int cli(std::vector<std::string> args) {
    std::vector<const char*> argv{"audit"};
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("reader batches a file in order with a partial tail") {
    std::stringstream ss;
    for (int i = 0; i < 250; ++i) ss << jsonl_line(0.25, 0.75, i);
    PairedScoreReader reader(ss, 100);
    auto b1 = reader.next();
    auto b2 = reader.next();
    auto b3 = reader.next();
    auto b4 = reader.next();
    REQUIRE(b1);
    REQUIRE(b2);
    REQUIRE(b3);
    CHECK(b1->pairs.size() == 100);
    CHECK(b2->pairs.size() == 100);
    CHECK(b3->pairs.size() == 50);
    CHECK(b1->round_index == 1);
    CHECK(b3->round_index == 3);
    CHECK_FALSE(b4);
    CHECK(reader.dim() == 1);
}

TEST_CASE("reader errors carry line numbers") {
    std::stringstream bad_json;
    bad_json << jsonl_line(0.5, 0.5, 0) << "{not json}\n";
    PairedScoreReader r1(bad_json, 10);
    try {
        r1.next();
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }

    std::stringstream out_of_range;
    out_of_range << jsonl_line(0.5, 0.5, 0) << jsonl_line(0.5, 0.5, 1) << jsonl_line(1.5, 0.5, 2);
    PairedScoreReader r2(out_of_range, 10);
    try {
        r2.next();
        FAIL("expected OutOfRangeError");
    } catch (const OutOfRangeError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }

    std::stringstream dim_switch;
    dim_switch << jsonl_line(0.5, 0.5, 0) << R"({"prompt_id":"x","score_a":[0.1,0.2],"score_b":[0.3,0.4]})"
               << "\n";
    PairedScoreReader r3(dim_switch, 10);
    CHECK_THROWS_AS(r3.next(), DimMismatchError);

    std::stringstream missing;
    missing << R"({"prompt_id":"x","score_a":0.5})" << "\n";
    PairedScoreReader r4(missing, 10);
    CHECK_THROWS_AS(r4.next(), ParseError);
}

TEST_CASE("empty file yields an empty stream") {
    std::stringstream ss;
    PairedScoreReader reader(ss, 10);
    CHECK_FALSE(reader.next());
}

TEST_CASE("written records re-ingest bit-exactly") {
    std::mt19937_64 rng = make_rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int dim : {1, 3}) {
        std::vector<ScoreRecord> records(40);
        for (int i = 0; i < 40; ++i) {
            records[i].prompt_id = "p" + std::to_string(i);
            for (int d = 0; d < dim; ++d) {
                records[i].score_a.push_back(u(rng));
                records[i].score_b.push_back(u(rng));
            }
        }
        std::stringstream ss;
        write_paired_scores(ss, records);
        PairedScoreReader reader(ss, 7);
        std::vector<ScorePair> round_trip;
        while (auto batch = reader.next()) {
            for (ScorePair& p : batch->pairs) round_trip.push_back(std::move(p));
        }
        REQUIRE(round_trip.size() == records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            CHECK(round_trip[i].a == records[i].score_a);
            CHECK(round_trip[i].b == records[i].score_b);
        }
    }
}

TEST_CASE("config json round trips") {
    NetConfig net;
    net.hidden_widths = {5, 9};
    net.learning_rate = 0.0123;
    net.output_bound = 0.3;
    NetConfig net2 = net_config_from_json(to_json(net));
    CHECK(net2.hidden_widths == net.hidden_widths);
    CHECK(net2.learning_rate == net.learning_rate);
    CHECK(net2.output_bound == net.output_bound);

    TestConfig cfg;
    cfg.alpha = 0.01;
    cfg.epsilon = 0.0038;
    cfg.seed = 1234567;
    TestConfig cfg2 = test_config_from_json(to_json(cfg));
    CHECK(cfg2.alpha == cfg.alpha);
    CHECK(cfg2.epsilon == cfg.epsilon);
    CHECK(cfg2.seed == cfg.seed);

    ExperimentSpec spec;
    spec.dist_a = DistributionSpec::beta(2.0, 5.0);
    MixtureSpec mix;
    mix.weights = {0.3, 0.7};
    mix.components.push_back(Component{PointMassSpec{0.2}});
    mix.components.push_back(Component{UniformSpec{0.1, 0.9}});
    spec.dist_b = DistributionSpec{{Component{mix}}};
    spec.epsilon_grid = {0.0, 0.0038, 0.076};
    ExperimentSpec spec2 = experiment_from_json(to_json(spec));
    CHECK(spec2.epsilon_grid == spec.epsilon_grid);
    CHECK(std::get<BetaSpec>(spec2.dist_a.components[0].family).beta == 5.0);
    const auto& mix2 = std::get<MixtureSpec>(spec2.dist_b.components[0].family);
    CHECK(mix2.weights == mix.weights);

    CHECK_THROWS_AS(distribution_from_json(nlohmann::json{{"family", "cauchy"}}), ParseError);
    CHECK_THROWS_AS(net_config_from_json(nlohmann::json{{"output_bound", 0.7}}), OutOfRangeError);
}

TEST_CASE("records csv has the documented columns") {
    std::vector<RunRecord> records(2);
    records[0].fold = 0;
    records[0].epsilon = 0.5;
    records[0].sigma = 0.0;
    records[0].verdict.outcome = Verdict::Outcome::Rejected;
    records[0].verdict.rejected_at_round = 3;
    records[0].verdict.samples_seen = 300;
    records[0].verdict.final_log_wealth = 3.5;
    records[0].seed = 42;
    records[1].fold = 1;
    records[1].epsilon = 0.5;
    records[1].sigma = 0.0;
    records[1].verdict.samples_seen = 2000;
    records[1].verdict.final_log_wealth = -1.0;
    records[1].seed = 43;

    std::stringstream ss;
    records_to_csv(ss, records);
    std::string line;
    std::getline(ss, line);
    CHECK(line == "fold,epsilon,sigma,verdict,rejection_samples,seed,final_log_wealth");
    std::getline(ss, line);
    CHECK(line == "0,0.5,0,REJECTED,300,42,3.5");
    std::getline(ss, line);
    CHECK(line == "1,0.5,0,NOT-REJECTED,,43,-1");
}

TEST_CASE("audit trace serializes with per-round records") {
    const auto beta = DistributionSpec::beta(2.0, 2.0);
    TestConfig cfg;
    cfg.batch_size = 25;
    cfg.max_samples = 100;
    cfg.net.hidden_widths = {8};
    cfg.net.max_epochs = 5;
    AuditTrace trace = run_audit(make_cell_source(beta, beta, 25, 0.0, 5), cfg);
    nlohmann::json j = to_json(trace, cfg);
    CHECK(j["verdict"]["outcome"] == "NOT-REJECTED");
    CHECK(j["rounds"].size() == 4);
    CHECK(j["rounds"][0]["round"] == 1);
    CHECK(j["config"]["batch_size"] == 25);
    CHECK(j["effective_epsilon"] == 0.0);
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("audit run on an identical-stream fixture completes and matches the library") {
    TempDir dir;
    fs::path scores = write_identical_fixture(dir, 200, 11);
    fs::path trace_path = dir.path / "trace.json";

    const int code = cli({"run", "--scores", scores.string(), "--alpha", "0.05", "--epsilon",
                          "0", "--batch-size", "50", "--max-samples", "200", "--seed", "9",
                          "--trace-out", trace_path.string()});
    CHECK(code == 0);

    nlohmann::json cli_trace = load_json_file(trace_path.string());
    CHECK(cli_trace["verdict"]["outcome"] == "NOT-REJECTED");

    // identical config through the library produces the identical trace
    TestConfig cfg;
    cfg.alpha = 0.05;
    cfg.epsilon = 0.0;
    cfg.batch_size = 50;
    cfg.max_samples = 200;
    cfg.dim = 1;
    cfg.seed = 9;
    auto stream = std::make_shared<std::ifstream>(scores);
    AuditTrace lib_trace = run_audit(make_file_source(stream, 50), cfg);
    CHECK(to_json(lib_trace, cfg) == cli_trace);
}

TEST_CASE("exit codes: usage, data, ok") {
    TempDir dir;
    CHECK(cli({"run"}) == 2);                    // missing --scores
    CHECK(cli({"definitely-not-a-command"}) == 2);

    fs::path bad = dir.path / "bad.jsonl";
    std::ofstream(bad) << R"({"prompt_id":"x","score_a":1.5,"score_b":0.5})" << "\n";
    CHECK(cli({"run", "--scores", bad.string()}) == 3);

    CHECK(cli({"run", "--scores", (dir.path / "missing.jsonl").string()}) == 3);
}

TEST_CASE("audit exact ignores any tolerance and reports epsilon 0") {
    TempDir dir;
    fs::path scores = write_identical_fixture(dir, 100, 13);
    fs::path trace_path = dir.path / "trace.json";
    CHECK(cli({"exact", "--scores", scores.string(), "--batch-size", "50", "--max-samples",
               "100", "--trace-out", trace_path.string()}) == 0);
    nlohmann::json j = load_json_file(trace_path.string());
    CHECK(j["effective_epsilon"] == 0.0);
}

TEST_CASE("audit simulate writes the documented outputs") {
    TempDir dir;
    nlohmann::json spec{
        {"dist_a", {{"family", "beta"}, {"alpha", 2.0}, {"beta", 2.0}}},
        {"dist_b", {{"family", "beta"}, {"alpha", 2.0}, {"beta", 2.0}}},
        {"folds", 2},
        {"samples_per_fold", 100},
        {"batch_size", 25},
        {"seed", 3},
        {"net", {{"hidden_widths", {8}}, {"max_epochs", 5}}},
    };
    fs::path spec_path = dir.path / "spec.json";
    std::ofstream(spec_path) << spec.dump();
    fs::path out = dir.path / "out";
    CHECK(cli({"simulate", "--spec", spec_path.string(), "--out", out.string()}) == 0);

    std::ifstream csv(out / "records.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "fold,epsilon,sigma,verdict,rejection_samples,seed,final_log_wealth");
    int rows = 0;
    std::string line;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 2);
    CHECK(fs::exists(out / "records.json"));
    CHECK(fs::exists(out / "summary.json"));
}

TEST_CASE("audit calibrate emits a report") {
    TempDir dir;
    fs::path scores = write_identical_fixture(dir, 300, 17);
    fs::path report = dir.path / "calibration.json";
    CHECK(cli({"calibrate", "--scores", scores.string(), "--batch-size", "25", "--repeats", "2",
               "--net-config", "", "--report", report.string()}) == 0);
    nlohmann::json j = load_json_file(report.string());
    CHECK(j["epsilon"].get<double>() >= 0.0);
    CHECK(j["batch_size"] == 25);
    CHECK(j["repeats"] == 2);
}

TEST_CASE("audit distance runs a convergence study from comma-separated sizes") {
    TempDir dir;
    fs::path scores = write_identical_fixture(dir, 300, 23);
    CHECK(cli({"distance", "--scores", scores.string(), "--batch-size", "25", "--repeats", "2",
               "--sizes", "50,100"}) == 0);
}

TEST_CASE("audit sweep reports a rate per epsilon") {
    TempDir dir;
    nlohmann::json spec{
        {"dist_a", {{"family", "beta"}, {"alpha", 2.0}, {"beta", 2.0}}},
        {"dist_b", {{"family", "beta"}, {"alpha", 2.0}, {"beta", 2.0}}},
        {"folds", 2},
        {"samples_per_fold", 100},
        {"batch_size", 25},
        {"seed", 5},
        {"epsilon_grid", {0.0, 9.0}},
        {"net", {{"hidden_widths", {8}}, {"max_epochs", 5}}},
    };
    fs::path spec_path = dir.path / "sweep.json";
    std::ofstream(spec_path) << spec.dump();
    fs::path out = dir.path / "out";
    CHECK(cli({"sweep", "--spec", spec_path.string(), "--out", out.string()}) == 0);
    CHECK(fs::exists(out / "records.csv"));
}

TEST_CASE("audit baseline-ks on a score file") {
    TempDir dir;
    fs::path scores = write_identical_fixture(dir, 200, 19);
    CHECK(cli({"baseline-ks", "--scores", scores.string(), "--batch-size", "25"}) == 0);
    CHECK(cli({"baseline-ks"}) == 2);  // neither --scores nor --spec
}

}  // TEST_SUITE

TEST_SUITE("scorer_client") {

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> calls{0};

    template <typename Handler>
    explicit StubServer(Handler handler) {
        server.Post("/score", [this, handler](const httplib::Request& req,
                                              httplib::Response& res) {
            ++calls;
            handler(req, res);
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/score"; }
};

TEST_CASE("empty text list makes no network call") {
    auto scores = fetch_scores("http://127.0.0.1:9/score", {});
    CHECK(scores.empty());
}

TEST_CASE("scores come back validated and in input order across chunks") {
    StubServer stub([](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        std::vector<double> scores;
        for (const auto& t : j.at("texts")) {
            scores.push_back(std::stod(t.get<std::string>()) / 100.0);
        }
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });

    std::vector<std::string> texts;
    for (int i = 0; i < 23; ++i) texts.push_back(std::to_string(i));
    FetchOptions opt;
    opt.max_batch = 4;
    opt.concurrency = 3;
    auto scores = fetch_scores(stub.url(), texts, opt);
    REQUIRE(scores.size() == texts.size());
    for (int i = 0; i < 23; ++i) {
        REQUIRE(scores[i].size() == 1);
        CHECK(scores[i][0] == doctest::Approx(i / 100.0));
    }
    CHECK(stub.calls.load() == 6);  // ceil(23/4)
}

TEST_CASE("vector scores are supported") {
    StubServer stub([](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        nlohmann::json scores = nlohmann::json::array();
        for (std::size_t i = 0; i < j.at("texts").size(); ++i) {
            scores.push_back({0.25, 0.75});
        }
        res.set_content(nlohmann::json{{"scores", scores}}.dump(), "application/json");
    });
    auto scores = fetch_scores(stub.url(), {"a", "b"});
    REQUIRE(scores.size() == 2);
    CHECK(scores[0] == std::vector<double>{0.25, 0.75});
}

TEST_CASE("contract violations are immediate") {
    StubServer mismatch([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": [0.5]})", "application/json");
    });
    CHECK_THROWS_AS(fetch_scores(mismatch.url(), {"a", "b"}), ContractViolationError);
    CHECK(mismatch.calls.load() == 1);

    StubServer out_of_range([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"scores": [1.5, 0.5]})", "application/json");
    });
    CHECK_THROWS_AS(fetch_scores(out_of_range.url(), {"a", "b"}), ContractViolationError);

    StubServer not_json([](const httplib::Request&, httplib::Response& res) {
        res.set_content("oops", "text/plain");
    });
    CHECK_THROWS_AS(fetch_scores(not_json.url(), {"a"}), ContractViolationError);
}

TEST_CASE("server errors are retried then surfaced as transport errors") {
    StubServer flaky([](const httplib::Request&, httplib::Response& res) {
        res.status = 500;
    });
    FetchOptions opt;
    opt.retries = 2;
    opt.backoff_base_s = 0.01;
    CHECK_THROWS_AS(fetch_scores(flaky.url(), {"a"}, opt), TransportError);
    CHECK(flaky.calls.load() == 3);  // initial + 2 retries

    StubServer recovers([](const httplib::Request& req, httplib::Response& res) {
        static std::atomic<int> n{0};
        if (n.fetch_add(1) == 0) {
            res.status = 503;
            return;
        }
        auto j = nlohmann::json::parse(req.body);
        res.set_content(
            nlohmann::json{{"scores", std::vector<double>(j.at("texts").size(), 0.5)}}.dump(),
            "application/json");
    });
    auto scores = fetch_scores(recovers.url(), {"x", "y"}, opt);
    REQUIRE(scores.size() == 2);
    CHECK(scores[0][0] == 0.5);
}

TEST_CASE("a stalled endpoint times out") {
    StubServer slow([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(600));
        res.set_content(R"({"scores": [0.5]})", "application/json");
    });
    FetchOptions opt;
    opt.timeout_s = 0.15;
    opt.retries = 1;
    opt.backoff_base_s = 0.01;
    CHECK_THROWS_AS(fetch_scores(slow.url(), {"a"}, opt), TimeoutError);
}

TEST_CASE("non-http urls are rejected") {
    CHECK_THROWS_AS(fetch_scores("https://example.com/score", {"a"}), TransportError);
    CHECK_THROWS_AS(fetch_scores("not a url", {"a"}), TransportError);
}

}  // TEST_SUITE
