#include "bsa/io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "bsa/errors.hpp"

namespace bsa {

namespace {

std::vector<double> score_field(const nlohmann::json& j, const char* key, long long line_no) {
    if (!j.contains(key)) {
        throw ParseError("line " + std::to_string(line_no) + ": missing \"" + key + "\"");
    }
    const nlohmann::json& v = j.at(key);
    std::vector<double> out;
    if (v.is_number()) {
        out.push_back(v.get<double>());
    } else if (v.is_array()) {
        for (const auto& x : v) {
            if (!x.is_number()) {
                throw ParseError("line " + std::to_string(line_no) + ": \"" + key +
                                 "\" must contain numbers");
            }
            out.push_back(x.get<double>());
        }
        if (out.empty()) {
            throw ParseError("line " + std::to_string(line_no) + ": \"" + key + "\" is empty");
        }
    } else {
        throw ParseError("line " + std::to_string(line_no) + ": \"" + key +
                         "\" must be a number or an array of numbers");
    }
    for (double x : out) {
        if (!std::isfinite(x)) {
            throw NonFiniteError("line " + std::to_string(line_no) + ": \"" + key +
                                 "\" has a non-finite component");
        }
        if (x < 0.0 || x > 1.0) {
            throw OutOfRangeError("line " + std::to_string(line_no) + ": \"" + key +
                                  "\" component " + std::to_string(x) + " outside [0,1]");
        }
    }
    return out;
}

}  // namespace

PairedScoreReader::PairedScoreReader(std::istream& in, int batch_size)
    : in_(in), batch_size_(batch_size) {
    if (batch_size < 1) throw OutOfRangeError("batch_size must be >= 1");
}

std::optional<PairedBatch> PairedScoreReader::next() {
    PairedBatch batch;
    batch.round_index = round_ + 1;
    std::string line;
    while (static_cast<int>(batch.pairs.size()) < batch_size_ && std::getline(in_, line)) {
        ++line_no_;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no_) + ": " + e.what());
        }
        ScorePair pair;
        pair.a = score_field(j, "score_a", line_no_);
        pair.b = score_field(j, "score_b", line_no_);
        if (pair.a.size() != pair.b.size()) {
            throw DimMismatchError("line " + std::to_string(line_no_) +
                                   ": score_a and score_b dimensions differ");
        }
        if (dim_ < 0) {
            dim_ = static_cast<int>(pair.a.size());
        } else if (static_cast<int>(pair.a.size()) != dim_) {
            throw DimMismatchError("line " + std::to_string(line_no_) + ": dimension " +
                                   std::to_string(pair.a.size()) +
                                   " differs from the file's dimension " + std::to_string(dim_));
        }
        batch.pairs.push_back(std::move(pair));
    }
    if (batch.pairs.empty()) return std::nullopt;
    ++round_;
    return batch;
}

BatchSource make_file_source(std::shared_ptr<std::istream> in, int batch_size) {
    auto reader = std::make_shared<PairedScoreReader>(*in, batch_size);
    return [in, reader]() { return reader->next(); };
}

PairSource make_pair_source(std::shared_ptr<std::istream> in) {
    auto reader = std::make_shared<PairedScoreReader>(*in, 1);
    return [in, reader]() -> std::optional<ScorePair> {
        std::optional<PairedBatch> batch = reader->next();
        if (!batch) return std::nullopt;
        return std::move(batch->pairs.front());
    };
}

namespace {

nlohmann::json side_to_json(const std::vector<double>& side) {
    if (side.size() == 1) return side.front();
    return side;
}

}  // namespace

void write_score_record(std::ostream& out, const ScoreRecord& rec) {
    nlohmann::json j{{"prompt_id", rec.prompt_id},
                     {"score_a", side_to_json(rec.score_a)},
                     {"score_b", side_to_json(rec.score_b)}};
    out << j.dump() << '\n';
}

void write_paired_scores(std::ostream& out, const std::vector<ScoreRecord>& records) {
    for (const ScoreRecord& rec : records) write_score_record(out, rec);
}

nlohmann::json to_json(const NetConfig& cfg) {
    return {{"input_dim", cfg.input_dim},
            {"hidden_widths", cfg.hidden_widths},
            {"dropout_rate", cfg.dropout_rate},
            {"output_bound", cfg.output_bound},
            {"learning_rate", cfg.learning_rate},
            {"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"holdout_fraction", cfg.holdout_fraction}};
}

NetConfig net_config_from_json(const nlohmann::json& j) {
    try {
        NetConfig cfg;
        cfg.input_dim = j.value("input_dim", cfg.input_dim);
        cfg.hidden_widths = j.value("hidden_widths", cfg.hidden_widths);
        cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
        cfg.output_bound = j.value("output_bound", cfg.output_bound);
        cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
        cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
        cfg.patience = j.value("patience", cfg.patience);
        cfg.holdout_fraction = j.value("holdout_fraction", cfg.holdout_fraction);
        validate(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad net config: ") + e.what());
    }
}

nlohmann::json to_json(const TestConfig& cfg) {
    return {{"alpha", cfg.alpha},
            {"epsilon", cfg.epsilon},
            {"batch_size", cfg.batch_size},
            {"max_samples", cfg.max_samples},
            {"dim", cfg.dim},
            {"seed", cfg.seed},
            {"net", to_json(cfg.net)}};
}

TestConfig test_config_from_json(const nlohmann::json& j) {
    try {
        TestConfig cfg;
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.epsilon = j.value("epsilon", cfg.epsilon);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.max_samples = j.value("max_samples", cfg.max_samples);
        cfg.dim = j.value("dim", cfg.dim);
        cfg.seed = j.value("seed", cfg.seed);
        if (j.contains("net")) cfg.net = net_config_from_json(j.at("net"));
        cfg.net.input_dim = cfg.dim;
        validate(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad test config: ") + e.what());
    }
}

namespace {

Component component_from_json(const nlohmann::json& j);

nlohmann::json component_to_json(const Component& c) {
    return std::visit(
        [](const auto& f) -> nlohmann::json {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BetaSpec>) {
                return {{"family", "beta"}, {"alpha", f.alpha}, {"beta", f.beta}};
            } else if constexpr (std::is_same_v<T, UniformSpec>) {
                return {{"family", "uniform"}, {"lo", f.lo}, {"hi", f.hi}};
            } else if constexpr (std::is_same_v<T, PointMassSpec>) {
                return {{"family", "point_mass"}, {"value", f.value}};
            } else if constexpr (std::is_same_v<T, MixtureSpec>) {
                nlohmann::json comps = nlohmann::json::array();
                for (const Component& sub : f.components) comps.push_back(component_to_json(sub));
                return {{"family", "mixture"}, {"weights", f.weights}, {"components", comps}};
            } else {
                return {{"family", "empirical"}, {"values", f.values}};
            }
        },
        c.family);
}

Component component_from_json(const nlohmann::json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "beta") {
        return Component{BetaSpec{j.at("alpha").get<double>(), j.at("beta").get<double>()}};
    }
    if (family == "uniform") {
        return Component{UniformSpec{j.at("lo").get<double>(), j.at("hi").get<double>()}};
    }
    if (family == "point_mass") {
        return Component{PointMassSpec{j.at("value").get<double>()}};
    }
    if (family == "mixture") {
        MixtureSpec mix;
        mix.weights = j.at("weights").get<std::vector<double>>();
        for (const auto& sub : j.at("components")) mix.components.push_back(component_from_json(sub));
        return Component{std::move(mix)};
    }
    if (family == "empirical") {
        return Component{EmpiricalSpec{j.at("values").get<std::vector<double>>()}};
    }
    throw ParseError("unknown distribution family \"" + family + "\"");
}

}  // namespace

nlohmann::json to_json(const DistributionSpec& spec) {
    if (spec.components.size() == 1) return component_to_json(spec.components.front());
    nlohmann::json arr = nlohmann::json::array();
    for (const Component& c : spec.components) arr.push_back(component_to_json(c));
    return arr;
}

DistributionSpec distribution_from_json(const nlohmann::json& j) {
    try {
        DistributionSpec spec;
        if (j.is_array()) {
            for (const auto& sub : j) spec.components.push_back(component_from_json(sub));
        } else {
            spec.components.push_back(component_from_json(j));
        }
        validate(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad distribution spec: ") + e.what());
    }
}

nlohmann::json to_json(const ExperimentSpec& spec) {
    return {{"dist_a", to_json(spec.dist_a)},
            {"dist_b", to_json(spec.dist_b)},
            {"folds", spec.folds},
            {"samples_per_fold", spec.samples_per_fold},
            {"batch_size", spec.batch_size},
            {"alpha", spec.alpha},
            {"epsilon_grid", spec.epsilon_grid},
            {"noise_sigmas", spec.noise_sigmas},
            {"seed", spec.base_seed},
            {"net", to_json(spec.net)},
            {"threads", spec.threads}};
}

ExperimentSpec experiment_from_json(const nlohmann::json& j) {
    try {
        ExperimentSpec spec;
        spec.dist_a = distribution_from_json(j.at("dist_a"));
        spec.dist_b = distribution_from_json(j.at("dist_b"));
        spec.folds = j.value("folds", spec.folds);
        spec.samples_per_fold = j.value("samples_per_fold", spec.samples_per_fold);
        spec.batch_size = j.value("batch_size", spec.batch_size);
        spec.alpha = j.value("alpha", spec.alpha);
        spec.epsilon_grid = j.value("epsilon_grid", spec.epsilon_grid);
        spec.noise_sigmas = j.value("noise_sigmas", spec.noise_sigmas);
        spec.base_seed = j.value("seed", spec.base_seed);
        if (j.contains("net")) spec.net = net_config_from_json(j.at("net"));
        spec.net.input_dim = spec.dist_a.dim();
        spec.threads = j.value("threads", spec.threads);
        validate(spec);
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad experiment spec: ") + e.what());
    }
}

nlohmann::json to_json(const Verdict& v) {
    nlohmann::json j;
    j["outcome"] = v.rejected() ? "REJECTED" : "NOT-REJECTED";
    if (v.rejected()) j["rejected_at_round"] = v.rejected_at_round;
    j["samples_seen"] = v.samples_seen;
    if (std::isfinite(v.final_log_wealth)) {
        j["final_log_wealth"] = v.final_log_wealth;
    } else {
        j["final_log_wealth"] = nullptr;
    }
    return j;
}

nlohmann::json to_json(const AuditTrace& trace, const TestConfig& cfg) {
    nlohmann::json rounds = nlohmann::json::array();
    for (const RoundRecord& r : trace.rounds) {
        nlohmann::json jr{{"round", r.round},
                          {"samples", r.samples_seen},
                          {"log_score", r.log_score},
                          {"log_wealth", r.log_wealth}};
        if (r.holdout_objective) {
            jr["holdout_objective"] = *r.holdout_objective;
        } else {
            jr["holdout_objective"] = nullptr;
        }
        rounds.push_back(std::move(jr));
    }
    return {{"config", to_json(cfg)},
            {"effective_epsilon", trace.effective_epsilon},
            {"verdict", to_json(trace.verdict)},
            {"rounds", std::move(rounds)}};
}

nlohmann::json to_json(const std::vector<RunRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const RunRecord& r : records) {
        nlohmann::json j{{"fold", r.fold},
                         {"epsilon", r.epsilon},
                         {"sigma", r.sigma},
                         {"verdict", r.verdict.rejected() ? "REJECTED" : "NOT-REJECTED"},
                         {"seed", r.seed}};
        if (r.verdict.rejected()) {
            j["rejection_samples"] = r.verdict.samples_seen;
        } else {
            j["rejection_samples"] = nullptr;
        }
        if (std::isfinite(r.verdict.final_log_wealth)) {
            j["final_log_wealth"] = r.verdict.final_log_wealth;
        } else {
            j["final_log_wealth"] = nullptr;
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

nlohmann::json to_json(const DistanceEstimate& est, std::uint64_t seed) {
    return {{"value", est.value},
            {"literal_value", est.literal()},
            {"std", est.std_across_repeats},
            {"batch_size", est.batch_size},
            {"sample_budget", est.sample_budget},
            {"repeats", est.repeats},
            {"seed", seed}};
}

void records_to_csv(std::ostream& out, const std::vector<RunRecord>& records) {
    out << "fold,epsilon,sigma,verdict,rejection_samples,seed,final_log_wealth\n";
    char buf[64];
    const auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const RunRecord& r : records) {
        out << r.fold << ',' << fmt(r.epsilon) << ',' << fmt(r.sigma) << ','
            << (r.verdict.rejected() ? "REJECTED" : "NOT-REJECTED") << ',';
        if (r.verdict.rejected()) out << r.verdict.samples_seen;
        out << ',' << r.seed << ',';
        if (std::isfinite(r.verdict.final_log_wealth)) out << fmt(r.verdict.final_log_wealth);
        out << '\n';
    }
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

}  // namespace bsa
