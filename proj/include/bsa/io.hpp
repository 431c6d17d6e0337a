#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsa/core.hpp"
#include "bsa/distance.hpp"
#include "bsa/sequential_test.hpp"
#include "bsa/simulation.hpp"

namespace bsa {

// One line of a paired-score file: {"prompt_id": ..., "score_a": ..., "score_b": ...}
// with scores either scalars or arrays.
struct ScoreRecord {
    std::string prompt_id;
    std::vector<double> score_a;
    std::vector<double> score_b;
};

// Streaming reader over line-delimited records. Batches come back in file
// order; the final batch may be partial. Parse and validation errors name
// the offending line.
class PairedScoreReader {
  public:
    PairedScoreReader(std::istream& in, int batch_size);

    std::optional<PairedBatch> next();

    // Dimension seen so far; -1 until the first record is read.
    int dim() const { return dim_; }

  private:
    std::istream& in_;
    int batch_size_;
    long long line_no_ = 0;
    int dim_ = -1;
    int round_ = 0;
};

// Wraps a reader (keeps the stream alive) as a BatchSource / PairSource.
BatchSource make_file_source(std::shared_ptr<std::istream> in, int batch_size);
PairSource make_pair_source(std::shared_ptr<std::istream> in);

void write_score_record(std::ostream& out, const ScoreRecord& rec);
void write_paired_scores(std::ostream& out, const std::vector<ScoreRecord>& records);

// Config serialization; keys mirror the struct fields one-to-one.
nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TestConfig& cfg);
TestConfig test_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DistributionSpec& spec);
DistributionSpec distribution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentSpec& spec);
ExperimentSpec experiment_from_json(const nlohmann::json& j);

// Results.
nlohmann::json to_json(const Verdict& v);
nlohmann::json to_json(const AuditTrace& trace, const TestConfig& cfg);
nlohmann::json to_json(const std::vector<RunRecord>& records);
nlohmann::json to_json(const DistanceEstimate& est, std::uint64_t seed);

// CSV with columns fold,epsilon,sigma,verdict,rejection_samples,seed,final_log_wealth.
// rejection_samples is empty for non-rejections; a NaN wealth (KS verdicts)
// becomes an empty field.
void records_to_csv(std::ostream& out, const std::vector<RunRecord>& records);

// Parses a JSON document from a file, wrapping failures in ParseError.
nlohmann::json load_json_file(const std::string& path);

}  // namespace bsa
