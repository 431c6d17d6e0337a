#pragma once

#include <cstdint>
#include <vector>

#include "bsa/net_config.hpp"

namespace bsa {

struct BettingNet;  // betting_net.hpp

// One prompt's pair of behavior scores: `a` from the baseline model, `b`
// from the candidate model. Components live in [0,1]; d-dimensional scores
// carry one component per monitored behavior.
struct ScorePair {
    std::vector<double> a;
    std::vector<double> b;
};

struct PairedBatch {
    std::vector<ScorePair> pairs;
    int round_index = 1;
};

struct TestConfig {
    double alpha = 0.05;
    double epsilon = 0.0;       // tolerance, in neural-net-distance units
    int batch_size = 100;
    long long max_samples = 4000;
    int dim = 1;
    std::uint64_t seed = 0;
    NetConfig net;
};

void validate(const TestConfig& cfg);

// The wealth e-process, tracked in log space. The running product of
// betting scores overflows or underflows for long traces; the log form is
// exactly equivalent and safe.
struct WealthState {
    double log_wealth = 0.0;                 // ln W_t, W_0 = 1
    int round = 0;                           // t
    long long samples_seen = 0;              // sum of per-round pair counts
    std::vector<double> log_score_trace;     // per-round ln S_t
};

struct Verdict {
    enum class Outcome { Rejected, NotRejected };
    Outcome outcome = Outcome::NotRejected;
    int rejected_at_round = 0;     // valid when outcome == Rejected
    long long samples_seen = 0;
    double final_log_wealth = 0.0;

    bool rejected() const { return outcome == Outcome::Rejected; }
};

// Checks batch invariants against the configured dimension: non-empty,
// both sides of every pair of dimension `dim`, all components finite and
// in [0,1]. Out-of-range scores are rejected, never clipped; clipping is
// reserved for the noise-injection operation.
// Throws EmptyInputError, DimMismatchError, NonFiniteError, OutOfRangeError.
const PairedBatch& validate_batch(const PairedBatch& batch, int dim);

// Log of the per-round betting score
//   S_t = prod_i (1 + phi(a_i) - phi(b_i)) / exp(eps)
// computed as sum_i log1p(phi(a_i) - phi(b_i)) - n_pairs*eps, where n_pairs
// is the actual pair count so a partial final batch scales the tolerance
// term by what was observed. Throws NonPositiveFactorError if any factor
// is <= 0.
double log_betting_score(const BettingNet& net, const PairedBatch& batch, double epsilon);

// Returns the state advanced by one round: log-wealth bumped by log_score,
// trace appended, round incremented, samples_seen grown by pairs_in_round.
WealthState update_wealth(const WealthState& state, double log_score, long long pairs_in_round);

// True iff ln W_t >= ln(1/alpha), i.e. the wealth crossed the rejection
// threshold of Ville's inequality.
bool threshold_crossed(const WealthState& state, double alpha);

}  // namespace bsa
