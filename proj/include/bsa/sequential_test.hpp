#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "bsa/betting_net.hpp"
#include "bsa/core.hpp"

namespace bsa {

// Pull-based batch stream; returns nullopt when exhausted.
using BatchSource = std::function<std::optional<PairedBatch>()>;

struct RoundRecord {
    int round = 0;
    long long samples_seen = 0;  // cumulative
    double log_score = 0.0;
    double log_wealth = 0.0;
    // Best stopping metric from the post-round training step; empty on the
    // rejection round (no training happens after a rejection).
    std::optional<double> holdout_objective;
};

struct AuditTrace {
    Verdict verdict;
    WealthState wealth;
    std::vector<RoundRecord> rounds;
    double effective_epsilon = 0.0;
};

// Called after a round is scored and recorded but before the net trains on
// it; `net` is the snapshot that produced the round's betting score. Lets
// callers verify the score-before-train ordering that anytime validity
// rests on.
using RoundObserver =
    std::function<void(const PairedBatch& batch, const BettingNet& net, const RoundRecord& rec)>;

// The full sequential auditing loop. Per round: validate the batch, score
// it with the net trained on rounds 1..t-1 (round 1 uses phi_0, whose
// output layer is zero), update the wealth, stop on a threshold crossing,
// otherwise train and continue. Stops with NotRejected once max_samples
// are consumed or the stream ends; a batch that would overshoot the budget
// is truncated to land exactly on it.
AuditTrace run_audit(const BatchSource& batches, const TestConfig& cfg,
                     const RoundObserver& observer = {});

// run_audit with the tolerance pinned to zero regardless of cfg.epsilon.
AuditTrace run_exact(const BatchSource& batches, const TestConfig& cfg,
                     const RoundObserver& observer = {});

// One audit per stream at the Bonferroni-corrected level alpha/m. Stream 0
// keeps cfg.seed (so m == 1 reduces exactly to run_audit); later streams
// get derived seeds.
std::vector<AuditTrace> run_parallel_bonferroni(std::vector<BatchSource> streams,
                                                const TestConfig& cfg);

}  // namespace bsa
