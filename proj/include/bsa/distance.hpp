#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "bsa/core.hpp"
#include "bsa/net_config.hpp"

namespace bsa {

// Pull-based stream of score pairs; nullopt when exhausted.
using PairSource = std::function<std::optional<ScorePair>()>;

struct DistanceEstimate {
    double value = 0.0;  // normalized: mean geometric betting score minus 1
    int batch_size = 0;
    long long sample_budget = 0;
    int repeats = 0;
    double std_across_repeats = 0.0;

    // The raw averaged geometric-mean betting score before the -1
    // normalization (concentrates near 1 + distance for epsilon = 0).
    double literal() const { return value + 1.0; }
};

// Estimates the neural-net distance between the two sides of a pair stream
// by running the betting loop with epsilon = 0 and averaging the per-pair
// geometric means of two betting scores: the one produced by the net after
// training on a single batch (scoring the following fresh batch) and the
// one produced by the net after training on T-1 batches (scoring batch T),
// with T = floor(N / b). The average is normalized by subtracting 1 and is
// reported as mean and standard deviation across `repeats` independent
// repeats, each consuming N fresh pairs from the stream.
// Requires N >= 2b; throws InsufficientDataError when the stream runs dry.
DistanceEstimate estimate_nn_distance(const PairSource& pairs, int batch_size, long long n_samples,
                                      const NetConfig& net_cfg, int repeats, std::uint64_t seed);

struct ConvergenceRow {
    long long training_size = 0;
    double mean = 0.0;
    double std = 0.0;
};

// One independent distance estimate per sample budget, for studying how the
// estimate's mean and spread move with more data. An empty size list yields
// an empty table.
std::vector<ConvergenceRow> convergence_study(const PairSource& pairs,
                                              const std::vector<long long>& training_sizes,
                                              int batch_size, const NetConfig& net_cfg, int repeats,
                                              std::uint64_t seed);

// Exact empirical 1-Wasserstein distance between two scalar samples via the
// ECDF area formula (reduces to the mean absolute difference of sorted
// samples when sizes are equal).
double wasserstein1(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

// mean(sample_b) - mean(sample_a).
double mean_shift(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

// Tolerance calibration from a reference stream drawn from two acceptable
// variants of the same model: the distance estimate floored at zero
// (a negative estimate is Monte-Carlo noise around a true distance of 0).
double calibrate_epsilon(const PairSource& reference_pairs, int batch_size, long long n_samples,
                         const NetConfig& net_cfg, int repeats, std::uint64_t seed);

}  // namespace bsa
