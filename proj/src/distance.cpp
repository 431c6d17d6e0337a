#include "bsa/distance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bsa/betting_net.hpp"
#include "bsa/errors.hpp"
#include "bsa/rng.hpp"

namespace bsa {

namespace {

PairedBatch pull_batch(const PairSource& pairs, int batch_size, int round) {
    PairedBatch batch;
    batch.round_index = round;
    batch.pairs.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        std::optional<ScorePair> p = pairs();
        if (!p) throw InsufficientDataError("pair stream exhausted before the sample budget");
        batch.pairs.push_back(std::move(*p));
    }
    return batch;
}

// One repeat of the A.4 estimator: betting loop at epsilon = 0, recording
// the per-pair geometric mean of the betting score right after the first
// training step and after the last one.
double one_repeat(const PairSource& pairs, int b, long long T, const NetConfig& net_cfg,
                  std::uint64_t seed) {
    BettingNet net = init_betting_net(net_cfg, derive_seed(seed, {seed_tag::net_init}));
    TrainState state(derive_seed(seed, {seed_tag::split}), net_cfg.holdout_fraction);
    std::mt19937_64 train_rng = make_rng(derive_seed(seed, {seed_tag::train}));

    double geo_first = 0.0;  // net trained on 1 batch, scoring batch 2
    double geo_last = 0.0;   // net trained on T-1 batches, scoring batch T
    for (long long t = 1; t <= T; ++t) {
        PairedBatch batch = pull_batch(pairs, b, static_cast<int>(t));
        validate_batch(batch, net_cfg.input_dim);
        if (t == 2 || t == T) {
            const double log_score = log_betting_score(net, batch, 0.0);
            const double geo = std::exp(log_score / static_cast<double>(b));
            if (t == 2) geo_first = geo;
            if (t == T) geo_last = geo;
        }
        if (t < T) {
            state.observe(batch);
            net = train(net, state, net_cfg, train_rng);
        }
    }
    return 0.5 * (geo_first + geo_last) - 1.0;
}

}  // namespace

DistanceEstimate estimate_nn_distance(const PairSource& pairs, int batch_size, long long n_samples,
                                      const NetConfig& net_cfg, int repeats, std::uint64_t seed) {
    validate(net_cfg);
    if (batch_size < 1) throw OutOfRangeError("batch_size must be >= 1");
    if (repeats < 1) throw OutOfRangeError("repeats must be >= 1");
    if (n_samples < 2LL * batch_size)
        throw InsufficientDataError("distance estimation needs at least two batches (N >= 2b)");
    const long long T = n_samples / batch_size;

    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        values.push_back(one_repeat(pairs, batch_size, T, net_cfg,
                                    derive_seed(seed, {seed_tag::repeat, static_cast<std::uint64_t>(r)})));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / repeats;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);

    DistanceEstimate est;
    est.value = mean;
    est.batch_size = batch_size;
    est.sample_budget = n_samples;
    est.repeats = repeats;
    est.std_across_repeats = repeats > 1 ? std::sqrt(var / (repeats - 1)) : 0.0;
    return est;
}

std::vector<ConvergenceRow> convergence_study(const PairSource& pairs,
                                              const std::vector<long long>& training_sizes,
                                              int batch_size, const NetConfig& net_cfg, int repeats,
                                              std::uint64_t seed) {
    std::vector<ConvergenceRow> table;
    for (std::size_t i = 0; i < training_sizes.size(); ++i) {
        const DistanceEstimate est =
            estimate_nn_distance(pairs, batch_size, training_sizes[i], net_cfg, repeats,
                                 derive_seed(seed, {seed_tag::repeat, i}));
        table.push_back({training_sizes[i], est.value, est.std_across_repeats});
    }
    return table;
}

double wasserstein1(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw EmptyInputError("wasserstein1 needs non-empty samples");
    std::vector<double> a = sample_a;
    std::vector<double> b = sample_b;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    // integral of |F_a - F_b| over the pooled breakpoints
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double dist = 0.0;
    double prev = 0.0;
    bool have_prev = false;
    while (i < a.size() || j < b.size()) {
        const double x = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
        if (have_prev) {
            const double gap =
                std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb);
            dist += gap * (x - prev);
        }
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        prev = x;
        have_prev = true;
    }
    return dist;
}

double mean_shift(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw EmptyInputError("mean_shift needs non-empty samples");
    const double ma = std::accumulate(sample_a.begin(), sample_a.end(), 0.0) / sample_a.size();
    const double mb = std::accumulate(sample_b.begin(), sample_b.end(), 0.0) / sample_b.size();
    return mb - ma;
}

double calibrate_epsilon(const PairSource& reference_pairs, int batch_size, long long n_samples,
                         const NetConfig& net_cfg, int repeats, std::uint64_t seed) {
    const DistanceEstimate est =
        estimate_nn_distance(reference_pairs, batch_size, n_samples, net_cfg, repeats, seed);
    return std::max(0.0, est.value);
}

}  // namespace bsa
