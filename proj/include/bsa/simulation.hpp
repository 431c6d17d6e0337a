#pragma once

#include <cstdint>
#include <random>
#include <variant>
#include <vector>

#include "bsa/core.hpp"
#include "bsa/sequential_test.hpp"

namespace bsa {

// Synthetic score families standing in for model behavior distributions.
// Support must stay inside [0,1].

struct BetaSpec {
    double alpha = 1.0;
    double beta = 1.0;
};
struct UniformSpec {
    double lo = 0.0;
    double hi = 1.0;
};
struct PointMassSpec {
    double value = 0.5;
};
struct Component;
struct MixtureSpec {
    std::vector<double> weights;
    std::vector<Component> components;
};
struct EmpiricalSpec {
    std::vector<double> values;
};

struct Component {
    std::variant<BetaSpec, UniformSpec, PointMassSpec, MixtureSpec, EmpiricalSpec> family;
};

// One independent component per behavior dimension.
struct DistributionSpec {
    std::vector<Component> components;

    int dim() const { return static_cast<int>(components.size()); }

    static DistributionSpec beta(double a, double b) { return {{Component{BetaSpec{a, b}}}}; }
    static DistributionSpec uniform(double lo, double hi) {
        return {{Component{UniformSpec{lo, hi}}}};
    }
    static DistributionSpec point_mass(double v) { return {{Component{PointMassSpec{v}}}}; }
    static DistributionSpec empirical(std::vector<double> values) {
        return {{Component{EmpiricalSpec{std::move(values)}}}};
    }
};

// Throws InvalidSpecError on support or weight violations.
void validate(const DistributionSpec& spec);

struct ExperimentSpec {
    DistributionSpec dist_a;
    DistributionSpec dist_b;
    int folds = 48;
    long long samples_per_fold = 2000;
    int batch_size = 100;
    double alpha = 0.05;
    std::vector<double> epsilon_grid = {0.0};
    std::vector<double> noise_sigmas = {0.0};
    std::uint64_t base_seed = 0;
    NetConfig net;
    int threads = 1;
};

void validate(const ExperimentSpec& spec);

struct RunRecord {
    int fold = 0;
    double epsilon = 0.0;
    double sigma = 0.0;
    Verdict verdict;
    std::uint64_t seed = 0;
};

// n i.i.d. draws from the spec, one d-vector per draw.
std::vector<std::vector<double>> sample_scores(const DistributionSpec& spec, long long n,
                                               std::mt19937_64& rng);

// Adds N(0, sigma^2) noise independently to every component, then clips to
// [0,1]. sigma == 0 returns the input untouched (and consumes no
// randomness).
std::vector<std::vector<double>> add_noise(const std::vector<std::vector<double>>& scores,
                                           double sigma, std::mt19937_64& rng);

// A generated pair stream for one experiment cell: per batch, batch_size
// draws from each side, noised at `sigma`, all from a seed-derived rng.
// Supplies batches indefinitely (the audit's sample cap stops it).
BatchSource make_cell_source(const DistributionSpec& dist_a, const DistributionSpec& dist_b,
                             int batch_size, double sigma, std::uint64_t seed);

// One audit per (fold, epsilon, sigma) cell. The cell seed is derived from
// (base_seed, fold, sigma index) -- constant across the epsilon grid, so
// every epsilon replays the identical stream and training path and the
// epsilon-monotonicity of rejection times holds fold by fold, not just on
// average. Records arrive in deterministic (fold, epsilon, sigma) order
// regardless of spec.threads.
std::vector<RunRecord> run_experiment(const ExperimentSpec& spec);

// Runs the betting audit and the repeated-KS audit on identical per-fold
// streams; used to compare false-positive behavior of the two tests.
struct BaselineComparison {
    std::vector<RunRecord> betting;
    std::vector<RunRecord> ks;
};
BaselineComparison run_ks_comparison(const ExperimentSpec& spec);

// Fraction of records rejected with rejection sample count <= m, per grid
// point. Records must be non-empty.
std::vector<std::pair<long long, double>> detection_curve(const std::vector<RunRecord>& records,
                                                          const std::vector<long long>& sample_grid);

// Rejected fraction per epsilon value, aggregated over folds (and sigmas).
std::vector<std::pair<double, double>> epsilon_sweep(const ExperimentSpec& spec);
std::vector<std::pair<double, double>> epsilon_sweep(const ExperimentSpec& spec,
                                                     const std::vector<RunRecord>& records);

struct RateWithCI {
    double rate = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;  // Wilson 95% interval
};
RateWithCI false_positive_rate(const std::vector<RunRecord>& records);

// Wilson score interval helper (z = 1.95996...), exposed for reuse.
RateWithCI wilson_interval(long long rejected, long long total);

}  // namespace bsa
