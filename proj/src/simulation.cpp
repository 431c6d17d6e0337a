#include "bsa/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <memory>
#include <numeric>
#include <thread>

#include "bsa/baselines.hpp"
#include "bsa/errors.hpp"
#include "bsa/rng.hpp"

namespace bsa {

namespace {

void validate_component(const Component& c) {
    std::visit(
        [](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BetaSpec>) {
                if (!(f.alpha > 0.0) || !(f.beta > 0.0))
                    throw InvalidSpecError("beta parameters must be > 0");
            } else if constexpr (std::is_same_v<T, UniformSpec>) {
                if (!(0.0 <= f.lo && f.lo <= f.hi && f.hi <= 1.0))
                    throw InvalidSpecError("uniform support must satisfy 0 <= lo <= hi <= 1");
            } else if constexpr (std::is_same_v<T, PointMassSpec>) {
                if (!(f.value >= 0.0 && f.value <= 1.0))
                    throw InvalidSpecError("point mass must lie in [0,1]");
            } else if constexpr (std::is_same_v<T, MixtureSpec>) {
                if (f.components.empty() || f.weights.size() != f.components.size())
                    throw InvalidSpecError("mixture needs matching weights and components");
                double sum = 0.0;
                for (double w : f.weights) {
                    if (w < 0.0) throw InvalidSpecError("mixture weights must be >= 0");
                    sum += w;
                }
                if (std::abs(sum - 1.0) > 1e-9)
                    throw InvalidSpecError("mixture weights must sum to 1");
                for (const Component& sub : f.components) validate_component(sub);
            } else if constexpr (std::is_same_v<T, EmpiricalSpec>) {
                if (f.values.empty()) throw InvalidSpecError("empirical spec needs values");
                for (double v : f.values) {
                    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                        throw InvalidSpecError("empirical values must lie in [0,1]");
                }
            }
        },
        c.family);
}

double sample_component(const Component& c, std::mt19937_64& rng) {
    return std::visit(
        [&rng](const auto& f) -> double {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, BetaSpec>) {
                std::gamma_distribution<double> ga(f.alpha, 1.0);
                std::gamma_distribution<double> gb(f.beta, 1.0);
                const double x = ga(rng);
                const double y = gb(rng);
                const double s = x + y;
                return s > 0.0 ? x / s : 0.5;
            } else if constexpr (std::is_same_v<T, UniformSpec>) {
                std::uniform_real_distribution<double> u(f.lo, f.hi);
                return f.lo == f.hi ? f.lo : u(rng);
            } else if constexpr (std::is_same_v<T, PointMassSpec>) {
                return f.value;
            } else if constexpr (std::is_same_v<T, MixtureSpec>) {
                std::uniform_real_distribution<double> u(0.0, 1.0);
                double r = u(rng);
                std::size_t idx = 0;
                for (; idx + 1 < f.weights.size(); ++idx) {
                    if (r < f.weights[idx]) break;
                    r -= f.weights[idx];
                }
                return sample_component(f.components[idx], rng);
            } else {
                std::uniform_int_distribution<std::size_t> pick(0, f.values.size() - 1);
                return f.values[pick(rng)];
            }
        },
        c.family);
}

}  // namespace

void validate(const DistributionSpec& spec) {
    if (spec.components.empty()) throw InvalidSpecError("distribution needs >= 1 component");
    for (const Component& c : spec.components) validate_component(c);
}

void validate(const ExperimentSpec& spec) {
    validate(spec.dist_a);
    validate(spec.dist_b);
    if (spec.dist_a.dim() != spec.dist_b.dim())
        throw DimMismatchError("dist_a and dist_b dimensions differ");
    if (spec.folds < 1) throw InvalidSpecError("folds must be >= 1");
    if (spec.epsilon_grid.empty()) throw InvalidSpecError("epsilon grid must be non-empty");
    if (spec.noise_sigmas.empty()) throw InvalidSpecError("noise grid must be non-empty");
    for (double e : spec.epsilon_grid) {
        if (e < 0.0) throw OutOfRangeError("epsilon must be >= 0");
    }
    for (double s : spec.noise_sigmas) {
        if (s < 0.0) throw OutOfRangeError("noise sigma must be >= 0");
    }
    if (spec.threads < 1) throw InvalidSpecError("threads must be >= 1");
    TestConfig probe;
    probe.alpha = spec.alpha;
    probe.batch_size = spec.batch_size;
    probe.max_samples = spec.samples_per_fold;
    probe.dim = spec.dist_a.dim();
    probe.net = spec.net;
    probe.net.input_dim = probe.dim;
    validate(probe);
}

std::vector<std::vector<double>> sample_scores(const DistributionSpec& spec, long long n,
                                               std::mt19937_64& rng) {
    validate(spec);
    if (n < 0) throw InvalidSpecError("sample count must be >= 0");
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(n));
    for (long long i = 0; i < n; ++i) {
        std::vector<double> v(spec.components.size());
        for (std::size_t d = 0; d < spec.components.size(); ++d) {
            v[d] = sample_component(spec.components[d], rng);
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<double>> add_noise(const std::vector<std::vector<double>>& scores,
                                           double sigma, std::mt19937_64& rng) {
    if (sigma < 0.0) throw OutOfRangeError("noise sigma must be >= 0");
    if (sigma == 0.0) return scores;
    std::normal_distribution<double> noise(0.0, sigma);
    std::vector<std::vector<double>> out = scores;
    for (std::vector<double>& v : out) {
        for (double& x : v) x = std::clamp(x + noise(rng), 0.0, 1.0);
    }
    return out;
}

BatchSource make_cell_source(const DistributionSpec& dist_a, const DistributionSpec& dist_b,
                             int batch_size, double sigma, std::uint64_t seed) {
    validate(dist_a);
    validate(dist_b);
    struct CellState {
        DistributionSpec a, b;
        int batch;
        double sigma;
        std::mt19937_64 rng;
        int round = 0;
    };
    auto st = std::make_shared<CellState>(
        CellState{dist_a, dist_b, batch_size, sigma, make_rng(derive_seed(seed, {seed_tag::data}))});
    return [st]() -> std::optional<PairedBatch> {
        auto a = sample_scores(st->a, st->batch, st->rng);
        auto b = sample_scores(st->b, st->batch, st->rng);
        a = add_noise(a, st->sigma, st->rng);
        b = add_noise(b, st->sigma, st->rng);
        PairedBatch out;
        out.round_index = ++st->round;
        out.pairs.reserve(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            out.pairs.push_back({std::move(a[i]), std::move(b[i])});
        }
        return out;
    };
}

namespace {

struct Cell {
    int fold;
    std::size_t eps_idx;
    std::size_t sigma_idx;
};

RunRecord run_cell(const ExperimentSpec& spec, const Cell& cell) {
    const std::uint64_t cell_seed =
        derive_seed(spec.base_seed,
                    {seed_tag::cell, static_cast<std::uint64_t>(cell.fold), cell.sigma_idx});
    TestConfig cfg;
    cfg.alpha = spec.alpha;
    cfg.epsilon = spec.epsilon_grid[cell.eps_idx];
    cfg.batch_size = spec.batch_size;
    cfg.max_samples = spec.samples_per_fold;
    cfg.dim = spec.dist_a.dim();
    cfg.seed = cell_seed;
    cfg.net = spec.net;
    cfg.net.input_dim = cfg.dim;

    BatchSource source = make_cell_source(spec.dist_a, spec.dist_b, spec.batch_size,
                                          spec.noise_sigmas[cell.sigma_idx], cell_seed);
    AuditTrace trace = run_audit(source, cfg);

    RunRecord rec;
    rec.fold = cell.fold;
    rec.epsilon = cfg.epsilon;
    rec.sigma = spec.noise_sigmas[cell.sigma_idx];
    rec.verdict = trace.verdict;
    rec.seed = cell_seed;
    return rec;
}

template <typename Fn>
void for_each_cell_parallel(const ExperimentSpec& spec, std::size_t n_cells, Fn&& run_one) {
    if (spec.threads <= 1) {
        for (std::size_t i = 0; i < n_cells; ++i) run_one(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n_cells; i = next.fetch_add(1)) {
            run_one(i);
        }
    };
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(spec.threads, static_cast<int>(n_cells));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
}

std::vector<Cell> enumerate_cells(const ExperimentSpec& spec) {
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(spec.folds) * spec.epsilon_grid.size() *
                  spec.noise_sigmas.size());
    for (int f = 0; f < spec.folds; ++f) {
        for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e) {
            for (std::size_t s = 0; s < spec.noise_sigmas.size(); ++s) {
                cells.push_back({f, e, s});
            }
        }
    }
    return cells;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentSpec& spec) {
    validate(spec);
    const std::vector<Cell> cells = enumerate_cells(spec);
    std::vector<RunRecord> records(cells.size());
    for_each_cell_parallel(spec, cells.size(),
                           [&](std::size_t i) { records[i] = run_cell(spec, cells[i]); });
    return records;
}

BaselineComparison run_ks_comparison(const ExperimentSpec& spec) {
    validate(spec);
    if (spec.dist_a.dim() != 1)
        throw DimMismatchError("the repeated-KS baseline handles scalar scores only");
    const std::vector<Cell> cells = enumerate_cells(spec);
    BaselineComparison out;
    out.betting.resize(cells.size());
    out.ks.resize(cells.size());
    for_each_cell_parallel(spec, cells.size(), [&](std::size_t i) {
        const Cell& cell = cells[i];
        out.betting[i] = run_cell(spec, cell);
        // identical stream for the KS audit: same cell seed, fresh source
        const std::uint64_t cell_seed = out.betting[i].seed;
        BatchSource source = make_cell_source(spec.dist_a, spec.dist_b, spec.batch_size,
                                              spec.noise_sigmas[cell.sigma_idx], cell_seed);
        long long budget = spec.samples_per_fold;
        BatchSource capped = [source, budget]() mutable -> std::optional<PairedBatch> {
            if (budget <= 0) return std::nullopt;
            auto b = source();
            if (!b) return std::nullopt;
            if (static_cast<long long>(b->pairs.size()) > budget) {
                b->pairs.resize(static_cast<std::size_t>(budget));
            }
            budget -= static_cast<long long>(b->pairs.size());
            return b;
        };
        RunRecord rec = out.betting[i];
        rec.verdict = repeated_ks_audit(capped, spec.alpha);
        out.ks[i] = rec;
    });
    return out;
}

std::vector<std::pair<long long, double>> detection_curve(
    const std::vector<RunRecord>& records, const std::vector<long long>& sample_grid) {
    if (records.empty()) throw EmptyInputError("detection_curve needs records");
    std::vector<std::pair<long long, double>> curve;
    curve.reserve(sample_grid.size());
    for (long long m : sample_grid) {
        long long hits = 0;
        for (const RunRecord& r : records) {
            if (r.verdict.rejected() && r.verdict.samples_seen <= m) ++hits;
        }
        curve.emplace_back(m, static_cast<double>(hits) / static_cast<double>(records.size()));
    }
    return curve;
}

std::vector<std::pair<double, double>> epsilon_sweep(const ExperimentSpec& spec,
                                                     const std::vector<RunRecord>& records) {
    std::vector<std::pair<double, double>> rates;
    for (double eps : spec.epsilon_grid) {
        long long total = 0, rejected = 0;
        for (const RunRecord& r : records) {
            if (r.epsilon == eps) {
                ++total;
                if (r.verdict.rejected()) ++rejected;
            }
        }
        rates.emplace_back(eps, total > 0 ? static_cast<double>(rejected) / total : 0.0);
    }
    return rates;
}

std::vector<std::pair<double, double>> epsilon_sweep(const ExperimentSpec& spec) {
    return epsilon_sweep(spec, run_experiment(spec));
}

RateWithCI wilson_interval(long long rejected, long long total) {
    if (total <= 0) throw EmptyInputError("wilson_interval needs total > 0");
    const double z = 1.959963984540054;  // 97.5% normal quantile
    const double n = static_cast<double>(total);
    const double p = static_cast<double>(rejected) / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    RateWithCI out;
    out.rate = p;
    out.ci_lo = std::max(0.0, center - half);
    out.ci_hi = std::min(1.0, center + half);
    return out;
}

RateWithCI false_positive_rate(const std::vector<RunRecord>& records) {
    if (records.empty()) throw EmptyInputError("false_positive_rate needs records");
    long long rejected = 0;
    for (const RunRecord& r : records) {
        if (r.verdict.rejected()) ++rejected;
    }
    return wilson_interval(rejected, static_cast<long long>(records.size()));
}

}  // namespace bsa
