#include "bsa/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bsa/errors.hpp"

namespace bsa {

double ks_statistic(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    if (sample_a.empty() || sample_b.empty())
        throw EmptyInputError("ks_statistic needs non-empty samples");
    std::vector<double> a = sample_a;
    std::vector<double> b = sample_b;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() || j < b.size()) {
        const double x = (i < a.size() && (j >= b.size() || a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_pvalue(double statistic, std::size_t n, std::size_t m) {
    if (n < 1 || m < 1) throw EmptyInputError("ks_pvalue needs n, m >= 1");
    if (statistic <= 0.0) return 1.0;
    const double nn = static_cast<double>(n);
    const double mm = static_cast<double>(m);
    const double lambda = statistic * std::sqrt(nn * mm / (nn + mm));

    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100000; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if (term < 1e-12) break;
    }
    const double p = 2.0 * sum;
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

KsResult ks_test(const std::vector<double>& sample_a, const std::vector<double>& sample_b) {
    KsResult r;
    r.statistic = ks_statistic(sample_a, sample_b);
    r.n = sample_a.size();
    r.m = sample_b.size();
    r.p_value = ks_pvalue(r.statistic, r.n, r.m);
    return r;
}

Verdict repeated_ks_audit(const BatchSource& batches, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw OutOfRangeError("alpha must be in (0,1)");
    std::vector<double> pool_a, pool_b;
    Verdict verdict;
    verdict.final_log_wealth = std::numeric_limits<double>::quiet_NaN();
    int round = 0;
    while (true) {
        std::optional<PairedBatch> next = batches();
        if (!next) break;
        validate_batch(*next, 1);
        ++round;
        for (const ScorePair& p : next->pairs) {
            pool_a.push_back(p.a[0]);
            pool_b.push_back(p.b[0]);
        }
        verdict.samples_seen += static_cast<long long>(next->pairs.size());
        const KsResult r = ks_test(pool_a, pool_b);
        if (r.p_value <= alpha) {
            verdict.outcome = Verdict::Outcome::Rejected;
            verdict.rejected_at_round = round;
            break;
        }
    }
    return verdict;
}

}  // namespace bsa
