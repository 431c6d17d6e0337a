#pragma once

#include <vector>

#include "bsa/core.hpp"
#include "bsa/sequential_test.hpp"

namespace bsa {

struct KsResult {
    double statistic = 0.0;  // sup ECDF gap, in [0,1]
    double p_value = 1.0;    // asymptotic, clamped to (0,1]
    std::size_t n = 0;
    std::size_t m = 0;
};

// Two-sample Kolmogorov-Smirnov statistic: the supremum over pooled sample
// points of |ECDF_a - ECDF_b|. Ties are handled by evaluating after all
// values <= x on both sides are consumed.
double ks_statistic(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

// Asymptotic Kolmogorov tail Q(lambda) = 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)
// at lambda = D * sqrt(nm/(n+m)), series truncated once terms drop below
// 1e-12, result clamped to (0,1].
double ks_pvalue(double statistic, std::size_t n, std::size_t m);

KsResult ks_test(const std::vector<double>& sample_a, const std::vector<double>& sample_b);

// Algorithm: after each incoming batch, append its scores to growing pools
// and run a full-pool KS test, rejecting on the first p <= alpha. This is
// deliberately uncorrected for repeated testing -- it is the baseline whose
// alpha inflation the betting test avoids. Scalar scores only (d = 1).
// The verdict's final_log_wealth is NaN (there is no wealth process);
// rejected_at_round counts batches.
Verdict repeated_ks_audit(const BatchSource& batches, double alpha);

}  // namespace bsa
