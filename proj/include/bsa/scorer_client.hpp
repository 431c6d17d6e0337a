#pragma once

#include <string>
#include <vector>

namespace bsa {

struct FetchOptions {
    double timeout_s = 10.0;
    int retries = 3;        // additional attempts after the first
    int concurrency = 4;    // max in-flight requests
    int max_batch = 64;     // texts per request
    double backoff_base_s = 0.05;  // doubles per retry, capped at 1s
};

// Posts {"texts": [...]} to the endpoint and expects {"scores": [...]} of
// the same length, entries either numbers or number arrays, all components
// in [0,1]. Texts are chunked into requests of at most max_batch and issued
// with at most `concurrency` in flight; the returned scores are in input
// order. Transport failures and 5xx responses are retried with bounded
// exponential backoff; timeouts exhaust retries into TimeoutError; a
// malformed or out-of-contract response throws ContractViolationError
// immediately. An empty text list returns empty without any network call.
std::vector<std::vector<double>> fetch_scores(const std::string& endpoint,
                                              const std::vector<std::string>& texts,
                                              const FetchOptions& options = {});

}  // namespace bsa
