#include "bsa/scorer_client.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "bsa/errors.hpp"

namespace bsa {

namespace {

struct ParsedUrl {
    std::string base;  // scheme://host:port
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw TransportError("endpoint must be an http:// URL: " + url);
    }
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http") {
        throw TransportError("only http endpoints are supported: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::vector<std::vector<double>> parse_scores(const std::string& body, std::size_t expected) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw ContractViolationError(std::string("scorer response is not JSON: ") + e.what());
    }
    if (!j.contains("scores") || !j.at("scores").is_array()) {
        throw ContractViolationError("scorer response lacks a \"scores\" array");
    }
    const nlohmann::json& scores = j.at("scores");
    if (scores.size() != expected) {
        throw ContractViolationError("scorer returned " + std::to_string(scores.size()) +
                                     " scores for " + std::to_string(expected) + " texts");
    }
    std::vector<std::vector<double>> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        std::vector<double> v;
        if (s.is_number()) {
            v.push_back(s.get<double>());
        } else if (s.is_array() && !s.empty()) {
            for (const auto& x : s) {
                if (!x.is_number()) throw ContractViolationError("score entries must be numeric");
                v.push_back(x.get<double>());
            }
        } else {
            throw ContractViolationError("score entries must be numbers or number arrays");
        }
        for (double x : v) {
            if (!std::isfinite(x) || x < 0.0 || x > 1.0) {
                throw ContractViolationError("score " + std::to_string(x) + " outside [0,1]");
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::vector<double>> fetch_chunk(const ParsedUrl& url,
                                             const std::vector<std::string>& chunk,
                                             const FetchOptions& opt) {
    const nlohmann::json request{{"texts", chunk}};
    const std::string body = request.dump();

    bool timed_out = false;
    std::string last_error;
    for (int attempt = 0; attempt <= opt.retries; ++attempt) {
        if (attempt > 0) {
            const double delay =
                std::min(1.0, opt.backoff_base_s * std::pow(2.0, attempt - 1));
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
        }
        httplib::Client client(url.base);
        const auto timeout = std::chrono::duration<double>(opt.timeout_s);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);

        httplib::Result res = client.Post(url.path, body, "application/json");
        if (!res) {
            const httplib::Error err = res.error();
            timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
            last_error = httplib::to_string(err);
            continue;  // retry transport-level failures
        }
        if (res->status >= 500) {
            timed_out = false;
            last_error = "HTTP " + std::to_string(res->status);
            continue;  // retry server errors
        }
        if (res->status != 200) {
            throw TransportError("scorer returned HTTP " + std::to_string(res->status));
        }
        return parse_scores(res->body, chunk.size());
    }
    if (timed_out) {
        throw TimeoutError("scorer request timed out after " + std::to_string(opt.retries + 1) +
                           " attempts");
    }
    throw TransportError("scorer request failed after " + std::to_string(opt.retries + 1) +
                         " attempts: " + last_error);
}

}  // namespace

std::vector<std::vector<double>> fetch_scores(const std::string& endpoint,
                                              const std::vector<std::string>& texts,
                                              const FetchOptions& options) {
    if (texts.empty()) return {};
    if (options.concurrency < 1 || options.max_batch < 1) {
        throw OutOfRangeError("concurrency and max_batch must be >= 1");
    }
    const ParsedUrl url = parse_url(endpoint);

    std::vector<std::vector<std::string>> chunks;
    for (std::size_t start = 0; start < texts.size(); start += options.max_batch) {
        const std::size_t end = std::min(texts.size(), start + options.max_batch);
        chunks.emplace_back(texts.begin() + start, texts.begin() + end);
    }

    // bounded window of in-flight requests; results keyed by chunk index so
    // input order is restored regardless of completion order
    std::vector<std::vector<std::vector<double>>> per_chunk(chunks.size());
    std::vector<std::pair<std::size_t, std::future<std::vector<std::vector<double>>>>> window;
    const auto drain_one = [&] {
        auto& [idx, fut] = window.front();
        per_chunk[idx] = fut.get();
        window.erase(window.begin());
    };
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        if (window.size() >= static_cast<std::size_t>(options.concurrency)) drain_one();
        window.emplace_back(i, std::async(std::launch::async, [&, i] {
                                return fetch_chunk(url, chunks[i], options);
                            }));
    }
    while (!window.empty()) drain_one();

    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    std::size_t dim = 0;
    for (auto& chunk_scores : per_chunk) {
        for (auto& v : chunk_scores) {
            if (dim == 0) dim = v.size();
            if (v.size() != dim) {
                throw ContractViolationError("scorer returned inconsistent score dimensions");
            }
            out.push_back(std::move(v));
        }
    }
    return out;
}

}  // namespace bsa
