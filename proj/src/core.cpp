#include "bsa/core.hpp"

#include <cmath>
#include <string>

#include "bsa/betting_net.hpp"
#include "bsa/errors.hpp"

namespace bsa {

void validate(const NetConfig& cfg) {
    if (cfg.input_dim < 1) throw InvalidSpecError("net input_dim must be >= 1");
    for (int w : cfg.hidden_widths) {
        if (w < 1) throw InvalidSpecError("hidden widths must be >= 1");
    }
    if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0))
        throw OutOfRangeError("dropout_rate must be in [0,1)");
    if (!(cfg.output_bound > 0.0 && cfg.output_bound < 0.5))
        throw OutOfRangeError("output_bound q must be in (0, 1/2)");
    if (!(cfg.learning_rate > 0.0)) throw OutOfRangeError("learning_rate must be > 0");
    if (cfg.max_epochs < 0) throw OutOfRangeError("max_epochs must be >= 0");
    if (cfg.patience < 1) throw OutOfRangeError("patience must be >= 1");
    if (!(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0))
        throw OutOfRangeError("holdout_fraction must be in [0,1)");
}

void validate(const TestConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw OutOfRangeError("alpha must be in (0,1)");
    if (!(cfg.epsilon >= 0.0)) throw OutOfRangeError("epsilon must be >= 0");
    if (cfg.batch_size < 1) throw OutOfRangeError("batch_size must be >= 1");
    if (cfg.max_samples < cfg.batch_size)
        throw InvalidSpecError("max_samples must be >= batch_size");
    if (cfg.dim < 1) throw OutOfRangeError("dim must be >= 1");
    validate(cfg.net);
    if (cfg.net.input_dim != cfg.dim)
        throw DimMismatchError("net input_dim does not match test dim");
}

namespace {

void validate_side(const std::vector<double>& side, int dim, std::size_t pair_idx, const char* name) {
    if (static_cast<int>(side.size()) != dim) {
        throw DimMismatchError("pair " + std::to_string(pair_idx) + ": score_" + name +
                               " has dimension " + std::to_string(side.size()) + ", expected " +
                               std::to_string(dim));
    }
    for (double v : side) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("pair " + std::to_string(pair_idx) + ": score_" + name +
                                 " has a non-finite component");
        }
        if (v < 0.0 || v > 1.0) {
            throw OutOfRangeError("pair " + std::to_string(pair_idx) + ": score_" + name +
                                  " component " + std::to_string(v) + " outside [0,1]");
        }
    }
}

}  // namespace

const PairedBatch& validate_batch(const PairedBatch& batch, int dim) {
    if (batch.pairs.empty()) throw EmptyInputError("batch has no pairs");
    for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
        validate_side(batch.pairs[i].a, dim, i, "a");
        validate_side(batch.pairs[i].b, dim, i, "b");
    }
    return batch;
}

double log_betting_score(const BettingNet& net, const PairedBatch& batch, double epsilon) {
    double sum = 0.0;
    for (const ScorePair& p : batch.pairs) {
        const double delta = forward(net, p.a) - forward(net, p.b);
        if (1.0 + delta <= 0.0) {
            throw NonPositiveFactorError("betting factor 1 + phi(a) - phi(b) = " +
                                         std::to_string(1.0 + delta) +
                                         " <= 0; net violates its output bound");
        }
        sum += std::log1p(delta);
    }
    return sum - static_cast<double>(batch.pairs.size()) * epsilon;
}

WealthState update_wealth(const WealthState& state, double log_score, long long pairs_in_round) {
    WealthState next = state;
    next.log_wealth += log_score;
    next.round += 1;
    next.samples_seen += pairs_in_round;
    next.log_score_trace.push_back(log_score);
    return next;
}

bool threshold_crossed(const WealthState& state, double alpha) {
    return state.log_wealth >= -std::log(alpha);
}

}  // namespace bsa
