#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "bsa/core.hpp"
#include "bsa/net_config.hpp"

namespace bsa {

struct NetLayer {
    int in = 0;
    int out = 0;
    std::vector<double> W;       // out x in, row-major
    std::vector<double> b;       // out
    std::vector<double> gain;    // layer-norm gamma, out
    std::vector<double> offset;  // layer-norm beta, out
};

// The bounded witness network phi. Output is scale * q * tanh(head), so
// |phi| <= q for any parameters as long as |scale| <= 1, and c*phi stays in
// the class for every c in [-1,1] via the explicit scale field.
struct BettingNet {
    NetConfig cfg;
    std::vector<NetLayer> hidden;
    std::vector<double> out_w;  // width of last hidden layer (or input_dim)
    double out_b = 0.0;
    double scale = 1.0;  // c in [-1,1]; structural, never trained
};

struct NetGradient {
    struct LayerGrad {
        std::vector<double> W, b, gain, offset;
    };
    std::vector<LayerGrad> hidden;
    std::vector<double> out_w;
    double out_b = 0.0;
};

// Per-pair, per-side, per-layer dropout keep masks, sampled once per
// training epoch so an epoch's objective and gradient see the same masks.
struct DropoutMasks {
    int n_pairs = 0;
    std::vector<std::uint8_t> keep;  // layout: pair-major, then side (a,b), then layer units
};

// Accumulated training data for the betting net, split once on arrival into
// train and holdout pools. A pair's pool assignment is a deterministic
// function of the seed and its arrival index, so the split never reshuffles
// as data grows.
class TrainState {
  public:
    TrainState() = default;
    TrainState(std::uint64_t split_seed, double holdout_fraction);

    void observe(const PairedBatch& batch);

    const std::vector<ScorePair>& train_pairs() const { return train_; }
    const std::vector<ScorePair>& holdout_pairs() const { return holdout_; }
    std::size_t total_pairs() const { return train_.size() + holdout_.size(); }

    // Stats from the most recent train() call.
    int last_epochs = 0;
    double best_holdout_objective = 0.0;
    int epochs_since_improvement = 0;

  private:
    std::vector<ScorePair> train_;
    std::vector<ScorePair> holdout_;
    std::mt19937_64 split_rng_{0};
    double holdout_fraction_ = 0.0;
};

// phi_0: random hidden layers, zero output layer, so forward is identically
// zero and the first round's betting score is exactly exp(-b*eps).
BettingNet init_betting_net(const NetConfig& cfg, std::uint64_t seed);

// Fully randomized parameters (hidden and output head). Used by property
// tests and Monte-Carlo checks that need arbitrary members of the class.
BettingNet random_betting_net(const NetConfig& cfg, std::uint64_t seed);

// Evaluation-mode forward pass (dropout disabled). Output in [-q, q].
// Throws DimMismatchError if score.size() != cfg.input_dim.
double forward(const BettingNet& net, std::span<const double> score);

// Mean over pairs of log(1 + phi(a) - phi(b)), evaluation mode.
// Throws EmptyInputError on an empty pair list.
double objective(const BettingNet& net, std::span<const ScorePair> pairs);

// Same objective with the given dropout masks applied (inverted dropout,
// activations rescaled by 1/(1-p) so evaluation needs no correction).
double objective(const BettingNet& net, std::span<const ScorePair> pairs, const DropoutMasks& masks);

// Exact gradient of the (eval-mode) objective with respect to every
// trainable parameter, via backpropagation through the tanh head, dropout,
// ReLU, layer norm and linear maps.
NetGradient gradient(const BettingNet& net, std::span<const ScorePair> pairs);

// Gradient of the mask-fixed objective.
NetGradient gradient(const BettingNet& net, std::span<const ScorePair> pairs, const DropoutMasks& masks);

DropoutMasks sample_dropout_masks(const NetConfig& cfg, int n_pairs, std::mt19937_64& rng);

// Full-batch gradient ascent on the training pool with early stopping on
// the holdout objective (falls back to the training objective when the
// holdout pool is empty). Dropout masks are resampled each epoch from rng.
// Returns the parameters that achieved the best stopping metric; `state`
// records epoch statistics. max_epochs == 0 returns the net unchanged.
BettingNet train(const BettingNet& net, TrainState& state, const NetConfig& cfg, std::mt19937_64& rng);

// c * phi: multiplies the output scale. Throws OutOfRangeError for |c| > 1.
BettingNet scale_net(const BettingNet& net, double c);

// Versioned JSON checkpoint; round-trips bit-exactly.
void save_checkpoint(const BettingNet& net, std::ostream& out);
BettingNet load_checkpoint(std::istream& in);

}  // namespace bsa
