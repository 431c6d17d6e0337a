#include "bsa/betting_net.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "bsa/errors.hpp"
#include "bsa/rng.hpp"

namespace bsa {

namespace {

constexpr double kLayerNormEps = 1e-5;

// Forward intermediates for one input, kept for backpropagation.
struct SideTrace {
    std::vector<double> input;
    std::vector<std::vector<double>> zhat;   // normalized pre-activations
    std::vector<std::vector<double>> preact; // gain*zhat + offset (pre-ReLU)
    std::vector<std::vector<double>> h;      // layer outputs (post ReLU/dropout)
    std::vector<double> sigma;
    double raw = 0.0;
    double th = 0.0;  // tanh(raw)

    void resize(const BettingNet& net) {
        const std::size_t L = net.hidden.size();
        zhat.resize(L);
        preact.resize(L);
        h.resize(L);
        sigma.resize(L);
        for (std::size_t l = 0; l < L; ++l) {
            zhat[l].resize(net.hidden[l].out);
            preact[l].resize(net.hidden[l].out);
            h[l].resize(net.hidden[l].out);
        }
    }
};

// mask: per-layer concatenated keep flags for this input, or nullptr for
// evaluation mode.
double forward_pass(const BettingNet& net, std::span<const double> x, SideTrace& tr,
                    const std::uint8_t* mask) {
    const double keep_scale = 1.0 / (1.0 - net.cfg.dropout_rate);
    tr.input.assign(x.begin(), x.end());
    const double* cur = tr.input.data();
    std::size_t cur_n = tr.input.size();
    std::size_t mask_off = 0;

    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        const NetLayer& lay = net.hidden[l];
        const int m = lay.out;
        std::vector<double>& zhat = tr.zhat[l];
        std::vector<double>& u = tr.preact[l];
        std::vector<double>& h = tr.h[l];

        // z = W x + b, accumulated straight into zhat before normalizing
        double mean = 0.0;
        for (int j = 0; j < m; ++j) {
            const double* row = lay.W.data() + static_cast<std::size_t>(j) * cur_n;
            double z = lay.b[j];
            for (std::size_t k = 0; k < cur_n; ++k) z += row[k] * cur[k];
            zhat[j] = z;
            mean += z;
        }
        mean /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) {
            const double c = zhat[j] - mean;
            var += c * c;
        }
        var /= m;
        const double sigma = std::sqrt(var + kLayerNormEps);
        tr.sigma[l] = sigma;
        for (int j = 0; j < m; ++j) {
            zhat[j] = (zhat[j] - mean) / sigma;
            u[j] = lay.gain[j] * zhat[j] + lay.offset[j];
            double a = u[j] > 0.0 ? u[j] : 0.0;
            if (mask) a = mask[mask_off + j] ? a * keep_scale : 0.0;
            h[j] = a;
        }
        mask_off += m;
        cur = h.data();
        cur_n = h.size();
    }

    double raw = net.out_b;
    for (std::size_t k = 0; k < cur_n; ++k) raw += net.out_w[k] * cur[k];
    tr.raw = raw;
    tr.th = std::tanh(raw);
    return net.scale * net.cfg.output_bound * tr.th;
}

struct BackScratch {
    std::vector<double> du, dz, dh;

    void resize(const BettingNet& net) {
        std::size_t widest = static_cast<std::size_t>(net.cfg.input_dim);
        for (const NetLayer& l : net.hidden) widest = std::max(widest, static_cast<std::size_t>(l.out));
        du.resize(widest);
        dz.resize(widest);
        dh.resize(widest);
    }
};

void backward_pass(const BettingNet& net, const SideTrace& tr, double dphi, NetGradient& g,
                   const std::uint8_t* mask, BackScratch& bs) {
    const double keep_scale = 1.0 / (1.0 - net.cfg.dropout_rate);
    const double draw = dphi * net.scale * net.cfg.output_bound * (1.0 - tr.th * tr.th);

    const std::size_t L = net.hidden.size();
    const std::vector<double>& last = L > 0 ? tr.h[L - 1] : tr.input;
    for (std::size_t k = 0; k < last.size(); ++k) g.out_w[k] += draw * last[k];
    g.out_b += draw;

    double* dh = bs.dh.data();
    for (std::size_t k = 0; k < last.size(); ++k) dh[k] = draw * net.out_w[k];

    std::size_t mask_off = 0;
    for (std::size_t l = 0; l < L; ++l) mask_off += net.hidden[l].out;

    for (std::size_t li = L; li-- > 0;) {
        const NetLayer& lay = net.hidden[li];
        const int m = lay.out;
        mask_off -= m;
        NetGradient::LayerGrad& lg = g.hidden[li];
        const std::vector<double>& x = li == 0 ? tr.input : tr.h[li - 1];
        const double* zhat = tr.zhat[li].data();
        const double* preact = tr.preact[li].data();

        // through dropout and ReLU into the LN affine output, accumulating
        // the gain/offset gradients and the LN reduction terms in one sweep
        double* du = bs.du.data();
        double* dz = bs.dz.data();
        double s1 = 0.0, s2 = 0.0;
        for (int j = 0; j < m; ++j) {
            double d = dh[j];
            if (mask) d = mask[mask_off + j] ? d * keep_scale : 0.0;
            d = preact[j] > 0.0 ? d : 0.0;
            lg.gain[j] += d * zhat[j];
            lg.offset[j] += d;
            const double dzh = d * lay.gain[j];
            du[j] = dzh;
            s1 += dzh;
            s2 += dzh * zhat[j];
        }
        s1 /= m;
        s2 /= m;
        const double inv_sigma = 1.0 / tr.sigma[li];
        for (int j = 0; j < m; ++j) {
            dz[j] = (du[j] - s1 - zhat[j] * s2) * inv_sigma;
        }

        for (std::size_t k = 0; k < x.size(); ++k) dh[k] = 0.0;
        for (int j = 0; j < m; ++j) {
            const double dzj = dz[j];
            double* grow = lg.W.data() + static_cast<std::size_t>(j) * x.size();
            const double* wrow = lay.W.data() + static_cast<std::size_t>(j) * x.size();
            for (std::size_t k = 0; k < x.size(); ++k) {
                grow[k] += dzj * x[k];
                dh[k] += wrow[k] * dzj;
            }
            lg.b[j] += dzj;
        }
    }
}

NetGradient zero_gradient(const BettingNet& net) {
    NetGradient g;
    g.hidden.resize(net.hidden.size());
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        const NetLayer& lay = net.hidden[l];
        g.hidden[l].W.assign(lay.W.size(), 0.0);
        g.hidden[l].b.assign(lay.b.size(), 0.0);
        g.hidden[l].gain.assign(lay.gain.size(), 0.0);
        g.hidden[l].offset.assign(lay.offset.size(), 0.0);
    }
    g.out_w.assign(net.out_w.size(), 0.0);
    g.out_b = 0.0;
    return g;
}

void ascend(BettingNet& net, double lr, const NetGradient& g) {
    for (std::size_t l = 0; l < net.hidden.size(); ++l) {
        NetLayer& lay = net.hidden[l];
        const NetGradient::LayerGrad& lg = g.hidden[l];
        for (std::size_t i = 0; i < lay.W.size(); ++i) lay.W[i] += lr * lg.W[i];
        for (std::size_t i = 0; i < lay.b.size(); ++i) lay.b[i] += lr * lg.b[i];
        for (std::size_t i = 0; i < lay.gain.size(); ++i) lay.gain[i] += lr * lg.gain[i];
        for (std::size_t i = 0; i < lay.offset.size(); ++i) lay.offset[i] += lr * lg.offset[i];
    }
    for (std::size_t i = 0; i < net.out_w.size(); ++i) net.out_w[i] += lr * g.out_w[i];
    net.out_b += lr * g.out_b;
}

std::size_t units_per_side(const BettingNet& net) {
    std::size_t n = 0;
    for (const NetLayer& l : net.hidden) n += l.out;
    return n;
}

void check_dim(const BettingNet& net, std::span<const double> score) {
    if (static_cast<int>(score.size()) != net.cfg.input_dim) {
        throw DimMismatchError("score dimension " + std::to_string(score.size()) +
                               " does not match net input_dim " +
                               std::to_string(net.cfg.input_dim));
    }
}

// Shared core of the four objective/gradient entry points. With grad ==
// nullptr only the objective value is computed.
double objective_and_gradient(const BettingNet& net, std::span<const ScorePair> pairs,
                              const DropoutMasks* masks, NetGradient* grad) {
    if (pairs.empty()) throw EmptyInputError("objective needs at least one pair");
    const std::size_t per_side = units_per_side(net);
    const std::size_t per_pair = 2 * per_side;
    const bool use_masks = masks != nullptr && net.cfg.dropout_rate > 0.0;

    SideTrace ta, tb;
    ta.resize(net);
    tb.resize(net);
    BackScratch bs;
    bs.resize(net);
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        check_dim(net, pairs[i].a);
        check_dim(net, pairs[i].b);
        const std::uint8_t* ma = nullptr;
        const std::uint8_t* mb = nullptr;
        if (use_masks) {
            ma = masks->keep.data() + i * per_pair;
            mb = ma + per_side;
        }
        const double pa = forward_pass(net, pairs[i].a, ta, ma);
        const double pb = forward_pass(net, pairs[i].b, tb, mb);
        const double delta = pa - pb;
        if (1.0 + delta <= 0.0) {
            throw NonPositiveFactorError("betting factor <= 0 during training");
        }
        sum += std::log1p(delta);
        if (grad) {
            const double w = inv_n / (1.0 + delta);
            backward_pass(net, ta, w, *grad, ma, bs);
            backward_pass(net, tb, -w, *grad, mb, bs);
        }
    }
    return sum * inv_n;
}

}  // namespace

TrainState::TrainState(std::uint64_t split_seed, double holdout_fraction)
    : split_rng_(make_rng(split_seed)), holdout_fraction_(holdout_fraction) {}

void TrainState::observe(const PairedBatch& batch) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const ScorePair& p : batch.pairs) {
        if (holdout_fraction_ > 0.0 && u(split_rng_) < holdout_fraction_) {
            holdout_.push_back(p);
        } else {
            train_.push_back(p);
        }
    }
}

BettingNet init_betting_net(const NetConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    BettingNet net;
    net.cfg = cfg;
    std::mt19937_64 rng = make_rng(seed);
    int in = cfg.input_dim;
    for (int width : cfg.hidden_widths) {
        NetLayer lay;
        lay.in = in;
        lay.out = width;
        // Nonzero random biases matter here: with b = 0 and a positive
        // scalar input, layer norm maps every x to the same normalized
        // vector and the net cannot distinguish inputs at all.
        const double k = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-k, k);
        lay.W.resize(static_cast<std::size_t>(width) * in);
        for (double& w : lay.W) w = u(rng);
        lay.b.resize(width);
        for (double& b : lay.b) b = u(rng);
        lay.gain.assign(width, 1.0);
        lay.offset.assign(width, 0.0);
        net.hidden.push_back(std::move(lay));
        in = width;
    }
    net.out_w.assign(in, 0.0);
    net.out_b = 0.0;
    net.scale = 1.0;
    return net;
}

BettingNet random_betting_net(const NetConfig& cfg, std::uint64_t seed) {
    BettingNet net = init_betting_net(cfg, seed);
    std::mt19937_64 rng = make_rng(derive_seed(seed, {seed_tag::net_init}));
    std::normal_distribution<double> small(0.0, 0.3);
    for (NetLayer& lay : net.hidden) {
        for (double& b : lay.b) b = small(rng);
        for (double& g : lay.gain) g = 1.0 + small(rng);
        for (double& o : lay.offset) o = small(rng);
    }
    std::normal_distribution<double> head(0.0, 1.0 / std::sqrt(static_cast<double>(net.out_w.size())));
    for (double& w : net.out_w) w = head(rng);
    net.out_b = small(rng);
    std::uniform_real_distribution<double> c(-1.0, 1.0);
    net.scale = c(rng);
    return net;
}

double forward(const BettingNet& net, std::span<const double> score) {
    check_dim(net, score);
    SideTrace tr;
    tr.resize(net);
    return forward_pass(net, score, tr, nullptr);
}

double objective(const BettingNet& net, std::span<const ScorePair> pairs) {
    return objective_and_gradient(net, pairs, nullptr, nullptr);
}

double objective(const BettingNet& net, std::span<const ScorePair> pairs,
                 const DropoutMasks& masks) {
    return objective_and_gradient(net, pairs, &masks, nullptr);
}

NetGradient gradient(const BettingNet& net, std::span<const ScorePair> pairs) {
    NetGradient g = zero_gradient(net);
    objective_and_gradient(net, pairs, nullptr, &g);
    return g;
}

NetGradient gradient(const BettingNet& net, std::span<const ScorePair> pairs,
                     const DropoutMasks& masks) {
    NetGradient g = zero_gradient(net);
    objective_and_gradient(net, pairs, &masks, &g);
    return g;
}

DropoutMasks sample_dropout_masks(const NetConfig& cfg, int n_pairs, std::mt19937_64& rng) {
    DropoutMasks m;
    m.n_pairs = n_pairs;
    std::size_t per_side = 0;
    for (int w : cfg.hidden_widths) per_side += w;
    m.keep.resize(static_cast<std::size_t>(n_pairs) * 2 * per_side, 1);
    if (cfg.dropout_rate <= 0.0) return m;
    std::bernoulli_distribution keep(1.0 - cfg.dropout_rate);
    for (std::uint8_t& k : m.keep) k = keep(rng) ? 1 : 0;
    return m;
}

BettingNet train(const BettingNet& net, TrainState& state, const NetConfig& cfg,
                 std::mt19937_64& rng) {
    state.last_epochs = 0;
    state.epochs_since_improvement = 0;
    if (cfg.max_epochs == 0 || state.total_pairs() == 0) {
        state.best_holdout_objective =
            state.holdout_pairs().empty()
                ? (state.train_pairs().empty() ? 0.0 : objective(net, state.train_pairs()))
                : objective(net, state.holdout_pairs());
        return net;
    }

    // The holdout split can leave the training pool empty early on; train on
    // whatever pool is non-empty.
    std::span<const ScorePair> train_pool = state.train_pairs();
    if (train_pool.empty()) train_pool = state.holdout_pairs();
    std::span<const ScorePair> metric_pool =
        state.holdout_pairs().empty() ? train_pool : std::span<const ScorePair>(state.holdout_pairs());

    BettingNet current = net;
    double best_metric = objective(current, metric_pool);
    BettingNet best = current;
    int since_improve = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        state.last_epochs = epoch;
        NetGradient g;
        if (cfg.dropout_rate > 0.0) {
            DropoutMasks masks =
                sample_dropout_masks(cfg, static_cast<int>(train_pool.size()), rng);
            g = gradient(current, train_pool, masks);
        } else {
            g = gradient(current, train_pool);
        }
        ascend(current, cfg.learning_rate, g);

        const double metric = objective(current, metric_pool);
        if (metric > best_metric) {
            best_metric = metric;
            best = current;
            since_improve = 0;
        } else {
            ++since_improve;
        }
        if (since_improve >= cfg.patience) break;
    }
    state.best_holdout_objective = best_metric;
    state.epochs_since_improvement = since_improve;
    return best;
}

BettingNet scale_net(const BettingNet& net, double c) {
    if (!(c >= -1.0 && c <= 1.0)) throw OutOfRangeError("scale factor must be in [-1,1]");
    BettingNet scaled = net;
    scaled.scale = net.scale * c;
    return scaled;
}

namespace {

nlohmann::json config_to_json(const NetConfig& cfg) {
    return {{"input_dim", cfg.input_dim},
            {"hidden_widths", cfg.hidden_widths},
            {"dropout_rate", cfg.dropout_rate},
            {"output_bound", cfg.output_bound},
            {"learning_rate", cfg.learning_rate},
            {"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"holdout_fraction", cfg.holdout_fraction}};
}

NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig cfg;
    cfg.input_dim = j.at("input_dim").get<int>();
    cfg.hidden_widths = j.at("hidden_widths").get<std::vector<int>>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.output_bound = j.at("output_bound").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.max_epochs = j.at("max_epochs").get<int>();
    cfg.patience = j.at("patience").get<int>();
    cfg.holdout_fraction = j.at("holdout_fraction").get<double>();
    return cfg;
}

}  // namespace

void save_checkpoint(const BettingNet& net, std::ostream& out) {
    nlohmann::json j;
    j["format"] = "betting-net-checkpoint";
    j["version"] = 1;
    j["config"] = config_to_json(net.cfg);
    j["scale"] = net.scale;
    j["layers"] = nlohmann::json::array();
    for (const NetLayer& lay : net.hidden) {
        j["layers"].push_back({{"in", lay.in},
                               {"out", lay.out},
                               {"W", lay.W},
                               {"b", lay.b},
                               {"gain", lay.gain},
                               {"offset", lay.offset}});
    }
    j["out_w"] = net.out_w;
    j["out_b"] = net.out_b;
    out << j.dump(2) << '\n';
}

BettingNet load_checkpoint(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint: ") + e.what());
    }
    try {
        if (j.at("format") != "betting-net-checkpoint" || j.at("version") != 1) {
            throw ParseError("unknown checkpoint format or version");
        }
        BettingNet net;
        net.cfg = config_from_json(j.at("config"));
        validate(net.cfg);
        net.scale = j.at("scale").get<double>();
        if (!(net.scale >= -1.0 && net.scale <= 1.0))
            throw ParseError("checkpoint scale outside [-1,1]");
        int in_dim = net.cfg.input_dim;
        for (const auto& lj : j.at("layers")) {
            NetLayer lay;
            lay.in = lj.at("in").get<int>();
            lay.out = lj.at("out").get<int>();
            lay.W = lj.at("W").get<std::vector<double>>();
            lay.b = lj.at("b").get<std::vector<double>>();
            lay.gain = lj.at("gain").get<std::vector<double>>();
            lay.offset = lj.at("offset").get<std::vector<double>>();
            if (lay.in != in_dim || lay.W.size() != static_cast<std::size_t>(lay.in) * lay.out ||
                lay.b.size() != static_cast<std::size_t>(lay.out) ||
                lay.gain.size() != lay.b.size() || lay.offset.size() != lay.b.size()) {
                throw ParseError("checkpoint layer shape mismatch");
            }
            in_dim = lay.out;
            net.hidden.push_back(std::move(lay));
        }
        const auto expected_widths = [&] {
            std::vector<int> w;
            for (const NetLayer& l : net.hidden) w.push_back(l.out);
            return w;
        }();
        if (expected_widths != net.cfg.hidden_widths)
            throw ParseError("checkpoint layers do not match config hidden_widths");
        net.out_w = j.at("out_w").get<std::vector<double>>();
        net.out_b = j.at("out_b").get<double>();
        if (net.out_w.size() != static_cast<std::size_t>(in_dim))
            throw ParseError("checkpoint output layer shape mismatch");
        return net;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad checkpoint: ") + e.what());
    }
}

}  // namespace bsa
