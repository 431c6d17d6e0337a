#include "bsa/sequential_test.hpp"

#include <utility>

#include "bsa/errors.hpp"
#include "bsa/rng.hpp"

namespace bsa {

AuditTrace run_audit(const BatchSource& batches, const TestConfig& cfg,
                     const RoundObserver& observer) {
    validate(cfg);

    BettingNet net = init_betting_net(cfg.net, derive_seed(cfg.seed, {seed_tag::net_init}));
    TrainState state(derive_seed(cfg.seed, {seed_tag::split}), cfg.net.holdout_fraction);
    std::mt19937_64 train_rng = make_rng(derive_seed(cfg.seed, {seed_tag::train}));

    AuditTrace trace;
    trace.effective_epsilon = cfg.epsilon;
    WealthState wealth;

    while (wealth.samples_seen < cfg.max_samples) {
        std::optional<PairedBatch> next = batches();
        if (!next) break;
        PairedBatch batch = std::move(*next);
        const long long remaining = cfg.max_samples - wealth.samples_seen;
        if (static_cast<long long>(batch.pairs.size()) > remaining) {
            batch.pairs.resize(static_cast<std::size_t>(remaining));
        }
        validate_batch(batch, cfg.dim);

        const double log_score = log_betting_score(net, batch, cfg.epsilon);
        wealth = update_wealth(wealth, log_score, static_cast<long long>(batch.pairs.size()));

        RoundRecord rec;
        rec.round = wealth.round;
        rec.samples_seen = wealth.samples_seen;
        rec.log_score = log_score;
        rec.log_wealth = wealth.log_wealth;
        trace.rounds.push_back(rec);

        if (observer) observer(batch, net, trace.rounds.back());

        if (threshold_crossed(wealth, cfg.alpha)) {
            trace.verdict.outcome = Verdict::Outcome::Rejected;
            trace.verdict.rejected_at_round = wealth.round;
            break;
        }

        // Scoring strictly precedes training: the net that scores round t is
        // a function of rounds 1..t-1 only.
        state.observe(batch);
        net = train(net, state, cfg.net, train_rng);
        trace.rounds.back().holdout_objective = state.best_holdout_objective;
    }

    trace.verdict.samples_seen = wealth.samples_seen;
    trace.verdict.final_log_wealth = wealth.log_wealth;
    trace.wealth = std::move(wealth);
    return trace;
}

AuditTrace run_exact(const BatchSource& batches, const TestConfig& cfg,
                     const RoundObserver& observer) {
    TestConfig exact = cfg;
    exact.epsilon = 0.0;
    return run_audit(batches, exact, observer);
}

std::vector<AuditTrace> run_parallel_bonferroni(std::vector<BatchSource> streams,
                                                const TestConfig& cfg) {
    if (streams.empty()) throw EmptyInputError("need at least one stream");
    const double m = static_cast<double>(streams.size());
    std::vector<AuditTrace> traces;
    traces.reserve(streams.size());
    for (std::size_t i = 0; i < streams.size(); ++i) {
        TestConfig per_test = cfg;
        per_test.alpha = cfg.alpha / m;
        if (i > 0) per_test.seed = derive_seed(cfg.seed, {seed_tag::parallel, i});
        traces.push_back(run_audit(streams[i], per_test));
    }
    return traces;
}

}  // namespace bsa
