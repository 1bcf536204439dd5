#include "voisim/harness.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "voisim/parallel.hpp"
#include "voisim/sim_core.hpp"

namespace voisim {

namespace {

std::string join(const std::vector<std::string>& parts) {
    std::ostringstream os;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) os << "; ";
        os << parts[i];
    }
    return os.str();
}

Eigen::MatrixXd error_weight(const ScenarioConfig& cfg, int k) {
    if (!cfg.cost.Lambda.empty()) return cfg.cost.Lambda.at(k);
    return Eigen::MatrixXd::Identity(cfg.source.state_dim, cfg.source.state_dim);
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> v)
    : std::invalid_argument("invalid scenario: " + join(v)), violations(std::move(v)) {}

bool SimContext::supports_exact_dp() const {
    return config.source.state_dim == 1 && config.source.output_dim == 1 &&
           config.channel.delay <= 2;
}

SimContext make_context(ScenarioConfig config, const DpOptions& dp_options,
                        const RolloutOptions& rollout_options) {
    std::vector<std::string> violations = validate(config);
    if (!violations.empty()) throw ValidationError(std::move(violations));

    SimContext ctx;
    ctx.config = std::move(config);
    ctx.dp_options = dp_options;
    ctx.rollout_options = rollout_options;
    ctx.schedule = std::make_shared<const FilterSchedule>(ctx.config.source);

    MatrixSeq weight = ctx.config.cost.Lambda;
    if (ctx.config.mode == Mode::Control) {
        auto riccati = std::make_shared<RiccatiSolution>(
            solve_riccati(ctx.config.source, ctx.config.cost));
        // The scheduler prices mismatch by Gamma in control mode.
        weight = MatrixSeq(riccati->Gamma);
        ctx.riccati = std::move(riccati);
    }
    ctx.kernel = std::make_shared<const MismatchKernel>(ctx.config.source, ctx.schedule,
                                                        ctx.config.channel, std::move(weight),
                                                        ctx.config.cost.theta);
    return ctx;
}

PolicyFactory make_policy_factory(SimContext& ctx, const PolicySpec& spec) {
    PolicySpec resolved = spec;
    if (resolved.kind == PolicyKind::VoiAuto)
        resolved.kind = ctx.supports_exact_dp() ? PolicyKind::VoiDp : PolicyKind::VoiRollout;
    if (resolved.kind == PolicyKind::VoiDp && !ctx.grid)
        ctx.grid = std::make_shared<const ValueFunctionGrid>(solve_dp(ctx.kernel, ctx.dp_options));

    PolicyContext pctx{ctx.kernel, ctx.grid, ctx.rollout_options};
    return [resolved, pctx](std::uint64_t episode_seed) {
        return make_policy(resolved, pctx, episode_seed);
    };
}

EpisodeLog run_episode(const SimContext& ctx, const PolicyFactory& factory,
                       const std::string& policy_name, std::uint64_t seed) {
    const ScenarioConfig& cfg = ctx.config;
    const SourceModel& model = cfg.source;
    const int T = model.horizon;
    const int d = cfg.channel.delay;
    const bool control = cfg.mode == Mode::Control;

    RngStream init(seed, "init");
    RngStream process(seed, "process");
    RngStream measurement(seed, "measurement");
    SourceSimulator sim(model);
    ChannelPipeline channel(cfg.channel, T, RngStream(seed, "erasure"),
                            RngStream(seed, "lambda"));
    Encoder encoder(model, *ctx.schedule, d, control);
    Decoder decoder(model, d, control);
    std::unique_ptr<SchedulingPolicy> policy = factory(seed);

    EpisodeLog log;
    log.mode = cfg.mode;
    log.horizon = T;
    log.seed = seed;
    log.policy_name = policy_name;
    log.slots.resize(static_cast<std::size_t>(T) + 1);

    SourceState src{0, sim.initial_state(init)};
    std::optional<Eigen::VectorXd> u_prev;

    for (int k = 0; k <= T; ++k) {
        SlotRecord& slot = log.slots[static_cast<std::size_t>(k)];
        slot.lambda = channel.lambda_step();
        if (k > 0) {
            sim.step(src, u_prev, process);
            encoder.predict(u_prev);
        }
        const Eigen::VectorXd y = sim.observe(src, measurement);
        encoder.update(y);
        encoder.note_lambda(slot.lambda);

        // The slot's delivery (of the packet sent d slots ago) is known to
        // both sides before this slot's transmit decision.
        const ChannelOutput z = channel.receive();
        decoder.step(z);
        encoder.apply_delivery(z.delivered);
        slot.delivered = z.delivered;

        int sigma = 0;
        if (k <= T - d) {
            const Decision decision = policy->decide(encoder.scheduler_input());
            sigma = decision.sigma;
            slot.voi = decision.voi;
        }
        slot.sigma = sigma;
        encoder.record_decision(sigma != 0);
        slot.gamma = channel.send(sigma != 0, encoder.xcheck());
        if (sigma != 0) {
            ++log.sends;
            if (slot.gamma && !*slot.gamma) ++log.losses;
        }

        if (control) {
            const Eigen::VectorXd u = ce_input(*ctx.riccati, decoder.xhat(), k);
            decoder.push_input(u);
            encoder.record_input(u);
            slot.u = u;
            u_prev = u;
        }

        slot.x = src.x;
        slot.xcheck = encoder.xcheck();
        slot.xhat = decoder.xhat();
        const Eigen::VectorXd err = slot.x - slot.xhat;
        slot.mse = err.dot(error_weight(cfg, k) * err);
        log.total_mse += slot.mse;
        log.phi += cfg.cost.theta.at(k) * sigma + slot.mse;
        if (control) {
            log.phi_prime += cfg.cost.theta.at(k) * sigma +
                             slot.x.dot(cfg.cost.Q.at(k) * slot.x) +
                             slot.u.dot(cfg.cost.R.at(k) * slot.u);
        }
        channel.end_slot();
    }

    if (control) {
        sim.step(src, u_prev, process);
        log.final_state = src.x;
        log.phi_prime += src.x.dot(cfg.cost.Q.at(T + 1) * src.x);
        log.psi = psi_loss(log, *ctx.riccati, model, cfg.cost);
    }

    const ClampStats stats = policy->clamp_stats();
    log.voi_evals = stats.evals;
    log.voi_clamped = stats.clamped;
    log.clamp_flagged = stats.evals > 0 && stats.clamped * 100 > stats.evals;
    return log;
}

EpisodeLog run_episode(SimContext& ctx, std::uint64_t seed) {
    const PolicyFactory factory = make_policy_factory(ctx, ctx.config.policy);
    return run_episode(ctx, factory, ctx.config.policy.name(), seed);
}

double evaluate_phi(const EpisodeLog& log, const CostSpec& cost) {
    double total = 0.0;
    for (std::size_t k = 0; k < log.slots.size(); ++k) {
        const SlotRecord& slot = log.slots[k];
        const Eigen::VectorXd err = slot.x - slot.xhat;
        const Eigen::MatrixXd w = cost.Lambda.empty()
                                      ? Eigen::MatrixXd::Identity(err.size(), err.size())
                                      : cost.Lambda.at(static_cast<int>(k));
        total += cost.theta.at(static_cast<int>(k)) * slot.sigma + err.dot(w * err);
    }
    return total;
}

double evaluate_phi_prime(const EpisodeLog& log, const CostSpec& cost) {
    double total = 0.0;
    for (std::size_t k = 0; k < log.slots.size(); ++k) {
        const SlotRecord& slot = log.slots[k];
        total += cost.theta.at(static_cast<int>(k)) * slot.sigma +
                 slot.x.dot(cost.Q.at(static_cast<int>(k)) * slot.x) +
                 slot.u.dot(cost.R.at(static_cast<int>(k)) * slot.u);
    }
    if (log.final_state.size() > 0)
        total += log.final_state.dot(cost.Q.at(log.horizon + 1) * log.final_state);
    return total;
}

namespace {

void finalize_stats(PolicyStats& stats) {
    const int n = stats.episodes;
    auto mean_se = [n](const std::vector<double>& xs, double& mean, double& se) {
        mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var = n > 1 ? var / (n - 1) : 0.0;
        se = std::sqrt(var / n);
    };
    mean_se(stats.loss, stats.loss_mean, stats.loss_se);
    mean_se(stats.mse, stats.mse_mean, stats.mse_se);
    double dummy = 0.0;
    mean_se(stats.sends, stats.sends_mean, dummy);
    mean_se(stats.losses, stats.losses_mean, dummy);
    const double total_sends = std::accumulate(stats.sends.begin(), stats.sends.end(), 0.0);
    const double total_losses = std::accumulate(stats.losses.begin(), stats.losses.end(), 0.0);
    stats.loss_fraction = total_sends > 0 ? total_losses / total_sends : 0.0;
}

}  // namespace

AggregateReport monte_carlo(const SimContext& ctx, const std::vector<PolicyUnderTest>& policies,
                            int n_episodes, int workers) {
    if (n_episodes < 2) throw std::invalid_argument("monte_carlo requires at least 2 episodes");
    if (policies.empty()) throw std::invalid_argument("monte_carlo requires at least one policy");

    AggregateReport report;
    report.mode = ctx.config.mode;
    report.master_seed = ctx.config.seed;
    report.seeds.reserve(static_cast<std::size_t>(n_episodes));
    for (int e = 0; e < n_episodes; ++e)
        report.seeds.push_back(episode_seed(ctx.config.seed, e));

    const std::size_t np = policies.size();
    report.policies.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
        PolicyStats& stats = report.policies[p];
        stats.name = policies[p].name;
        stats.episodes = n_episodes;
        stats.loss.resize(static_cast<std::size_t>(n_episodes));
        stats.mse.resize(static_cast<std::size_t>(n_episodes));
        stats.sends.resize(static_cast<std::size_t>(n_episodes));
        stats.losses.resize(static_cast<std::size_t>(n_episodes));
    }
    std::vector<long> clamp_counts(np, 0);
    std::mutex clamp_mutex;

    // One task per (policy, episode); outputs land at disjoint indices, so
    // the reduction is independent of the worker layout.
    const long tasks = static_cast<long>(np) * n_episodes;
    parallel_for(tasks, workers, [&](long t) {
        const std::size_t p = static_cast<std::size_t>(t) / n_episodes;
        const int e = static_cast<int>(static_cast<std::size_t>(t) % n_episodes);
        const std::uint64_t seed = report.seeds[static_cast<std::size_t>(e)];
        const EpisodeLog log = run_episode(ctx, policies[p].make, policies[p].name, seed);
        PolicyStats& stats = report.policies[p];
        const double loss = ctx.config.mode == Mode::Control ? log.phi_prime : log.phi;
        stats.loss[static_cast<std::size_t>(e)] = loss;
        stats.mse[static_cast<std::size_t>(e)] = log.total_mse;
        stats.sends[static_cast<std::size_t>(e)] = log.sends;
        stats.losses[static_cast<std::size_t>(e)] = log.losses;
        if (log.clamp_flagged) {
            std::lock_guard<std::mutex> lock(clamp_mutex);
            ++clamp_counts[p];
        }
    });

    for (std::size_t p = 0; p < np; ++p) {
        finalize_stats(report.policies[p]);
        report.policies[p].clamp_flagged_episodes = clamp_counts[p];
    }
    for (std::size_t a = 0; a < np; ++a) {
        for (std::size_t b = a + 1; b < np; ++b) {
            PairDiff diff;
            diff.a = report.policies[a].name;
            diff.b = report.policies[b].name;
            std::vector<double> delta(static_cast<std::size_t>(n_episodes));
            for (int e = 0; e < n_episodes; ++e)
                delta[static_cast<std::size_t>(e)] =
                    report.policies[a].loss[static_cast<std::size_t>(e)] -
                    report.policies[b].loss[static_cast<std::size_t>(e)];
            double mean = std::accumulate(delta.begin(), delta.end(), 0.0) / n_episodes;
            double var = 0.0;
            for (double x : delta) var += (x - mean) * (x - mean);
            var = n_episodes > 1 ? var / (n_episodes - 1) : 0.0;
            diff.mean_diff = mean;
            diff.se_diff = std::sqrt(var / n_episodes);
            report.pairs.push_back(diff);
        }
    }
    return report;
}

AggregateReport monte_carlo(SimContext& ctx, const std::vector<PolicySpec>& specs,
                            int n_episodes, int workers) {
    std::vector<PolicyUnderTest> policies;
    policies.reserve(specs.size());
    for (const PolicySpec& spec : specs)
        policies.push_back({spec.name(), make_policy_factory(ctx, spec)});
    return monte_carlo(static_cast<const SimContext&>(ctx), policies, n_episodes, workers);
}

}  // namespace voisim
