#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "voisim/control.hpp"
#include "voisim/episode_log.hpp"
#include "voisim/scheduler.hpp"

namespace voisim {

/// Invalid scenario: carries every violation found by validate().
struct ValidationError : std::invalid_argument {
    explicit ValidationError(std::vector<std::string> violations);
    std::vector<std::string> violations;
};

/// Immutable per-scenario artifacts shared read-only by all episodes:
/// filter schedule, mismatch kernel (weighted by Lambda, or by Gamma in
/// control mode), the Riccati solution, and the value-function grid once a
/// policy needs it.
struct SimContext {
    ScenarioConfig config;
    std::shared_ptr<const FilterSchedule> schedule;
    std::shared_ptr<const MismatchKernel> kernel;
    std::shared_ptr<const RiccatiSolution> riccati;  // control mode
    std::shared_ptr<const ValueFunctionGrid> grid;   // solved on demand
    DpOptions dp_options;
    RolloutOptions rollout_options;

    bool supports_exact_dp() const;
};

/// Validate the scenario and precompute the shared artifacts. Throws
/// ValidationError when validate() reports violations.
SimContext make_context(ScenarioConfig config, const DpOptions& dp_options = {},
                        const RolloutOptions& rollout_options = {});

/// Resolve a selector into an episode-seeded factory. Solves and caches the
/// value-function grid inside `ctx` when the selector requires it; call
/// before fanning out to workers.
PolicyFactory make_policy_factory(SimContext& ctx, const PolicySpec& spec);

/// Run one slot-synchronous episode with the context's configured policy or
/// an explicit one. Identical (config, seed) pairs produce bit-identical
/// logs on any worker layout.
EpisodeLog run_episode(const SimContext& ctx, const PolicyFactory& factory,
                       const std::string& policy_name, std::uint64_t seed);
EpisodeLog run_episode(SimContext& ctx, std::uint64_t seed);

/// Realized losses recomputed from the logged trajectory columns.
double evaluate_phi(const EpisodeLog& log, const CostSpec& cost);
double evaluate_phi_prime(const EpisodeLog& log, const CostSpec& cost);

struct PolicyStats {
    std::string name;
    int episodes = 0;
    double loss_mean = 0.0;  // phi (estimation) or phi_prime (control)
    double loss_se = 0.0;
    double mse_mean = 0.0;
    double mse_se = 0.0;
    double sends_mean = 0.0;
    double losses_mean = 0.0;
    double loss_fraction = 0.0;  // total losses / total sends
    long clamp_flagged_episodes = 0;
    std::vector<double> loss;  // per episode, seed order
    std::vector<double> mse;
    std::vector<double> sends;
    std::vector<double> losses;
};

struct PairDiff {
    std::string a, b;
    double mean_diff = 0.0;  // mean of loss(a) - loss(b) on common seeds
    double se_diff = 0.0;
};

struct AggregateReport {
    Mode mode = Mode::Estimation;
    std::uint64_t master_seed = 0;
    std::vector<std::uint64_t> seeds;
    std::vector<PolicyStats> policies;
    std::vector<PairDiff> pairs;
};

/// Evaluate each policy on the same seed list with common random numbers;
/// paired statistics use matching seeds only. Requires n_episodes >= 2.
AggregateReport monte_carlo(const SimContext& ctx, const std::vector<PolicyUnderTest>& policies,
                            int n_episodes, int workers = 0);
AggregateReport monte_carlo(SimContext& ctx, const std::vector<PolicySpec>& specs,
                            int n_episodes, int workers = 0);

}  // namespace voisim
