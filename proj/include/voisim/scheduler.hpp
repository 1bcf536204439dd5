#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "voisim/model.hpp"
#include "voisim/rng.hpp"
#include "voisim/value_function.hpp"

namespace voisim {

struct Decision {
    int sigma = 0;
    std::optional<double> voi;
};

/// Transmit policy interface. One instance serves one episode; instances
/// never share mutable state, so episodes can run on any worker layout.
class SchedulingPolicy {
  public:
    virtual ~SchedulingPolicy() = default;
    virtual Decision decide(const SchedulerInput& s) = 0;
    virtual std::string name() const = 0;
    virtual ClampStats clamp_stats() const { return {}; }
};

/// Factory producing a fresh policy instance for an episode seed.
using PolicyFactory = std::function<std::unique_ptr<SchedulingPolicy>(std::uint64_t)>;

struct PolicyUnderTest {
    std::string name;
    PolicyFactory make;
};

/// periodic / random / always / never.
class BaselinePolicy : public SchedulingPolicy {
  public:
    BaselinePolicy(PolicySpec spec, std::uint64_t seed);
    Decision decide(const SchedulerInput& s) override;
    std::string name() const override { return spec_.name(); }

  private:
    PolicySpec spec_;
    RngStream rng_;
};

/// Transmit iff the tabulated value of information is nonnegative (ties
/// transmit). Shares the immutable grid across episodes.
class VoiDpPolicy : public SchedulingPolicy {
  public:
    explicit VoiDpPolicy(std::shared_ptr<const ValueFunctionGrid> grid);
    Decision decide(const SchedulerInput& s) override;
    std::string name() const override { return "voi-dp"; }
    ClampStats clamp_stats() const override { return stats_; }

  private:
    std::shared_ptr<const ValueFunctionGrid> grid_;
    ClampStats stats_;
};

struct RolloutOptions {
    int samples = 256;        // pattern samples when the loss process is a chain
    int horizon_floor = 10;   // evaluation window floor beyond 3d
    int base_period = 0;      // 0: calibrate from the kernel
    double survival_cutoff = 1e-7;
};

/// Value of information estimated under a calibrated periodic continuation.
///
/// Transmitting changes the future only through the packet landing d slots
/// ahead, and the two continuations re-merge at the first shared delivery.
/// Conditioned on the delivery pattern, the mismatch-cost difference is a
/// deterministic quadratic recursion, so the evaluation integrates the
/// innovations in closed form and only the delivery pattern itself is
/// enumerated (deterministic loss sequences) or sampled (Markov chains).
class VoiRolloutPolicy : public SchedulingPolicy {
  public:
    VoiRolloutPolicy(std::shared_ptr<const MismatchKernel> kernel, std::uint64_t episode_seed,
                     RolloutOptions options = {});
    Decision decide(const SchedulerInput& s) override;
    std::string name() const override { return "voi-rollout"; }
    double evaluate(const SchedulerInput& s);  // VoI(k, s)

  private:
    double pattern_difference(const SchedulerInput& s, unsigned buffered_mask) const;
    double expected_difference_exact(const SchedulerInput& s) const;
    double expected_difference_sampled(const SchedulerInput& s);

    std::shared_ptr<const MismatchKernel> kernel_;
    std::uint64_t episode_seed_;
    RolloutOptions options_;
    int base_period_;
};

/// Pre-resolved policy inputs shared by every episode of a run.
struct PolicyContext {
    std::shared_ptr<const MismatchKernel> kernel;      // VoI policies
    std::shared_ptr<const ValueFunctionGrid> grid;     // voi-dp
    RolloutOptions rollout;
};

/// Instantiate the policy selected by `spec` for one episode.
std::unique_ptr<SchedulingPolicy> make_policy(const PolicySpec& spec, const PolicyContext& ctx,
                                              std::uint64_t episode_seed);

}  // namespace voisim
