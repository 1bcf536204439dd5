#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "voisim/kernel.hpp"

namespace voisim {

/// Raised when the exact tabulated solver cannot handle a configuration;
/// the message points at the rollout scheduler.
struct UnsupportedConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Out-of-grid evaluation accounting for one episode.
struct ClampStats {
    long evals = 0;
    long clamped = 0;
};

struct DpOptions {
    int e_nodes = 401;         // odd so a node sits exactly at zero
    int nu_nodes = 201;        // delay-2 grids only
    int quadrature = 21;       // Gauss-Hermite order
    double e_range_stds = 8.0;
    double nu_range_stds = 6.0;
    int workers = 0;  // 0: hardware concurrency
};

/// Uniform grid axis with clamped multilinear lookup.
struct UniformAxis {
    double lo = 0.0;
    double hi = 0.0;
    double step = 1.0;
    int n = 1;

    void build(double half_range, int nodes);
    double node(int i) const { return lo + step * i; }
    /// Lower node index and fraction for x; sets *clamped when outside.
    void locate(double x, int& i0, double& frac, bool* clamped) const;
};

/// Tabulated value function and decision regions over the reduced scheduler
/// state, one slab per decision slot k in [0, T-d]. Scalar sources only,
/// delay 1 or 2. Deterministic loss sequences collapse the lambda axes; a
/// finite Markov chain adds one (d=1) or two (d=2) discrete axes.
class ValueFunctionGrid {
  public:
    int delay() const { return delay_; }
    int horizon() const { return horizon_; }
    int last_decision_slot() const { return horizon_ - delay_; }
    int num_lambda() const { return n_lambda_; }
    bool lambda_is_chain() const { return n_lambda_ > 1 || chain_; }
    const UniformAxis& e_axis() const { return e_axis_; }
    const UniformAxis& nu_axis() const { return nu_axis_; }
    double lambda_state(int i) const { return lambda_states_.at(static_cast<std::size_t>(i)); }

    /// Value / value-of-information at an arbitrary state; multilinear in
    /// the continuous coordinates, clamped at the grid edge.
    double value_at(int k, const SchedulerInput& s, ClampStats* stats = nullptr) const;
    double voi_at(int k, const SchedulerInput& s, ClampStats* stats = nullptr) const;

    /// Predicted expected total loss of the tabulated policy, including the
    /// decision-independent filter term and the warm-up slots.
    double expected_total_loss() const;

    // Raw slabs for export and structure tests.
    const Eigen::ArrayXd& value_slab(int k) const { return value_.at(static_cast<std::size_t>(k)); }
    const Eigen::ArrayXd& voi_slab(int k) const { return voi_.at(static_cast<std::size_t>(k)); }
    const std::vector<std::uint8_t>& transmit_slab(int k) const {
        return transmit_.at(static_cast<std::size_t>(k));
    }
    std::size_t flat_index(int ei, int vi, int lp, int lc, int sp) const;

    const MismatchKernel& kernel() const { return *kernel_; }

  private:
    friend ValueFunctionGrid solve_dp(std::shared_ptr<const MismatchKernel> kernel,
                                      const DpOptions& options);

    std::array<double, 2> interpolate_pair(int k, const SchedulerInput& s,
                                           ClampStats* stats) const;  // {V, VoI}

    std::shared_ptr<const MismatchKernel> kernel_;
    int delay_ = 1;
    int horizon_ = 0;
    int n_lambda_ = 1;
    bool chain_ = false;
    UniformAxis e_axis_;
    UniformAxis nu_axis_;
    std::vector<double> lambda_states_;
    std::vector<Eigen::ArrayXd> value_;            // slot -> flattened slab
    std::vector<Eigen::ArrayXd> voi_;              // slot -> flattened slab
    std::vector<std::vector<std::uint8_t>> transmit_;
    DpOptions options_;
};

/// Backward induction over the reduced state. Requires a scalar source
/// (n = m = 1) and d <= 2; throws UnsupportedConfigError otherwise.
ValueFunctionGrid solve_dp(std::shared_ptr<const MismatchKernel> kernel,
                           const DpOptions& options = {});

/// Convenience overload for estimation-mode scenarios.
ValueFunctionGrid solve_dp(const SourceModel& model, const ChannelSpec& channel,
                           const CostSpec& cost, const DpOptions& options = {});

}  // namespace voisim
