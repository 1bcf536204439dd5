#pragma once

#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "voisim/encoder.hpp"
#include "voisim/model.hpp"

namespace voisim {

/// Gauss-Hermite rule for E[f(Z)], Z ~ N(0,1). Nodes/weights come from the
/// Golub-Welsch eigendecomposition and are symmetrized so that integrating
/// an even function is exactly even in the grid coordinate.
struct GaussHermite {
    explicit GaussHermite(int n);

    std::vector<double> nodes;    // abscissae in standard-normal units
    std::vector<double> weights;  // sum to 1
};

/// Everything the transmit schedulers need about the mismatch process, all
/// of it measurement-independent: per-slot dynamics, Kalman gains,
/// innovation covariances, the cost weight (Lambda, or Gamma in control
/// mode), the communication price, and the loss-probability process.
class MismatchKernel {
  public:
    MismatchKernel(const SourceModel& model, std::shared_ptr<const FilterSchedule> schedule,
                   const ChannelSpec& channel, MatrixSeq weight, ScalarSeq theta);

    int horizon() const { return model_->horizon; }
    int delay() const { return channel_->delay; }
    int state_dim() const { return model_->state_dim; }
    int output_dim() const { return model_->output_dim; }

    const Eigen::MatrixXd& A(int k) const { return model_->A.at(k); }
    const Eigen::MatrixXd& gain(int k) const { return schedule_->gain(k); }
    const Eigen::MatrixXd& innovation_cov(int k) const { return schedule_->innovation_cov(k); }
    const Eigen::MatrixXd& innovation_cov_sqrt(int k) const {
        return schedule_->innovation_cov_sqrt(k);
    }
    const Eigen::MatrixXd& filtered_cov(int k) const { return schedule_->filtered_cov(k); }
    const Eigen::MatrixXd& weight(int k) const { return weight_.at(k); }
    double theta(int k) const { return theta_.at(k); }

    bool lambda_is_chain() const { return channel_->chain(); }
    const LambdaChain& lambda_chain() const { return *channel_->lambda_chain; }
    /// Deterministic loss probability at slot k (non-chain scenarios).
    double lambda_value(int k) const { return channel_->lambda_seq.at(k); }
    /// E[lambda(k)]: the sequence value, or the chain's marginal mean.
    double lambda_mean(int k) const;
    /// Nearest chain state index for a loss probability value.
    int chain_state_index(double lambda) const;

    /// Mismatch after a delivery at slot tau, given the last d innovations
    /// nu(tau-d+1 : tau), oldest first.
    Eigen::VectorXd delivered_mismatch(int tau, std::span<const Eigen::VectorXd> nu_window) const;

    /// Second moment of the delivered-branch mismatch at slot tau (all d
    /// window innovations integrated out).
    Eigen::MatrixXd delivered_mismatch_cov(int tau) const;

    /// Mismatch after a delivery at slot tau, split into the part determined
    /// by already-observed innovations (slots <= known_max, provided in
    /// `nu_buf` starting at slot `buf_first_slot`) and the covariance of the
    /// part driven by future innovations.
    void delivered_split(int tau, int known_max, const std::vector<Eigen::VectorXd>& nu_buf,
                         int buf_first_slot, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) const;

    /// Exact expected realized loss of a fixed send pattern sigma(0..T)
    /// (state-independent scheduling), split into its pieces. Exact for
    /// deterministic loss sequences; chains use per-slot marginal means.
    struct PatternCost {
        double total = 0.0;     // comm + mismatch + filter
        double comm = 0.0;      // sum theta(k) sigma(k)
        double mismatch = 0.0;  // sum tr(weight(k) E[etilde etilde^T])
        double filter = 0.0;    // sum tr(weight(k) O(k))
        int sends = 0;
    };
    PatternCost expected_pattern_cost(const std::vector<int>& sigma) const;
    PatternCost expected_periodic_cost(int period, int phase) const;

    /// Period whose periodic pattern minimizes the expected loss over a
    /// geometric candidate sweep; used as the rollout base policy rate.
    int calibrated_period() const;

    /// Never-transmit mismatch variance trace bound over the horizon; sets
    /// grid ranges for the tabulated value function.
    double never_transmit_mismatch_std() const;
    double max_innovation_std() const;

  private:
    const SourceModel* model_;
    std::shared_ptr<const FilterSchedule> schedule_;
    const ChannelSpec* channel_;
    MatrixSeq weight_;
    ScalarSeq theta_;
    std::vector<double> chain_marginal_mean_;  // per slot, chain scenarios
    mutable int calibrated_period_ = 0;        // cached

    // Keep the referenced model/channel alive when constructed from a config.
    std::shared_ptr<const void> owner_;

  public:
    void hold(std::shared_ptr<const void> owner) { owner_ = std::move(owner); }
};

}  // namespace voisim
