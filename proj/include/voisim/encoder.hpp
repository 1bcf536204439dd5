#pragma once

#include <deque>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "voisim/decoder.hpp"
#include "voisim/model.hpp"

namespace voisim {

/// Deterministic filter quantities for every slot: prediction covariance M,
/// filtered covariance O, gain K, and the innovation covariance C M C^T + V
/// with its symmetric square root. These depend only on the model matrices,
/// never on measurements, so they are computed once per scenario.
class FilterSchedule {
  public:
    explicit FilterSchedule(const SourceModel& model);

    const Eigen::MatrixXd& prediction_cov(int k) const { return M_.at(idx(k)); }
    const Eigen::MatrixXd& filtered_cov(int k) const { return O_.at(idx(k)); }
    const Eigen::MatrixXd& gain(int k) const { return K_.at(idx(k)); }
    const Eigen::MatrixXd& innovation_cov(int k) const { return S_.at(idx(k)); }
    const Eigen::MatrixXd& innovation_cov_sqrt(int k) const { return Ssqrt_.at(idx(k)); }

    int horizon() const { return horizon_; }

  private:
    static std::size_t idx(int k) { return static_cast<std::size_t>(k); }

    int horizon_;
    std::vector<Eigen::MatrixXd> M_, O_, K_, S_, Ssqrt_;
};

/// Snapshot of the transmit-decision state at slot k: the estimation
/// mismatch plus the short innovation/loss/decision windows that, together,
/// are sufficient for the optimal scheduler. Buffers are oldest-first and
/// zero-padded during warm-up.
struct SchedulerInput {
    int k = 0;
    Eigen::VectorXd etilde;            // xcheck(k) - xhat(k)
    std::vector<Eigen::VectorXd> nu;   // nu(k-d+2 : k), d-1 entries
    std::vector<double> lambda;        // lambda(k-d+1 : k), d entries
    std::vector<int> sigma;            // sigma(k-d+1 : k-1), d-1 entries
};

/// Sensor-side estimator. Runs the Kalman recursions, keeps an exact replica
/// of the receiver's estimate (possible because acknowledgments reveal every
/// delivery outcome by the time it matters), and assembles SchedulerInput.
///
/// Per-slot protocol, matching the episode loop:
///   predict(u_prev)   (slots k >= 1)
///   update(y)         -> innovation
///   note_lambda(l)
///   apply_delivery(delivered)   (replica mirrors the receiver)
///   scheduler_input()
///   record_decision(sigma)
///   record_input(u)   (control mode)
class Encoder {
  public:
    Encoder(const SourceModel& model, const FilterSchedule& schedule, int delay, bool control);

    /// m(k) = A(k-1) xcheck(k-1) + B(k-1) u(k-1); advances to slot k.
    void predict(const std::optional<Eigen::VectorXd>& u_prev);

    /// Measurement update; returns the innovation nu(k) = y - C m(k).
    Eigen::VectorXd update(const Eigen::VectorXd& y);

    void note_lambda(double lambda);

    /// Mirror the receiver for this slot. `delivered` is sigma(k-d) *
    /// gamma(k-d), known here through the acknowledgment channel.
    void apply_delivery(bool delivered);

    SchedulerInput scheduler_input() const;

    void record_decision(bool sigma);
    void record_input(const Eigen::VectorXd& u);

    int slot() const { return k_; }
    const Eigen::VectorXd& xcheck() const { return xcheck_; }
    const Eigen::VectorXd& prediction() const { return m_; }
    const Eigen::VectorXd& replica_xhat() const { return replica_.xhat(); }
    Eigen::VectorXd etilde() const { return xcheck_ - replica_.xhat(); }

    const Eigen::MatrixXd& prediction_cov() const { return schedule_->prediction_cov(k_); }
    const Eigen::MatrixXd& filtered_cov() const { return schedule_->filtered_cov(k_); }
    const Eigen::MatrixXd& gain() const { return schedule_->gain(k_); }

  private:
    const SourceModel* model_;
    const FilterSchedule* schedule_;
    int delay_;
    bool control_;

    int k_ = 0;
    bool predicted_ = false;
    bool updated_ = false;
    Eigen::VectorXd m_;
    Eigen::VectorXd xcheck_;
    Decoder replica_;

    struct Pending {
        bool sigma = false;
        int send_time = -1;
        Eigen::VectorXd payload;
    };
    std::vector<Pending> pending_;        // in-flight snapshots, send_time mod d
    std::deque<Eigen::VectorXd> nu_buf_;  // last d-1 innovations
    std::deque<double> lambda_buf_;       // last d lambda values
    std::deque<int> sigma_buf_;           // last d-1 decisions
};

}  // namespace voisim
