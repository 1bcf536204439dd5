#pragma once

#include <vector>

#include <Eigen/Dense>

#include "voisim/model.hpp"
#include "voisim/sim_core.hpp"

namespace voisim {

/// Optimal switching estimator at the receiver. On a delivery the payload
/// (the encoder estimate from d slots ago) is rolled forward through the
/// known dynamics; otherwise the previous estimate is propagated one step.
/// The signaling residual is identically zero at the optimal policy profile
/// and is not modeled.
///
/// In control mode the estimator also compensates with the last d applied
/// inputs, which the receiver knows because it computes them.
class Decoder {
  public:
    Decoder(const SourceModel& model, int delay, bool control);

    /// Advance to the next slot using this slot's channel output. Must be
    /// called once per slot k = 0, 1, ..., T in order. Slot 0 starts from
    /// the prior mean.
    void step(const ChannelOutput& z);

    /// Record u(k) after the slot-k estimate has been produced (control
    /// mode only).
    void push_input(const Eigen::VectorXd& u);

    const Eigen::VectorXd& xhat() const { return xhat_; }
    int slot() const { return k_; }

  private:
    const Eigen::VectorXd& input_at(int t) const;  // u(t) from the ring

    const SourceModel* model_;
    int delay_;
    bool control_;
    int k_ = -1;
    Eigen::VectorXd xhat_;
    std::vector<Eigen::VectorXd> u_ring_;  // last d inputs, indexed t mod d
    std::vector<int> u_slot_;
};

}  // namespace voisim
