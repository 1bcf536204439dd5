#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "voisim/model.hpp"
#include "voisim/rng.hpp"

namespace voisim {

/// True source state at the current slot.
struct SourceState {
    int k = 0;
    Eigen::VectorXd x;
};

/// Samples from N(0, cov) using covariance square roots (symmetric
/// factorization) precomputed once per distinct matrix.
class GaussianSampler {
  public:
    explicit GaussianSampler(const MatrixSeq& cov);
    explicit GaussianSampler(const Eigen::MatrixXd& cov);

    Eigen::VectorXd sample(int k, RngStream& rng) const;

  private:
    std::vector<Eigen::MatrixXd> sqrts_;
};

/// Ground-truth world: draws the initial state, advances the source, and
/// produces sensor outputs. Noise streams are supplied by the caller so the
/// independence structure stays explicit.
class SourceSimulator {
  public:
    explicit SourceSimulator(const SourceModel& model);

    Eigen::VectorXd initial_state(RngStream& init) const;

    /// x(k+1) = A(k) x(k) + B(k) u(k) + w(k). `u` must be present exactly
    /// when the model has inputs.
    void step(SourceState& s, const std::optional<Eigen::VectorXd>& u, RngStream& process) const;

    /// y(k) = C(k) x(k) + v(k).
    Eigen::VectorXd observe(const SourceState& s, RngStream& measurement) const;

  private:
    const SourceModel* model_;
    GaussianSampler w_sampler_;
    GaussianSampler v_sampler_;
    GaussianSampler m0_sampler_;
};

/// Channel output for one slot: the payload sent d slots ago, or nothing.
struct ChannelOutput {
    bool delivered = false;
    Eigen::VectorXd payload;
};

/// Acknowledgment revealing the erasure outcome of the packet sent at
/// `send_time`; reaches the encoder exactly at send_time + d.
struct Ack {
    int send_time = 0;
    bool received = false;  // gamma(send_time)
};

/// Fixed-delay packet-erasure channel with an in-flight ring of d slots and
/// the slot-synchronous loss-probability process.
///
/// Per-slot call protocol, enforced at runtime:
///   lambda_step() -> receive()/ack() -> send() -> end_slot()
///
/// The erasure fate of every slot is drawn exactly once per slot whether or
/// not a packet is sent, so two runs that differ only in their transmit
/// decisions see identical erasure outcomes at matching slots.
class ChannelPipeline {
  public:
    ChannelPipeline(const ChannelSpec& spec, int horizon, RngStream erasure, RngStream lambda);

    /// Advance the loss-probability process and return lambda(k). Known to
    /// encoder and decoder at the start of the slot.
    double lambda_step();

    /// z(k): payload sent at k-d if that send happened and was not erased.
    ChannelOutput receive() const;

    /// Ack for the packet sent at k-d, if one was sent.
    std::optional<Ack> ack() const;

    /// Enqueue this slot's transmission (or the lack of one) and sample the
    /// slot's erasure fate. Returns gamma(k) when sigma = 1.
    std::optional<bool> send(bool sigma, const Eigen::VectorXd& payload);

    /// Close slot k and move to k+1. Throws if any phase was skipped or
    /// repeated.
    void end_slot();

    int slot() const { return k_; }
    double current_lambda() const { return lambda_current_; }

    std::uint64_t erasure_draws() const { return erasure_.draws(); }
    std::uint64_t lambda_draws() const { return lambda_.draws(); }

  private:
    struct InFlight {
        bool sent = false;
        bool erased = false;
        int send_time = -1;
        Eigen::VectorXd payload;
    };

    enum class Phase { Lambda, Transfer, Send, Done };

    void require_phase(Phase expected, const char* op) const;

    const ChannelSpec* spec_;
    int horizon_;
    int k_ = 0;
    Phase phase_ = Phase::Lambda;
    double lambda_current_ = 0.0;
    int chain_state_ = 0;
    std::vector<InFlight> ring_;  // d entries, indexed by send_time mod d
    RngStream erasure_;
    RngStream lambda_;
};

}  // namespace voisim
