#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace voisim {

/// Time-indexed matrix sequence. Constant matrices are stored once and
/// broadcast over the slot index; per-slot sequences store every entry.
class MatrixSeq {
  public:
    MatrixSeq() = default;
    explicit MatrixSeq(Eigen::MatrixXd constant) { values_.push_back(std::move(constant)); }
    explicit MatrixSeq(std::vector<Eigen::MatrixXd> per_slot) : values_(std::move(per_slot)) {}

    bool empty() const { return values_.empty(); }
    bool constant() const { return values_.size() == 1; }
    std::size_t stored() const { return values_.size(); }

    const Eigen::MatrixXd& at(int k) const {
        return values_.size() == 1 ? values_.front() : values_.at(static_cast<std::size_t>(k));
    }

    const std::vector<Eigen::MatrixXd>& raw() const { return values_; }

  private:
    std::vector<Eigen::MatrixXd> values_;
};

/// Scalar sequence with the same broadcast rule as MatrixSeq.
class ScalarSeq {
  public:
    ScalarSeq() = default;
    explicit ScalarSeq(double constant) : values_(1, constant) {}
    explicit ScalarSeq(std::vector<double> per_slot) : values_(std::move(per_slot)) {}

    bool empty() const { return values_.empty(); }
    bool constant() const { return values_.size() == 1; }
    std::size_t stored() const { return values_.size(); }

    double at(int k) const {
        return values_.size() == 1 ? values_.front() : values_.at(static_cast<std::size_t>(k));
    }

    const std::vector<double>& raw() const { return values_; }

  private:
    std::vector<double> values_;
};

/// Partially observable Gauss-Markov source over a finite slotted horizon.
/// All sequences may be constant (broadcast) or length T+1.
struct SourceModel {
    int horizon = 0;     // T: slots run k = 0..T
    int state_dim = 0;   // n
    int output_dim = 0;  // m
    int input_dim = 0;   // p (0 in estimation mode)
    MatrixSeq A;         // n x n state matrix
    MatrixSeq B;         // n x p input matrix (empty in estimation mode)
    MatrixSeq C;         // m x n output matrix
    MatrixSeq W;         // n x n process noise covariance
    MatrixSeq V;         // m x m measurement noise covariance
    Eigen::VectorXd m0;  // initial mean
    Eigen::MatrixXd M0;  // initial covariance
};

/// Finite-state Markov chain for the packet-loss probability process.
struct LambdaChain {
    Eigen::VectorXd states;      // loss probabilities, each in [0, 1]
    Eigen::MatrixXd transition;  // row-stochastic
    Eigen::VectorXd initial;     // initial distribution
};

/// Fixed-delay packet-erasure channel description. The loss probability is
/// either a deterministic sequence (constant or per-slot) or a Markov chain.
struct ChannelSpec {
    int delay = 1;  // d
    ScalarSeq lambda_seq;
    std::optional<LambdaChain> lambda_chain;

    bool chain() const { return lambda_chain.has_value(); }
};

/// Cost weights for both problem modes. Estimation mode uses theta/Lambda;
/// control mode uses theta/Q/R. Q must be defined up to slot T+1.
struct CostSpec {
    ScalarSeq theta;   // communication price, >= 0
    MatrixSeq Lambda;  // estimation weight, > 0
    MatrixSeq Q;       // state weight, >= 0, indexed 0..T+1
    MatrixSeq R;       // input weight, > 0
};

enum class Mode { Estimation, Control };

enum class PolicyKind {
    VoiDp,       // exact backward-DP value of information (scalar, d <= 2)
    VoiRollout,  // Monte-Carlo rollout value of information
    VoiAuto,     // DP where supported, rollout otherwise
    Periodic,
    Random,
    Always,
    Never,
};

/// Transmit-policy selector with its parameters.
struct PolicySpec {
    PolicyKind kind = PolicyKind::VoiAuto;
    int period = 1;     // periodic
    int phase = 0;      // periodic
    double rate = 0.5;  // random

    std::string name() const;
};

/// Parse a selector string ("voi-dp", "periodic:21", "random:0.1", ...).
/// Throws std::invalid_argument on unknown selectors.
PolicySpec parse_policy(const std::string& text);

/// A full simulation scenario: source, channel, costs, mode, policy, seed.
struct ScenarioConfig {
    SourceModel source;
    ChannelSpec channel;
    CostSpec cost;
    Mode mode = Mode::Estimation;
    PolicySpec policy;
    std::uint64_t seed = 0;
    int episodes = 1;
};

/// Collect every invariant violation with a path-like field identifier.
/// An empty result means the scenario is valid. Violations are data, not
/// failures; nothing throws.
std::vector<std::string> validate(const ScenarioConfig& config);

/// Spin-stabilized spacecraft estimation scenario: T = 1000, three-axis
/// angular velocity source, lossy two-slot-delay downlink.
ScenarioConfig spacecraft_scenario();

/// True iff `m` is symmetric positive definite under the library-wide
/// tolerance (eigenvalue bound relative to the largest eigenvalue).
bool is_positive_definite(const Eigen::MatrixXd& m);
bool is_positive_semidefinite(const Eigen::MatrixXd& m);

}  // namespace voisim
