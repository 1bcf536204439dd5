#include "voisim/scheduler.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace voisim {

BaselinePolicy::BaselinePolicy(PolicySpec spec, std::uint64_t seed)
    : spec_(spec), rng_(seed, "policy") {}

Decision BaselinePolicy::decide(const SchedulerInput& s) {
    switch (spec_.kind) {
        case PolicyKind::Periodic: {
            const int p = spec_.period;
            const int r = ((s.k - spec_.phase) % p + p) % p;
            return {r == 0 ? 1 : 0, std::nullopt};
        }
        case PolicyKind::Random:
            return {rng_.uniform01() < spec_.rate ? 1 : 0, std::nullopt};
        case PolicyKind::Always:
            return {1, std::nullopt};
        case PolicyKind::Never:
            return {0, std::nullopt};
        default:
            throw std::logic_error("BaselinePolicy: not a baseline selector");
    }
}

VoiDpPolicy::VoiDpPolicy(std::shared_ptr<const ValueFunctionGrid> grid)
    : grid_(std::move(grid)) {
    if (!grid_) throw std::invalid_argument("VoiDpPolicy: missing value function grid");
}

Decision VoiDpPolicy::decide(const SchedulerInput& s) {
    const double voi = grid_->voi_at(s.k, s, &stats_);
    return {voi >= 0.0 ? 1 : 0, voi};
}

VoiRolloutPolicy::VoiRolloutPolicy(std::shared_ptr<const MismatchKernel> kernel,
                                   std::uint64_t episode_seed, RolloutOptions options)
    : kernel_(std::move(kernel)), episode_seed_(episode_seed), options_(options) {
    if (!kernel_) throw std::invalid_argument("VoiRolloutPolicy: missing kernel");
    base_period_ = options_.base_period > 0 ? options_.base_period
                                            : kernel_->calibrated_period();
}

Decision VoiRolloutPolicy::decide(const SchedulerInput& s) {
    if (s.k > kernel_->horizon() - kernel_->delay()) return {0, std::nullopt};
    const double voi = evaluate(s);
    return {voi >= 0.0 ? 1 : 0, voi};
}

namespace {

// Deterministic difference sequence between the hold and transmit branches,
// conditioned on the buffered delivery outcomes in `mask` and on no shared
// delivery after the fork. Innovations are integrated out in closed form:
// the branches share every noise contribution, so only the propagated mean
// gap and a propagated covariance gap remain.
struct DifferenceSequence {
    std::vector<double> g;  // g[j]: expected cost gap at slot f + j
    int fork_slot = 0;      // f = k + d
};

DifferenceSequence build_difference(const MismatchKernel& ker, const SchedulerInput& s,
                                    unsigned buffered_mask, int cap_len) {
    const int k = s.k;
    const int d = ker.delay();
    const int f = k + d;
    const int T = ker.horizon();
    const int buf_first_slot = k - d + 2;  // first slot held in s.nu

    // Shared evolution through the buffered window (k, f).
    Eigen::VectorXd mu = s.etilde;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(ker.state_dim(), ker.state_dim());
    for (int tau = k + 1; tau <= f - 1; ++tau) {
        const int i = tau - (k + 1);
        const bool sent = s.sigma.at(static_cast<std::size_t>(i)) != 0;
        const bool delivered = sent && ((buffered_mask >> i) & 1u) != 0;
        if (delivered) {
            ker.delivered_split(tau, k, s.nu, buf_first_slot, mu, cov);
        } else {
            mu = (ker.A(tau - 1) * mu).eval();
            cov = (ker.A(tau - 1) * cov * ker.A(tau - 1).transpose() +
                   ker.gain(tau) * ker.innovation_cov(tau) * ker.gain(tau).transpose())
                      .eval();
        }
    }

    // Fork: the hold branch propagates once more, the transmit branch resets
    // to the (zero-mean) delivered mismatch. The covariance gap between the
    // branches then propagates without further noise.
    Eigen::VectorXd mu_hold = ker.A(f - 1) * mu;
    Eigen::MatrixXd cov_hold = ker.A(f - 1) * cov * ker.A(f - 1).transpose() +
                               ker.gain(f) * ker.innovation_cov(f) * ker.gain(f).transpose();
    Eigen::MatrixXd cov_gap = cov_hold - ker.delivered_mismatch_cov(f);

    DifferenceSequence seq;
    seq.fork_slot = f;
    const int len = std::min(T, f + cap_len) - f + 1;
    seq.g.reserve(static_cast<std::size_t>(len));
    for (int j = 0; j < len; ++j) {
        const int tau = f + j;
        if (j > 0) {
            mu_hold = (ker.A(tau - 1) * mu_hold).eval();
            cov_gap = (ker.A(tau - 1) * cov_gap * ker.A(tau - 1).transpose()).eval();
        }
        const Eigen::MatrixXd& w = ker.weight(tau);
        seq.g.push_back(mu_hold.dot(w * mu_hold) + (w * cov_gap).trace());
    }
    return seq;
}

}  // namespace

double VoiRolloutPolicy::pattern_difference(const SchedulerInput& s,
                                            unsigned buffered_mask) const {
    // Exact expectation over the base-policy delivery pattern for
    // deterministic loss sequences: average the survival-weighted gap
    // over every base-policy phase.
    const MismatchKernel& ker = *kernel_;
    const int k = s.k;
    const int d = ker.delay();
    const int T = ker.horizon();
    const int p = base_period_;
    const int cap_len = std::max(3 * d + options_.horizon_floor, 5 * p + 2 * d);

    const DifferenceSequence seq = build_difference(ker, s, buffered_mask, cap_len);
    std::vector<double> phase_weight(static_cast<std::size_t>(p), 1.0);
    double weight_sum = static_cast<double>(p);

    double acc = 0.0;
    for (std::size_t j = 0; j < seq.g.size(); ++j) {
        const int tau = seq.fork_slot + static_cast<int>(j);
        const int t = tau - d;  // send slot of an arrival at tau
        if (t > k && t <= T - d) {
            const std::size_t phase = static_cast<std::size_t>(t % p);
            const double lam = ker.lambda_value(t);
            weight_sum += phase_weight[phase] * (lam - 1.0);
            phase_weight[phase] *= lam;
        }
        const double survive = weight_sum / p;
        if (survive < options_.survival_cutoff) break;
        acc += survive * seq.g[j];
    }
    return acc;
}

double VoiRolloutPolicy::expected_difference_exact(const SchedulerInput& s) const {
    // Enumerate the delivery outcomes of the already-in-flight packets.
    const int slots = kernel_->delay() - 1;
    std::vector<int> send_bits;
    for (int i = 0; i < slots; ++i)
        if (s.sigma.at(static_cast<std::size_t>(i)) != 0) send_bits.push_back(i);

    double total = 0.0;
    const unsigned cases = 1u << send_bits.size();
    for (unsigned c = 0; c < cases; ++c) {
        unsigned mask = 0;
        double prob = 1.0;
        for (std::size_t b = 0; b < send_bits.size(); ++b) {
            const int i = send_bits[b];
            const double lam = s.lambda.at(static_cast<std::size_t>(i));
            if ((c >> b) & 1u) {
                mask |= 1u << i;
                prob *= 1.0 - lam;
            } else {
                prob *= lam;
            }
        }
        if (prob == 0.0) continue;
        total += prob * pattern_difference(s, mask);
    }
    return total;
}

double VoiRolloutPolicy::expected_difference_sampled(const SchedulerInput& s) {
    const MismatchKernel& ker = *kernel_;
    const int k = s.k;
    const int d = ker.delay();
    const int f = k + d;
    const int T = ker.horizon();
    const int p = base_period_;
    const int cap_len = std::max(3 * d + options_.horizon_floor, 5 * p + 2 * d);
    const LambdaChain& chain = ker.lambda_chain();

    RngStream rng(mix64(episode_seed_ ^ mix64(0x726f6c6cULL + static_cast<std::uint64_t>(k))),
                  "rollout");
    std::map<unsigned, DifferenceSequence> cache;

    double total = 0.0;
    for (int r = 0; r < options_.samples; ++r) {
        const int phase = std::min(static_cast<int>(rng.uniform01() * p), p - 1);
        unsigned mask = 0;
        for (int i = 0; i < d - 1; ++i) {
            if (s.sigma.at(static_cast<std::size_t>(i)) == 0) continue;
            if (rng.uniform01() >= s.lambda.at(static_cast<std::size_t>(i))) mask |= 1u << i;
        }
        auto it = cache.find(mask);
        if (it == cache.end())
            it = cache.emplace(mask, build_difference(ker, s, mask, cap_len)).first;
        const DifferenceSequence& seq = it->second;

        int chain_idx = ker.chain_state_index(s.lambda.back());
        std::vector<int> arrival_success(static_cast<std::size_t>(d), 0);  // by arrival mod d
        double sample = 0.0;
        const int tau_max = std::min(T, f + cap_len);
        for (int tau = k + 1; tau <= tau_max; ++tau) {
            // Advance the loss chain to slot tau.
            const double u = rng.uniform01();
            double acc_p = 0.0;
            int next = static_cast<int>(chain.states.size()) - 1;
            for (Eigen::Index cidx = 0; cidx < chain.states.size(); ++cidx) {
                acc_p += chain.transition(chain_idx, cidx);
                if (u < acc_p) {
                    next = static_cast<int>(cidx);
                    break;
                }
            }
            chain_idx = next;
            const double lam_tau = chain.states[chain_idx];

            if (tau >= f) {
                if (arrival_success[static_cast<std::size_t>(tau % d)] == tau) break;
                sample += seq.g[static_cast<std::size_t>(tau - f)];
            }
            // Base-policy send this slot; outcome lands at tau + d.
            if (tau <= T - d && ((tau - phase) % p + p) % p == 0) {
                if (rng.uniform01() >= lam_tau && tau + d <= tau_max)
                    arrival_success[static_cast<std::size_t>((tau + d) % d)] = tau + d;
            }
        }
        total += sample;
    }
    return total / options_.samples;
}

double VoiRolloutPolicy::evaluate(const SchedulerInput& s) {
    const MismatchKernel& ker = *kernel_;
    const double lam_now = s.lambda.back();
    const double theta = ker.theta(s.k);
    if (lam_now >= 1.0) return -theta;

    int buffered_sends = 0;
    for (int v : s.sigma) buffered_sends += v != 0 ? 1 : 0;

    double gap = 0.0;
    if (!ker.lambda_is_chain()) {
        if (buffered_sends <= 6) {
            gap = expected_difference_exact(s);
        } else {
            // Too many in-flight outcome combinations to enumerate: sample
            // them, keeping the phase average exact.
            RngStream rng(
                mix64(episode_seed_ ^ mix64(0x726f6c6cULL + static_cast<std::uint64_t>(s.k))),
                "rollout");
            std::map<unsigned, double> cache;
            double total = 0.0;
            for (int r = 0; r < options_.samples; ++r) {
                unsigned mask = 0;
                for (int i = 0; i < ker.delay() - 1; ++i) {
                    if (s.sigma.at(static_cast<std::size_t>(i)) == 0) continue;
                    if (rng.uniform01() >= s.lambda.at(static_cast<std::size_t>(i)))
                        mask |= 1u << i;
                }
                auto it = cache.find(mask);
                if (it == cache.end())
                    it = cache.emplace(mask, pattern_difference(s, mask)).first;
                total += it->second;
            }
            gap = total / options_.samples;
        }
    } else {
        gap = expected_difference_sampled(s);
    }
    return (1.0 - lam_now) * gap - theta;
}

std::unique_ptr<SchedulingPolicy> make_policy(const PolicySpec& spec, const PolicyContext& ctx,
                                              std::uint64_t episode_seed) {
    switch (spec.kind) {
        case PolicyKind::Periodic:
        case PolicyKind::Random:
        case PolicyKind::Always:
        case PolicyKind::Never:
            return std::make_unique<BaselinePolicy>(spec, episode_seed);
        case PolicyKind::VoiDp:
            if (!ctx.grid)
                throw UnsupportedConfigError(
                    "voi-dp selected but no value function grid was solved for this scenario");
            return std::make_unique<VoiDpPolicy>(ctx.grid);
        case PolicyKind::VoiRollout:
            if (!ctx.kernel)
                throw std::invalid_argument("voi-rollout requires a mismatch kernel");
            return std::make_unique<VoiRolloutPolicy>(ctx.kernel, episode_seed, ctx.rollout);
        case PolicyKind::VoiAuto:
            if (ctx.grid) return std::make_unique<VoiDpPolicy>(ctx.grid);
            if (!ctx.kernel) throw std::invalid_argument("voi requires a mismatch kernel");
            return std::make_unique<VoiRolloutPolicy>(ctx.kernel, episode_seed, ctx.rollout);
    }
    throw std::logic_error("make_policy: unhandled selector");
}

}  // namespace voisim
