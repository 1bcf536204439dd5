#include "voisim/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace voisim {

GaussHermite::GaussHermite(int n) {
    if (n < 1) throw std::invalid_argument("quadrature order must be positive");
    // Golub-Welsch on the Hermite Jacobi matrix (physicists' weight e^{-x^2}),
    // then rescale abscissae by sqrt(2) to standard-normal units.
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        const double b = std::sqrt(0.5 * i);
        J(i, i - 1) = b;
        J(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    nodes.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        nodes[static_cast<std::size_t>(i)] = es.eigenvalues()[i] * std::sqrt(2.0);
        const double v0 = es.eigenvectors()(0, i);
        weights[static_cast<std::size_t>(i)] = v0 * v0;  // normalized: sum = 1
    }
    // Enforce exact +/- symmetry of the rule.
    for (int i = 0; i < n / 2; ++i) {
        const int j = n - 1 - i;
        const double x = 0.5 * (nodes[static_cast<std::size_t>(j)] -
                                nodes[static_cast<std::size_t>(i)]);
        nodes[static_cast<std::size_t>(i)] = -x;
        nodes[static_cast<std::size_t>(j)] = x;
        const double w = 0.5 * (weights[static_cast<std::size_t>(i)] +
                                weights[static_cast<std::size_t>(j)]);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(j)] = w;
    }
    if (n % 2 == 1) nodes[static_cast<std::size_t>(n / 2)] = 0.0;
}

MismatchKernel::MismatchKernel(const SourceModel& model,
                               std::shared_ptr<const FilterSchedule> schedule,
                               const ChannelSpec& channel, MatrixSeq weight, ScalarSeq theta)
    : model_(&model),
      schedule_(std::move(schedule)),
      channel_(&channel),
      weight_(std::move(weight)),
      theta_(std::move(theta)) {
    if (channel_->chain()) {
        const LambdaChain& chain = *channel_->lambda_chain;
        Eigen::VectorXd dist = chain.initial;
        chain_marginal_mean_.reserve(static_cast<std::size_t>(model.horizon) + 1);
        for (int k = 0; k <= model.horizon; ++k) {
            if (k > 0) dist = (chain.transition.transpose() * dist).eval();
            chain_marginal_mean_.push_back(dist.dot(chain.states));
        }
    }
}

double MismatchKernel::lambda_mean(int k) const {
    if (channel_->chain()) return chain_marginal_mean_.at(static_cast<std::size_t>(k));
    return channel_->lambda_seq.at(k);
}

int MismatchKernel::chain_state_index(double lambda) const {
    const Eigen::VectorXd& states = channel_->lambda_chain->states;
    int best = 0;
    double best_dist = std::abs(states[0] - lambda);
    for (Eigen::Index i = 1; i < states.size(); ++i) {
        const double dist = std::abs(states[i] - lambda);
        if (dist < best_dist) {
            best_dist = dist;
            best = static_cast<int>(i);
        }
    }
    return best;
}

Eigen::VectorXd MismatchKernel::delivered_mismatch(
    int tau, std::span<const Eigen::VectorXd> nu_window) const {
    const int d = delay();
    if (static_cast<int>(nu_window.size()) != d)
        throw std::invalid_argument("delivered_mismatch: window must hold d innovations");
    // e(tau) = sum_{i=tau-d+1}^{tau} (prod_{s=i}^{tau-1} A(s)) K(i) nu(i)
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(state_dim());
    for (int i = tau - d + 1; i <= tau; ++i) {
        const Eigen::VectorXd& nu = nu_window[static_cast<std::size_t>(i - (tau - d + 1))];
        Eigen::VectorXd term = gain(i) * nu;
        for (int s = i; s <= tau - 1; ++s) term = (A(s) * term).eval();
        acc += term;
    }
    return acc;
}

Eigen::MatrixXd MismatchKernel::delivered_mismatch_cov(int tau) const {
    const int d = delay();
    const int n = state_dim();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (int i = tau - d + 1; i <= tau; ++i) {
        Eigen::MatrixXd phi_k = gain(i);
        for (int s = i; s <= tau - 1; ++s) phi_k = (A(s) * phi_k).eval();
        acc += phi_k * innovation_cov(i) * phi_k.transpose();
    }
    return 0.5 * (acc + acc.transpose());
}

void MismatchKernel::delivered_split(int tau, int known_max,
                                     const std::vector<Eigen::VectorXd>& nu_buf,
                                     int buf_first_slot, Eigen::VectorXd& mean,
                                     Eigen::MatrixXd& cov) const {
    const int d = delay();
    const int n = state_dim();
    mean = Eigen::VectorXd::Zero(n);
    cov = Eigen::MatrixXd::Zero(n, n);
    for (int i = tau - d + 1; i <= tau; ++i) {
        Eigen::MatrixXd phi_k = gain(i);
        for (int s = i; s <= tau - 1; ++s) phi_k = (A(s) * phi_k).eval();
        if (i <= known_max) {
            const int at = i - buf_first_slot;
            if (at < 0 || at >= static_cast<int>(nu_buf.size()))
                throw std::invalid_argument("delivered_split: innovation buffer too short");
            mean += phi_k * nu_buf[static_cast<std::size_t>(at)];
        } else {
            // phi_k already includes K(i); fold in the innovation covariance.
            Eigen::MatrixXd contrib = phi_k * innovation_cov(i) * phi_k.transpose();
            cov += contrib;
        }
    }
    cov = 0.5 * (cov + cov.transpose()).eval();
}

MismatchKernel::PatternCost MismatchKernel::expected_pattern_cost(
    const std::vector<int>& sigma) const {
    const int T = horizon();
    const int d = delay();
    if (sigma.size() != static_cast<std::size_t>(T) + 1)
        throw std::invalid_argument("expected_pattern_cost: pattern must cover slots 0..T");

    PatternCost out;
    Eigen::MatrixXd cov =
        gain(0) * innovation_cov(0) * gain(0).transpose();  // etilde(0) = K(0) nu(0)
    for (int k = 0; k <= T; ++k) {
        if (k > 0) {
            const double p_del = (k >= d && sigma[static_cast<std::size_t>(k - d)] != 0)
                                     ? 1.0 - lambda_mean(k - d)
                                     : 0.0;
            Eigen::MatrixXd hold = A(k - 1) * cov * A(k - 1).transpose() +
                                   gain(k) * innovation_cov(k) * gain(k).transpose();
            cov = p_del > 0.0
                      ? (p_del * delivered_mismatch_cov(k) + (1.0 - p_del) * hold).eval()
                      : std::move(hold);
            cov = 0.5 * (cov + cov.transpose()).eval();
        }
        const Eigen::MatrixXd& w = weight_.at(k);
        out.mismatch += (w * cov).trace();
        out.filter += (w * filtered_cov(k)).trace();
        if (k <= T - d && sigma[static_cast<std::size_t>(k)] != 0) {
            out.comm += theta_.at(k);
            ++out.sends;
        }
    }
    out.total = out.comm + out.mismatch + out.filter;
    return out;
}

MismatchKernel::PatternCost MismatchKernel::expected_periodic_cost(int period, int phase) const {
    std::vector<int> sigma(static_cast<std::size_t>(horizon()) + 1, 0);
    for (int k = 0; k <= horizon(); ++k)
        if (period >= 1 && ((k - phase) % period + period) % period == 0)
            sigma[static_cast<std::size_t>(k)] = 1;
    return expected_pattern_cost(sigma);
}

int MismatchKernel::calibrated_period() const {
    if (calibrated_period_ > 0) return calibrated_period_;
    const int T = horizon();
    int best_period = 1;
    double best_cost = std::numeric_limits<double>::infinity();
    int p = 1;
    while (p <= T) {
        const double cost = expected_periodic_cost(p, 0).total;
        if (cost < best_cost) {
            best_cost = cost;
            best_period = p;
        }
        const int next = static_cast<int>(std::ceil(p * std::sqrt(2.0)));
        p = next > p ? next : p + 1;
    }
    calibrated_period_ = best_period;
    return best_period;
}

double MismatchKernel::never_transmit_mismatch_std() const {
    const int T = horizon();
    Eigen::MatrixXd cov = gain(0) * innovation_cov(0) * gain(0).transpose();
    double worst = cov.trace();
    for (int k = 1; k <= T; ++k) {
        cov = (A(k - 1) * cov * A(k - 1).transpose() +
               gain(k) * innovation_cov(k) * gain(k).transpose())
                  .eval();
        worst = std::max(worst, cov.trace());
    }
    return std::sqrt(std::max(worst, 0.0));
}

double MismatchKernel::max_innovation_std() const {
    double worst = 0.0;
    for (int k = 0; k <= horizon(); ++k)
        worst = std::max(worst, innovation_cov(k).trace());
    return std::sqrt(worst);
}

}  // namespace voisim
