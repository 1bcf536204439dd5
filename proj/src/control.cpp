#include "voisim/control.hpp"

#include <stdexcept>
#include <string>

namespace voisim {

RiccatiSolution solve_riccati(const SourceModel& model, const CostSpec& cost) {
    const int T = model.horizon;
    if (model.B.empty() || cost.Q.empty() || cost.R.empty())
        throw std::invalid_argument("solve_riccati: control-mode model requires B, Q, R");

    RiccatiSolution sol;
    sol.S.assign(static_cast<std::size_t>(T) + 2, Eigen::MatrixXd());
    sol.L.assign(static_cast<std::size_t>(T) + 1, Eigen::MatrixXd());
    sol.Gamma.assign(static_cast<std::size_t>(T) + 1, Eigen::MatrixXd());

    sol.S[static_cast<std::size_t>(T) + 1] = cost.Q.at(T + 1);
    for (int k = T; k >= 0; --k) {
        const Eigen::MatrixXd& A = model.A.at(k);
        const Eigen::MatrixXd& B = model.B.at(k);
        const Eigen::MatrixXd& Snext = sol.S[static_cast<std::size_t>(k) + 1];
        const Eigen::MatrixXd H = B.transpose() * Snext * B + cost.R.at(k);  // > 0 since R > 0
        Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (H + H.transpose()));
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("solve_riccati: B^T S B + R not positive definite at slot " +
                                     std::to_string(k));
        const Eigen::MatrixXd L = llt.solve(B.transpose() * Snext * A);
        Eigen::MatrixXd S = cost.Q.at(k) + A.transpose() * Snext * A -
                            A.transpose() * Snext * B * L;
        S = 0.5 * (S + S.transpose()).eval();
        if (!S.allFinite())
            throw std::runtime_error("solve_riccati: non-finite cost-to-go at slot " +
                                     std::to_string(k));
        sol.Gamma[static_cast<std::size_t>(k)] = L.transpose() * H * L;
        sol.L[static_cast<std::size_t>(k)] = L;
        sol.S[static_cast<std::size_t>(k)] = std::move(S);
    }
    return sol;
}

Eigen::VectorXd ce_input(const RiccatiSolution& sol, const Eigen::VectorXd& xhat, int k) {
    return -sol.gain(k) * xhat;
}

std::vector<double> eta_terms(const EpisodeLog& log, const RiccatiSolution& sol,
                              const SourceModel& model, const CostSpec& cost) {
    std::vector<double> eta;
    eta.reserve(log.slots.size());
    for (std::size_t k = 0; k < log.slots.size(); ++k) {
        const int ki = static_cast<int>(k);
        const SlotRecord& slot = log.slots[k];
        const Eigen::MatrixXd& B = model.B.at(ki);
        const Eigen::MatrixXd H = B.transpose() * sol.S[k + 1] * B + cost.R.at(ki);
        const Eigen::VectorXd residual = slot.u + sol.L[k] * slot.x;
        eta.push_back(residual.dot(H * residual));
    }
    return eta;
}

double psi_loss(const EpisodeLog& log, const RiccatiSolution& sol, const SourceModel& model,
                const CostSpec& cost) {
    double total = 0.0;
    const std::vector<double> eta = eta_terms(log, sol, model, cost);
    for (std::size_t k = 0; k < log.slots.size(); ++k)
        total += cost.theta.at(static_cast<int>(k)) * log.slots[k].sigma + eta[k];
    return total;
}

}  // namespace voisim
