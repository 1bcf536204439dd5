#pragma once

#include <vector>

#include <Eigen/Dense>

#include "voisim/episode_log.hpp"
#include "voisim/model.hpp"

namespace voisim {

/// Finite-horizon Riccati backward pass: cost-to-go matrices S(0..T+1),
/// feedback gains L(0..T), and the induced error weight Gamma(0..T) that
/// carries the regulation cost into mismatch coordinates.
struct RiccatiSolution {
    std::vector<Eigen::MatrixXd> S;      // 0..T+1
    std::vector<Eigen::MatrixXd> L;      // 0..T
    std::vector<Eigen::MatrixXd> Gamma;  // 0..T

    const Eigen::MatrixXd& gain(int k) const { return L.at(static_cast<std::size_t>(k)); }
};

/// Solve the backward recursion S(k) = Q + A^T S' A - A^T S' B (B^T S' B +
/// R)^-1 B^T S' A from S(T+1) = Q(T+1).
RiccatiSolution solve_riccati(const SourceModel& model, const CostSpec& cost);

/// Certainty-equivalent input u(k) = -L(k) xhat(k).
Eigen::VectorXd ce_input(const RiccatiSolution& sol, const Eigen::VectorXd& xhat, int k);

/// Per-slot completed-square terms eta(k) = (u + L x)^T (B^T S' B + R)
/// (u + L x) along a logged trajectory.
std::vector<double> eta_terms(const EpisodeLog& log, const RiccatiSolution& sol,
                              const SourceModel& model, const CostSpec& cost);

/// Realized equivalent loss: sum of theta(k) sigma(k) + eta(k).
double psi_loss(const EpisodeLog& log, const RiccatiSolution& sol, const SourceModel& model,
                const CostSpec& cost);

}  // namespace voisim
