#pragma once

#include <vector>

#include <Eigen/Dense>

#include "voisim/model.hpp"
#include "voisim/rng.hpp"

namespace voisim::testing {

/// Scalar estimation scenario with constant coefficients.
inline ScenarioConfig scalar_scenario(int T, double a, double w, double v, double lambda,
                                      int delay, double theta, double m0_var = 1.0) {
    ScenarioConfig cfg;
    cfg.source.horizon = T;
    cfg.source.state_dim = 1;
    cfg.source.output_dim = 1;
    cfg.source.A = MatrixSeq(Eigen::MatrixXd::Constant(1, 1, a));
    cfg.source.C = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    cfg.source.W = MatrixSeq(Eigen::MatrixXd::Constant(1, 1, w));
    cfg.source.V = MatrixSeq(Eigen::MatrixXd::Constant(1, 1, v));
    cfg.source.m0 = Eigen::VectorXd::Zero(1);
    cfg.source.M0 = Eigen::MatrixXd::Constant(1, 1, m0_var);
    cfg.channel.delay = delay;
    cfg.channel.lambda_seq = ScalarSeq(lambda);
    cfg.cost.theta = ScalarSeq(theta);
    cfg.cost.Lambda = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    cfg.policy.kind = PolicyKind::Never;
    cfg.seed = 42;
    cfg.episodes = 1;
    return cfg;
}

/// Random stable system of the given sizes; spectral radius below 0.95.
inline SourceModel random_stable_model(int T, int n, int m, RngStream& rng) {
    SourceModel model;
    model.horizon = T;
    model.state_dim = n;
    model.output_dim = m;
    Eigen::MatrixXd A(n, n), C(m, n), G(n, n), H(m, m), F(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) A(r, c) = rng.normal();
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) C(r, c) = rng.normal();
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) G(r, c) = 0.3 * rng.normal();
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) H(r, c) = 0.3 * rng.normal();
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) F(r, c) = 0.5 * rng.normal();
    const double radius = A.eigenvalues().cwiseAbs().maxCoeff();
    const double target = 0.3 + 0.6 * rng.uniform01();
    A *= target / std::max(radius, 1e-6);
    model.A = MatrixSeq(A);
    model.C = MatrixSeq(C);
    model.W = MatrixSeq((G * G.transpose() + 0.05 * Eigen::MatrixXd::Identity(n, n)).eval());
    model.V = MatrixSeq((H * H.transpose() + 0.05 * Eigen::MatrixXd::Identity(m, m)).eval());
    model.m0 = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < n; ++r) model.m0[r] = rng.normal();
    model.M0 = (F * F.transpose() + 0.2 * Eigen::MatrixXd::Identity(n, n)).eval();
    return model;
}

/// Posterior mean of x(j) from y(0..j) via batch generalized least squares
/// on the stacked trajectory model. Independent of the recursive filter.
inline Eigen::VectorXd gls_estimate(const SourceModel& model,
                                    const std::vector<Eigen::VectorXd>& ys, int j) {
    const int n = model.state_dim;
    const int dim = (j + 1) * n;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);

    const Eigen::MatrixXd M0inv = model.M0.inverse();
    H.topLeftCorner(n, n) += M0inv;
    rhs.head(n) += M0inv * model.m0;

    for (int i = 0; i < j; ++i) {
        const Eigen::MatrixXd& A = model.A.at(i);
        const Eigen::MatrixXd Winv = model.W.at(i).inverse();
        H.block(i * n, i * n, n, n) += A.transpose() * Winv * A;
        H.block(i * n, (i + 1) * n, n, n) -= A.transpose() * Winv;
        H.block((i + 1) * n, i * n, n, n) -= Winv * A;
        H.block((i + 1) * n, (i + 1) * n, n, n) += Winv;
    }
    for (int i = 0; i <= j; ++i) {
        const Eigen::MatrixXd& C = model.C.at(i);
        const Eigen::MatrixXd Vinv = model.V.at(i).inverse();
        H.block(i * n, i * n, n, n) += C.transpose() * Vinv * C;
        rhs.segment(i * n, n) += C.transpose() * Vinv * ys.at(static_cast<std::size_t>(i));
    }
    const Eigen::VectorXd solution = H.ldlt().solve(rhs);
    return solution.segment(j * n, n);
}

}  // namespace voisim::testing
