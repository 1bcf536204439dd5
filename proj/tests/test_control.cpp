#include <doctest.h>

#include "test_helpers.hpp"
#include "voisim/control.hpp"

using namespace voisim;

namespace {

ScenarioConfig unit_control_scenario(int T) {
    ScenarioConfig cfg = testing::scalar_scenario(T, 1.0, 1.0, 1.0, 0.0, 1, 0.0);
    cfg.mode = Mode::Control;
    cfg.source.input_dim = 1;
    cfg.source.B = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    cfg.cost.Q = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    cfg.cost.R = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    return cfg;
}

}  // namespace

TEST_CASE("backward pass hand values for A=B=Q=R=1") {
    const ScenarioConfig cfg = unit_control_scenario(5);
    const RiccatiSolution sol = solve_riccati(cfg.source, cfg.cost);
    const int T = 5;
    CHECK(sol.S[T + 1](0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.S[T](0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(sol.L[T](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.S[T - 1](0, 0) == doctest::Approx(1.6).epsilon(1e-12));
    CHECK(sol.L[T - 1](0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    // Gamma(T-1) uses S(T) = 1.5: 1.5^2 / 2.5 = 0.9
    CHECK(sol.Gamma[T - 1](0, 0) == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("gain-weight consistency Gamma = L^T (B^T S B + R) L") {
    RngStream rng(23, "models");
    SourceModel model = testing::random_stable_model(10, 3, 3, rng);
    model.input_dim = 2;
    Eigen::MatrixXd B(3, 2);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) B(r, c) = rng.normal();
    model.B = MatrixSeq(B);
    CostSpec cost;
    cost.theta = ScalarSeq(0.0);
    cost.Q = MatrixSeq(Eigen::MatrixXd::Identity(3, 3));
    cost.R = MatrixSeq(Eigen::MatrixXd::Identity(2, 2));
    const RiccatiSolution sol = solve_riccati(model, cost);
    for (int k = 0; k <= 10; ++k) {
        const Eigen::MatrixXd H =
            B.transpose() * sol.S[static_cast<std::size_t>(k) + 1] * B + cost.R.at(k);
        const Eigen::MatrixXd expect = sol.L[static_cast<std::size_t>(k)].transpose() * H *
                                       sol.L[static_cast<std::size_t>(k)];
        const double scale = std::max(1.0, expect.norm());
        CHECK((sol.Gamma[static_cast<std::size_t>(k)] - expect).norm() <= 1e-10 * scale);
    }
}

TEST_CASE("zero input matrix removes the control correction") {
    ScenarioConfig cfg = unit_control_scenario(6);
    cfg.source.B = MatrixSeq(Eigen::MatrixXd::Zero(1, 1));
    const RiccatiSolution sol = solve_riccati(cfg.source, cfg.cost);
    double s_expected = 1.0;  // S(T+1) = Q
    for (int k = 6; k >= 0; --k) {
        CHECK(sol.L[static_cast<std::size_t>(k)](0, 0) == 0.0);
        CHECK(sol.Gamma[static_cast<std::size_t>(k)](0, 0) == 0.0);
        s_expected = 1.0 + s_expected;  // S = Q + A^T S A with A = 1
        CHECK(sol.S[static_cast<std::size_t>(k)](0, 0) ==
              doctest::Approx(s_expected).epsilon(1e-12));
    }
}

TEST_CASE("certainty-equivalent input") {
    const ScenarioConfig cfg = unit_control_scenario(5);
    const RiccatiSolution sol = solve_riccati(cfg.source, cfg.cost);
    CHECK(ce_input(sol, Eigen::VectorXd::Zero(1), 2).norm() == 0.0);
    RiccatiSolution crafted = sol;
    crafted.L[3] = Eigen::MatrixXd::Constant(1, 1, 0.5);
    CHECK(ce_input(crafted, Eigen::VectorXd::Constant(1, 2.0), 3)[0] ==
          doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("equivalent-loss terms") {
    const ScenarioConfig cfg = unit_control_scenario(0);  // one decision slot
    RiccatiSolution sol = solve_riccati(cfg.source, cfg.cost);

    SUBCASE("hand value: u=1, L=0.5, x=2, H=2.5 gives eta = 10") {
        sol.S[1] = Eigen::MatrixXd::Constant(1, 1, 1.5);  // H = 1.5 + 1 = 2.5
        sol.L[0] = Eigen::MatrixXd::Constant(1, 1, 0.5);
        EpisodeLog log;
        log.horizon = 0;
        log.slots.resize(1);
        log.slots[0].x = Eigen::VectorXd::Constant(1, 2.0);
        log.slots[0].u = Eigen::VectorXd::Constant(1, 1.0);
        log.slots[0].sigma = 0;
        const std::vector<double> eta = eta_terms(log, sol, cfg.source, cfg.cost);
        REQUIRE(eta.size() == 1);
        CHECK(eta[0] == doctest::Approx(10.0).epsilon(1e-12));
        CHECK(psi_loss(log, sol, cfg.source, cfg.cost) == doctest::Approx(10.0).epsilon(1e-12));
    }
    SUBCASE("a full-state controller u = -Lx zeroes every eta term") {
        const ScenarioConfig big = unit_control_scenario(8);
        const RiccatiSolution full = solve_riccati(big.source, big.cost);
        EpisodeLog log;
        log.horizon = 8;
        log.slots.resize(9);
        RngStream rng(3, "x");
        for (int k = 0; k <= 8; ++k) {
            log.slots[static_cast<std::size_t>(k)].x = Eigen::VectorXd::Constant(1, rng.normal());
            log.slots[static_cast<std::size_t>(k)].u =
                -full.L[static_cast<std::size_t>(k)] * log.slots[static_cast<std::size_t>(k)].x;
            log.slots[static_cast<std::size_t>(k)].sigma = k % 2;
        }
        double theta_cost = 0.0;
        for (int k = 0; k <= 8; ++k)
            theta_cost += big.cost.theta.at(k) * log.slots[static_cast<std::size_t>(k)].sigma;
        CHECK(psi_loss(log, full, big.source, big.cost) ==
              doctest::Approx(theta_cost).epsilon(1e-12));
    }
}

TEST_CASE("time-invariant cost-to-go grows monotonically backward from S(T+1)=Q") {
    RngStream rng(29, "models");
    SourceModel model = testing::random_stable_model(12, 2, 2, rng);
    model.input_dim = 1;
    Eigen::MatrixXd B(2, 1);
    B << 1.0, 0.5;
    model.B = MatrixSeq(B);
    CostSpec cost;
    cost.theta = ScalarSeq(0.0);
    cost.Q = MatrixSeq(Eigen::MatrixXd::Identity(2, 2));
    cost.R = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    const RiccatiSolution sol = solve_riccati(model, cost);
    for (int k = 0; k <= 12; ++k) {
        const Eigen::MatrixXd gap =
            sol.S[static_cast<std::size_t>(k)] - sol.S[static_cast<std::size_t>(k) + 1];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gap);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
}
