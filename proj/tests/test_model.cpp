#include <doctest.h>

#include <numbers>

#include "test_helpers.hpp"
#include "voisim/model.hpp"

using namespace voisim;

namespace {

bool has_violation(const std::vector<std::string>& violations, const std::string& needle) {
    for (const std::string& v : violations)
        if (v.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("spacecraft preset matches the published parameters") {
    const ScenarioConfig cfg = spacecraft_scenario();
    CHECK(cfg.source.horizon == 1000);
    CHECK(cfg.source.A.at(0)(0, 0) == doctest::Approx(0.4258).epsilon(1e-15));
    CHECK(cfg.source.A.at(500)(2, 2) == 1.0);
    CHECK(cfg.source.W.at(0)(0, 0) == doctest::Approx(2.245e-7).epsilon(1e-12));
    CHECK(cfg.source.W.at(0)(2, 2) == doctest::Approx(2.5e-9).epsilon(1e-12));
    CHECK(cfg.source.M0.isApprox(10.0 * cfg.source.W.at(0)));
    CHECK(cfg.source.m0[2] == doctest::Approx(2.0 * std::numbers::pi));
    CHECK(cfg.source.V.at(3)(1, 1) == doctest::Approx(1e-3));
    CHECK(cfg.channel.delay == 2);
    CHECK(cfg.channel.lambda_seq.at(77) == doctest::Approx(0.3));
    CHECK(cfg.cost.theta.at(0) == doctest::Approx(8e-6));
    CHECK(cfg.cost.theta.at(500) == doctest::Approx(8e-6));
    CHECK(cfg.cost.theta.at(501) == doctest::Approx(6e-6));
    CHECK(cfg.cost.theta.at(700) == doctest::Approx(6e-6));
    CHECK(validate(cfg).empty());
}

TEST_CASE("validator flags degenerate covariances and bad delays") {
    ScenarioConfig cfg = testing::scalar_scenario(10, 1.0, 1.0, 1.0, 0.0, 1, 0.1);

    SUBCASE("zero process covariance") {
        cfg.source.W = MatrixSeq(Eigen::MatrixXd::Zero(1, 1));
        CHECK(has_violation(validate(cfg), "not positive definite"));
        CHECK(has_violation(validate(cfg), "source.W"));
    }
    SUBCASE("zero delay") {
        cfg.channel.delay = 0;
        CHECK(has_violation(validate(cfg), "delay must satisfy 1 <= d <= T"));
    }
    SUBCASE("delay beyond horizon") {
        cfg.channel.delay = 11;
        CHECK(has_violation(validate(cfg), "delay must satisfy"));
    }
    SUBCASE("negative price") {
        cfg.cost.theta = ScalarSeq(-1.0);
        CHECK(has_violation(validate(cfg), "cost.theta"));
    }
    SUBCASE("asymmetric weight") {
        Eigen::MatrixXd l(1, 1);
        l << 1.0;
        cfg.cost.Lambda = MatrixSeq(l);
        cfg.source.state_dim = 1;
        CHECK(validate(cfg).empty());
    }
    SUBCASE("loss probability out of range") {
        cfg.channel.lambda_seq = ScalarSeq(1.5);
        CHECK(has_violation(validate(cfg), "channel.lambda"));
    }
    SUBCASE("wrong sequence length") {
        std::vector<Eigen::MatrixXd> as(5, Eigen::MatrixXd::Identity(1, 1));
        cfg.source.A = MatrixSeq(as);
        CHECK(has_violation(validate(cfg), "source.A"));
    }
    SUBCASE("chain rows must be stochastic") {
        cfg.channel.lambda_seq = ScalarSeq();
        LambdaChain chain;
        chain.states = Eigen::Vector2d(0.1, 0.9);
        chain.transition = Eigen::MatrixXd(2, 2);
        chain.transition << 0.9, 0.2, 0.2, 0.8;
        chain.initial = Eigen::Vector2d(0.5, 0.5);
        cfg.channel.lambda_chain = chain;
        CHECK(has_violation(validate(cfg), "channel.lambda.transition"));
    }
}

TEST_CASE("voi-dp selector is restricted to scalar short-delay scenarios") {
    ScenarioConfig cfg = spacecraft_scenario();
    cfg.policy.kind = PolicyKind::VoiDp;
    CHECK(has_violation(validate(cfg), "voi-dp"));

    ScenarioConfig ok = testing::scalar_scenario(10, 1.0, 1.0, 1.0, 0.0, 2, 0.1);
    ok.policy.kind = PolicyKind::VoiDp;
    CHECK(validate(ok).empty());

    ok.channel.delay = 3;
    CHECK(has_violation(validate(ok), "voi-dp"));
}

TEST_CASE("policy selector parsing") {
    CHECK(parse_policy("voi").kind == PolicyKind::VoiAuto);
    CHECK(parse_policy("voi-dp").kind == PolicyKind::VoiDp);
    CHECK(parse_policy("voi-rollout").kind == PolicyKind::VoiRollout);
    const PolicySpec periodic = parse_policy("periodic:21:3");
    CHECK(periodic.kind == PolicyKind::Periodic);
    CHECK(periodic.period == 21);
    CHECK(periodic.phase == 3);
    CHECK(parse_policy("periodic:21").phase == 0);
    CHECK(parse_policy("random:0.25").rate == doctest::Approx(0.25));
    CHECK(parse_policy("always").kind == PolicyKind::Always);
    CHECK(parse_policy("never").kind == PolicyKind::Never);
    CHECK_THROWS_AS((void)parse_policy("sometimes"), std::invalid_argument);
    CHECK_THROWS_AS((void)parse_policy("periodic"), std::invalid_argument);
    CHECK(parse_policy("periodic:21").name() == "periodic:21");
}

TEST_CASE("positive definiteness uses a relative eigenvalue bound") {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
    CHECK(is_positive_definite(m));
    m(1, 1) = 1e-14;  // below the 1e-12 floor relative to max(eig, 1)
    CHECK_FALSE(is_positive_definite(m));
    CHECK(is_positive_semidefinite(m));
    m(1, 1) = -1e-3;
    CHECK_FALSE(is_positive_semidefinite(m));
    Eigen::MatrixXd big = 1e6 * Eigen::MatrixXd::Identity(2, 2);
    big(1, 1) = 1e-7;  // fine on an absolute scale, degenerate relative to 1e6
    CHECK_FALSE(is_positive_definite(big));
}
