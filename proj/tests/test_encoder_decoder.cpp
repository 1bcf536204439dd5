#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "voisim/decoder.hpp"
#include "voisim/encoder.hpp"
#include "voisim/kernel.hpp"
#include "voisim/sim_core.hpp"

using namespace voisim;

namespace {

// Scalar model with A = C = W = V = M0 = 1, m0 = 0.
SourceModel unit_scalar_model(int T) {
    return testing::scalar_scenario(T, 1.0, 1.0, 1.0, 0.0, 1, 0.0).source;
}

}  // namespace

TEST_CASE("filter recursions match hand arithmetic on the unit scalar model") {
    const SourceModel model = unit_scalar_model(5);
    const FilterSchedule schedule(model);
    // O(0) = (1/M0 + C^2/V)^-1 = 0.5, K(0) = 0.5
    CHECK(schedule.prediction_cov(0)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(schedule.filtered_cov(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(schedule.gain(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    // M(1) = O(0) + W = 1.5, O(1) = (1/1.5 + 1)^-1 = 0.6, K(1) = 0.6
    CHECK(schedule.prediction_cov(1)(0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(schedule.filtered_cov(1)(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(schedule.gain(1)(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(schedule.innovation_cov(1)(0, 0) == doctest::Approx(2.5).epsilon(1e-12));

    Encoder enc(model, schedule, 1, false);
    const Eigen::VectorXd nu0 = enc.update(Eigen::VectorXd::Constant(1, 2.0));
    CHECK(nu0[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(enc.xcheck()[0] == doctest::Approx(1.0).epsilon(1e-12));

    enc.predict(std::nullopt);
    CHECK(enc.prediction()[0] == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::VectorXd nu1 = enc.update(Eigen::VectorXd::Zero(1));
    CHECK(nu1[0] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(enc.xcheck()[0] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("prediction with an input term") {
    SourceModel model = unit_scalar_model(5);
    model.input_dim = 1;
    model.B = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
    const FilterSchedule schedule(model);
    Encoder enc(model, schedule, 1, true);
    enc.update(Eigen::VectorXd::Constant(1, 2.0));  // xcheck = 1
    enc.predict(Eigen::VectorXd::Constant(1, 2.0));
    CHECK(enc.prediction()[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("an uninformative sensor leaves the prediction untouched") {
    SourceModel model = unit_scalar_model(5);
    model.V = MatrixSeq(Eigen::MatrixXd::Constant(1, 1, 1e12));
    const FilterSchedule schedule(model);
    CHECK(std::abs(schedule.gain(0)(0, 0)) < 1e-11);
    Encoder enc(model, schedule, 1, false);
    enc.update(Eigen::VectorXd::Constant(1, 100.0));
    CHECK(enc.xcheck()[0] == doctest::Approx(0.0).epsilon(1e-8));
}

TEST_CASE("filtering never increases covariance: O(k) <= M(k)") {
    RngStream rng(31, "models");
    for (int trial = 0; trial < 10; ++trial) {
        const SourceModel model = testing::random_stable_model(15, 3, 2, rng);
        const FilterSchedule schedule(model);
        for (int k = 0; k <= 15; ++k) {
            const Eigen::MatrixXd gap =
                schedule.prediction_cov(k) - schedule.filtered_cov(k);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gap);
            CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        }
    }
}

TEST_CASE("encoder estimate equals the batch least-squares oracle") {
    RngStream rng(47, "models");
    const int T = 12;
    const SourceModel model = testing::random_stable_model(T, 2, 2, rng);
    const FilterSchedule schedule(model);
    SourceSimulator sim(model);
    RngStream init(5, "init"), process(5, "process"), measurement(5, "measurement");
    Encoder enc(model, schedule, 1, false);
    SourceState s{0, sim.initial_state(init)};
    std::vector<Eigen::VectorXd> ys;
    for (int k = 0; k <= T; ++k) {
        if (k > 0) {
            sim.step(s, std::nullopt, process);
            enc.predict(std::nullopt);
        }
        ys.push_back(sim.observe(s, measurement));
        enc.update(ys.back());
        const Eigen::VectorXd oracle = testing::gls_estimate(model, ys, k);
        CHECK((enc.xcheck() - oracle).norm() <= 1e-8 * std::max(1.0, oracle.norm()));
    }
}

TEST_CASE("decoder switching recursion") {
    SUBCASE("delivered payload is rolled forward d steps") {
        SourceModel model = testing::scalar_scenario(10, 2.0, 1.0, 1.0, 0.0, 2, 0.0).source;
        Decoder dec(model, 2, false);
        ChannelOutput none;
        dec.step(none);  // k = 0
        dec.step(none);  // k = 1
        ChannelOutput z;
        z.delivered = true;
        z.payload = Eigen::VectorXd::Constant(1, 3.0);
        dec.step(z);  // k = 2: A*A*3 = 12
        CHECK(dec.xhat()[0] == doctest::Approx(12.0).epsilon(1e-12));
    }
    SUBCASE("no delivery holds the estimate under identity dynamics") {
        SourceModel model = testing::scalar_scenario(10, 1.0, 1.0, 1.0, 0.0, 1, 0.0).source;
        model.m0 = Eigen::VectorXd::Constant(1, 4.0);
        Decoder dec(model, 1, false);
        ChannelOutput none;
        dec.step(none);
        const double before = dec.xhat()[0];
        dec.step(none);
        CHECK(dec.xhat()[0] == before);
    }
    SUBCASE("control mode folds the applied inputs into both branches") {
        SourceModel model = testing::scalar_scenario(10, 1.0, 1.0, 1.0, 0.0, 2, 0.0).source;
        model.input_dim = 1;
        model.B = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
        Decoder dec(model, 2, true);
        ChannelOutput none;
        dec.step(none);  // k=0
        dec.push_input(Eigen::VectorXd::Constant(1, 1.0));  // u(0)
        dec.step(none);  // k=1
        dec.push_input(Eigen::VectorXd::Constant(1, 1.0));  // u(1)
        ChannelOutput z;
        z.delivered = true;
        z.payload = Eigen::VectorXd::Zero(1);
        dec.step(z);  // k=2: 0 + u(0) + u(1) = 2
        CHECK(dec.xhat()[0] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("hold branch adds the last input") {
        SourceModel model = testing::scalar_scenario(10, 1.0, 1.0, 1.0, 0.0, 1, 0.0).source;
        model.input_dim = 1;
        model.B = MatrixSeq(Eigen::MatrixXd::Identity(1, 1));
        model.m0 = Eigen::VectorXd::Constant(1, 5.0);
        Decoder dec(model, 1, true);
        ChannelOutput none;
        dec.step(none);  // xhat(0) = 5
        dec.push_input(Eigen::VectorXd::Constant(1, -1.0));
        dec.step(none);  // xhat(1) = 5 - 1 = 4
        CHECK(dec.xhat()[0] == doctest::Approx(4.0).epsilon(1e-12));
    }
}

TEST_CASE("scheduler input carries the 3d-1 state variables") {
    SUBCASE("d = 1: mismatch and current loss probability only") {
        const SourceModel model = unit_scalar_model(5);
        const FilterSchedule schedule(model);
        Encoder enc(model, schedule, 1, false);
        enc.update(Eigen::VectorXd::Constant(1, 2.0));
        enc.note_lambda(0.3);
        enc.apply_delivery(false);
        const SchedulerInput s = enc.scheduler_input();
        CHECK(s.nu.empty());
        CHECK(s.sigma.empty());
        REQUIRE(s.lambda.size() == 1);
        CHECK(s.lambda[0] == doctest::Approx(0.3));
        CHECK(s.etilde[0] == doctest::Approx(1.0).epsilon(1e-12));  // xcheck - m0
    }
    SUBCASE("d = 2: adds one innovation, one decision, two loss values") {
        SourceModel model = unit_scalar_model(5);
        const FilterSchedule schedule(model);
        Encoder enc(model, schedule, 2, false);
        enc.update(Eigen::VectorXd::Constant(1, 2.0));
        enc.note_lambda(0.25);
        enc.apply_delivery(false);
        SchedulerInput s = enc.scheduler_input();
        REQUIRE(s.nu.size() == 1);
        CHECK(s.nu[0][0] == doctest::Approx(2.0));  // nu(0)
        REQUIRE(s.lambda.size() == 2);
        CHECK(s.lambda[0] == 0.0);  // warm-up zero padding
        CHECK(s.lambda[1] == doctest::Approx(0.25));
        REQUIRE(s.sigma.size() == 1);
        CHECK(s.sigma[0] == 0);
        CHECK(s.etilde[0] == doctest::Approx(enc.xcheck()[0] - enc.replica_xhat()[0])
                                 .epsilon(1e-12));
    }
}

TEST_CASE("replica mirrors the decoder bit-exactly along a random episode") {
    RngStream model_rng(61, "models");
    const int T = 40, d = 2;
    SourceModel model = testing::random_stable_model(T, 2, 2, model_rng);
    ChannelSpec channel;
    channel.delay = d;
    channel.lambda_seq = ScalarSeq(0.4);

    const FilterSchedule schedule(model);
    SourceSimulator sim(model);
    RngStream init(3, "init"), process(3, "process"), measurement(3, "measurement");
    ChannelPipeline ch(channel, T, RngStream(3, "erasure"), RngStream(3, "lambda"));
    Encoder enc(model, schedule, d, false);
    Decoder dec(model, d, false);
    SourceState s{0, sim.initial_state(init)};

    for (int k = 0; k <= T; ++k) {
        const double lam = ch.lambda_step();
        if (k > 0) {
            sim.step(s, std::nullopt, process);
            enc.predict(std::nullopt);
        }
        enc.update(sim.observe(s, measurement));
        enc.note_lambda(lam);
        const ChannelOutput z = ch.receive();
        dec.step(z);
        enc.apply_delivery(z.delivered);
        REQUIRE(enc.replica_xhat() == dec.xhat());  // bit-exact
        const int sigma = k % 3 == 0 ? 1 : 0;  // arbitrary pattern
        enc.record_decision(sigma != 0 && k <= T - d);
        ch.send(sigma != 0 && k <= T - d, enc.xcheck());
        ch.end_slot();
    }
}

TEST_CASE("delivered mismatch depends only on the last d innovations") {
    // Forced delivery every slot with d = 1: etilde(k) = K(k) nu(k).
    const SourceModel model = unit_scalar_model(20);
    const FilterSchedule schedule(model);
    ChannelSpec channel;
    channel.delay = 1;
    channel.lambda_seq = ScalarSeq(0.0);
    SourceSimulator sim(model);
    RngStream init(9, "init"), process(9, "process"), measurement(9, "measurement");
    ChannelPipeline ch(channel, 20, RngStream(9, "erasure"), RngStream(9, "lambda"));
    Encoder enc(model, schedule, 1, false);
    Decoder dec(model, 1, false);
    SourceState s{0, sim.initial_state(init)};
    auto kernel = std::make_shared<MismatchKernel>(
        model, std::make_shared<const FilterSchedule>(model), channel,
        MatrixSeq(Eigen::MatrixXd::Identity(1, 1)), ScalarSeq(0.0));

    Eigen::VectorXd last_nu(1);
    for (int k = 0; k <= 20; ++k) {
        ch.lambda_step();
        if (k > 0) {
            sim.step(s, std::nullopt, process);
            enc.predict(std::nullopt);
        }
        last_nu = enc.update(sim.observe(s, measurement));
        const ChannelOutput z = ch.receive();
        dec.step(z);
        enc.apply_delivery(z.delivered);
        if (z.delivered) {
            const Eigen::VectorXd expect =
                kernel->delivered_mismatch(k, std::span<const Eigen::VectorXd>(&last_nu, 1));
            CHECK((enc.etilde() - expect).norm() < 1e-12);
            CHECK(expect[0] ==
                  doctest::Approx(schedule.gain(k)(0, 0) * last_nu[0]).epsilon(1e-12));
        }
        enc.record_decision(k <= 19);
        ch.send(k <= 19, enc.xcheck());
        ch.end_slot();
    }
}

TEST_CASE("certain erasure reduces the replica to the never-transmit prediction") {
    const SourceModel model = unit_scalar_model(15);
    const FilterSchedule schedule(model);
    ChannelSpec channel;
    channel.delay = 1;
    channel.lambda_seq = ScalarSeq(1.0);
    SourceSimulator sim(model);
    RngStream init(2, "init"), process(2, "process"), measurement(2, "measurement");
    ChannelPipeline ch(channel, 15, RngStream(2, "erasure"), RngStream(2, "lambda"));
    Encoder enc(model, schedule, 1, false);
    SourceState s{0, sim.initial_state(init)};
    Eigen::VectorXd rolled = model.m0;
    for (int k = 0; k <= 15; ++k) {
        ch.lambda_step();
        if (k > 0) {
            sim.step(s, std::nullopt, process);
            enc.predict(std::nullopt);
            rolled = model.A.at(k - 1) * rolled;
        }
        enc.update(sim.observe(s, measurement));
        const ChannelOutput z = ch.receive();
        CHECK_FALSE(z.delivered);
        enc.apply_delivery(z.delivered);
        CHECK(enc.replica_xhat()[0] == doctest::Approx(rolled[0]).epsilon(1e-12));
        enc.record_decision(k <= 14);
        ch.send(k <= 14, enc.xcheck());
        ch.end_slot();
    }
}
