#include "voisim/value_function.hpp"

#include <cmath>

#include "voisim/parallel.hpp"

namespace voisim {

void UniformAxis::build(double half_range, int nodes) {
    if (nodes < 2 || nodes % 2 == 0)
        throw std::invalid_argument("grid axis needs an odd node count >= 3");
    if (!(half_range > 0.0)) half_range = 1e-12;
    lo = -half_range;
    hi = half_range;
    n = nodes;
    step = (hi - lo) / (n - 1);
}

void UniformAxis::locate(double x, int& i0, double& frac, bool* clamped) const {
    if (x <= lo) {
        i0 = 0;
        frac = 0.0;
        if (clamped && x < lo) *clamped = true;
        return;
    }
    if (x >= hi) {
        i0 = n - 2;
        frac = 1.0;
        if (clamped && x > hi) *clamped = true;
        return;
    }
    const double t = (x - lo) / step;
    i0 = std::min(static_cast<int>(t), n - 2);
    frac = t - i0;
}

std::size_t ValueFunctionGrid::flat_index(int ei, int vi, int lp, int lc, int sp) const {
    if (delay_ == 1) return static_cast<std::size_t>(ei) * n_lambda_ + lc;
    return ((((static_cast<std::size_t>(ei) * nu_axis_.n + vi) * n_lambda_ + lp) * n_lambda_ +
             lc) *
            2) +
           sp;
}

namespace {

double scalar_of(const Eigen::VectorXd& v, const char* what) {
    if (v.size() != 1) throw std::invalid_argument(std::string(what) + ": scalar state expected");
    return v[0];
}

}  // namespace

std::array<double, 2> ValueFunctionGrid::interpolate_pair(int k, const SchedulerInput& s,
                                                          ClampStats* stats) const {
    if (k < 0 || k > last_decision_slot()) return {0.0, 0.0};
    const Eigen::ArrayXd& value = value_[static_cast<std::size_t>(k)];
    const Eigen::ArrayXd& voi = voi_[static_cast<std::size_t>(k)];

    bool clamped = false;
    int ei = 0;
    double ef = 0.0;
    e_axis_.locate(scalar_of(s.etilde, "etilde"), ei, ef, &clamped);

    int lc = 0, lp = 0;
    if (chain_) {
        lc = kernel_->chain_state_index(s.lambda.back());
        if (delay_ == 2) lp = kernel_->chain_state_index(s.lambda.front());
    }

    double v = 0.0, x = 0.0;
    if (delay_ == 1) {
        const std::size_t a = flat_index(ei, 0, 0, lc, 0);
        const std::size_t b = flat_index(ei + 1, 0, 0, lc, 0);
        v = (1 - ef) * value[a] + ef * value[b];
        x = (1 - ef) * voi[a] + ef * voi[b];
    } else {
        int vi = 0;
        double vf = 0.0;
        nu_axis_.locate(scalar_of(s.nu.at(0), "nu"), vi, vf, &clamped);
        const int sp = s.sigma.at(0) != 0 ? 1 : 0;
        const std::size_t a00 = flat_index(ei, vi, lp, lc, sp);
        const std::size_t a01 = flat_index(ei, vi + 1, lp, lc, sp);
        const std::size_t a10 = flat_index(ei + 1, vi, lp, lc, sp);
        const std::size_t a11 = flat_index(ei + 1, vi + 1, lp, lc, sp);
        v = (1 - ef) * ((1 - vf) * value[a00] + vf * value[a01]) +
            ef * ((1 - vf) * value[a10] + vf * value[a11]);
        x = (1 - ef) * ((1 - vf) * voi[a00] + vf * voi[a01]) +
            ef * ((1 - vf) * voi[a10] + vf * voi[a11]);
    }
    if (stats) {
        ++stats->evals;
        if (clamped) ++stats->clamped;
    }
    return {v, x};
}

double ValueFunctionGrid::value_at(int k, const SchedulerInput& s, ClampStats* stats) const {
    return interpolate_pair(k, s, stats)[0];
}

double ValueFunctionGrid::voi_at(int k, const SchedulerInput& s, ClampStats* stats) const {
    if (k > last_decision_slot()) return -kernel_->theta(k);
    return interpolate_pair(k, s, stats)[1];
}

namespace {

// Linear interpolation over a per-lambda-mixed column with edge clamping.
double interp_column(const Eigen::ArrayXd& column, const UniformAxis& axis, double x) {
    int i0 = 0;
    double f = 0.0;
    axis.locate(x, i0, f, nullptr);
    return (1 - f) * column[i0] + f * column[i0 + 1];
}

struct Dp1Workspace {
    // Per (slot, lambda-state): next-slot value mixed over the chain row.
    Eigen::ArrayXd mixed;
};

}  // namespace

ValueFunctionGrid solve_dp(std::shared_ptr<const MismatchKernel> kernel,
                           const DpOptions& options) {
    const MismatchKernel& ker = *kernel;
    if (ker.state_dim() != 1 || ker.output_dim() != 1)
        throw UnsupportedConfigError(
            "solve_dp supports scalar sources only (n = m = 1); use the rollout scheduler "
            "(voi-rollout) for multi-dimensional sources");
    if (ker.delay() > 2)
        throw UnsupportedConfigError(
            "solve_dp supports delay d <= 2; use the rollout scheduler (voi-rollout) for longer "
            "delays");
    const int T = ker.horizon();
    const int d = ker.delay();
    if (T - d < 0) throw UnsupportedConfigError("horizon shorter than the channel delay");

    ValueFunctionGrid grid;
    grid.kernel_ = kernel;
    grid.delay_ = d;
    grid.horizon_ = T;
    grid.options_ = options;
    grid.chain_ = ker.lambda_is_chain();
    if (grid.chain_) {
        const Eigen::VectorXd& states = ker.lambda_chain().states;
        grid.n_lambda_ = static_cast<int>(states.size());
        grid.lambda_states_.assign(states.data(), states.data() + states.size());
    } else {
        grid.n_lambda_ = 1;
    }

    grid.e_axis_.build(options.e_range_stds * ker.never_transmit_mismatch_std(), options.e_nodes);
    if (d == 2)
        grid.nu_axis_.build(options.nu_range_stds * ker.max_innovation_std(), options.nu_nodes);

    const GaussHermite quad(options.quadrature);
    const int S = grid.n_lambda_;
    const int Ne = grid.e_axis_.n;
    const int Nv = d == 2 ? grid.nu_axis_.n : 1;
    const std::size_t slab =
        d == 1 ? static_cast<std::size_t>(Ne) * S
               : static_cast<std::size_t>(Ne) * Nv * S * S * 2;

    grid.value_.assign(static_cast<std::size_t>(T - d) + 1, Eigen::ArrayXd());
    grid.voi_.assign(static_cast<std::size_t>(T - d) + 1, Eigen::ArrayXd());
    grid.transmit_.assign(static_cast<std::size_t>(T - d) + 1, std::vector<std::uint8_t>());

    // Chain transition row accessor; deterministic scenarios collapse to a
    // single pseudo-state with unit mass.
    auto transition = [&](int from, int to) -> double {
        if (!grid.chain_) return 1.0;
        return ker.lambda_chain().transition(from, to);
    };
    auto lambda_of = [&](int idx, int k, int offset) -> double {
        if (grid.chain_) return grid.lambda_states_[static_cast<std::size_t>(idx)];
        return ker.lambda_value(std::max(k - offset, 0));
    };

    for (int k = T - d; k >= 0; --k) {
        Eigen::ArrayXd value(slab), voi(slab);
        std::vector<std::uint8_t> transmit(slab, 0);
        const bool terminal = k == T - d;
        const Eigen::ArrayXd* next = terminal ? nullptr : &grid.value_[static_cast<std::size_t>(k) + 1];

        if (d == 1) {
            const double A = ker.A(k)(0, 0);
            const double K1 = ker.gain(k + 1)(0, 0);
            const double s1 = std::sqrt(ker.innovation_cov(k + 1)(0, 0));
            const double L1 = ker.weight(k + 1)(0, 0);
            const double th = ker.theta(k);
            for (int lc = 0; lc < S; ++lc) {
                const double lam = lambda_of(lc, k, 0);
                // Mix the next-slot value over the chain row once per state.
                Eigen::ArrayXd mixed = Eigen::ArrayXd::Zero(Ne);
                if (next) {
                    for (int ln = 0; ln < S; ++ln) {
                        const double w = transition(lc, ln);
                        if (w == 0.0) continue;
                        for (int i = 0; i < Ne; ++i)
                            mixed[i] += w * (*next)[grid.flat_index(i, 0, 0, ln, 0)];
                    }
                }
                auto branch_value = [&](double base) {
                    double acc = 0.0;
                    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
                        const double e_next = base + K1 * s1 * quad.nodes[q];
                        double stage = L1 * e_next * e_next;
                        if (next) stage += interp_column(mixed, grid.e_axis_, e_next);
                        acc += quad.weights[q] * stage;
                    }
                    return acc;
                };
                const double w_reset = branch_value(0.0);
                parallel_for(Ne, options.workers, [&](long i) {
                    const double base = A * grid.e_axis_.node(static_cast<int>(i));
                    const double w_hold = branch_value(base);
                    const double v = (1.0 - lam) * (w_hold - w_reset) - th;
                    const std::size_t at = grid.flat_index(static_cast<int>(i), 0, 0, lc, 0);
                    voi[at] = v;
                    value[at] = w_hold - std::max(v, 0.0);
                    transmit[at] = v >= 0.0 ? 1 : 0;
                });
            }
        } else {
            const double A0 = ker.A(k)(0, 0);
            const double A1 = ker.A(k + 1)(0, 0);
            const double K0 = ker.gain(k)(0, 0);
            const double K1 = ker.gain(k + 1)(0, 0);
            const double K2 = ker.gain(k + 2)(0, 0);
            const double s1 = std::sqrt(ker.innovation_cov(k + 1)(0, 0));
            const double sv1 = ker.innovation_cov(k + 1)(0, 0);
            const double sv2 = ker.innovation_cov(k + 2)(0, 0);
            const double L2 = ker.weight(k + 2)(0, 0);
            const double th = ker.theta(k);
            const double var_tail = A1 * K1 * A1 * K1 * sv1 + K2 * K2 * sv2;
            const double c_del = L2 * var_tail;  // delivered-at-k+2 stage cost

            for (int lc = 0; lc < S; ++lc) {
                const double lam_c = lambda_of(lc, k, 0);
                // Next-slot value mixed over the chain row, per next-sigma.
                std::array<Eigen::ArrayXd, 2> mixed;
                for (int sg = 0; sg < 2; ++sg) {
                    mixed[static_cast<std::size_t>(sg)] =
                        Eigen::ArrayXd::Zero(static_cast<std::size_t>(Ne) * Nv);
                    if (!next) continue;
                    for (int ln = 0; ln < S; ++ln) {
                        const double w = transition(lc, ln);
                        if (w == 0.0) continue;
                        for (int i = 0; i < Ne; ++i)
                            for (int j = 0; j < Nv; ++j)
                                mixed[static_cast<std::size_t>(sg)]
                                     [static_cast<std::size_t>(i) * Nv + j] +=
                                    w * (*next)[grid.flat_index(i, j, lc, ln, sg)];
                    }
                }
                auto bilinear = [&](const Eigen::ArrayXd& slab2d, double e, double nu) {
                    int i0 = 0, j0 = 0;
                    double ef = 0.0, vf = 0.0;
                    grid.e_axis_.locate(e, i0, ef, nullptr);
                    grid.nu_axis_.locate(nu, j0, vf, nullptr);
                    const std::size_t r0 = static_cast<std::size_t>(i0) * Nv + j0;
                    const std::size_t r1 = static_cast<std::size_t>(i0 + 1) * Nv + j0;
                    return (1 - ef) * ((1 - vf) * slab2d[r0] + vf * slab2d[r0 + 1]) +
                           ef * ((1 - vf) * slab2d[r1] + vf * slab2d[r1 + 1]);
                };
                // Continuation tables: one entry per reachable next mismatch,
                // split by whether the in-flight packet lands at k+1.
                auto continuation = [&](double e_base, int sg) {
                    if (!next) return 0.0;
                    double acc = 0.0;
                    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
                        const double nu_next = s1 * quad.nodes[q];
                        acc += quad.weights[q] *
                               bilinear(mixed[static_cast<std::size_t>(sg)],
                                        e_base + K1 * nu_next, nu_next);
                    }
                    return acc;
                };

                Eigen::ArrayXd nd_cont(static_cast<std::size_t>(Ne) * 2);
                Eigen::ArrayXd nd_quad(Ne);
                parallel_for(Ne, options.workers, [&](long i) {
                    const double e = grid.e_axis_.node(static_cast<int>(i));
                    for (int sg = 0; sg < 2; ++sg)
                        nd_cont[static_cast<std::size_t>(i) * 2 + sg] = continuation(A0 * e, sg);
                    const double prop = A1 * A0 * e;
                    nd_quad[i] = L2 * prop * prop;
                });
                Eigen::ArrayXd del_cont(static_cast<std::size_t>(Nv) * 2);
                Eigen::ArrayXd del_quad(Nv);
                parallel_for(Nv, options.workers, [&](long j) {
                    const double nu = grid.nu_axis_.node(static_cast<int>(j));
                    for (int sg = 0; sg < 2; ++sg)
                        del_cont[static_cast<std::size_t>(j) * 2 + sg] =
                            continuation(A0 * K0 * nu, sg);
                    const double prop = A1 * A0 * K0 * nu;
                    del_quad[j] = L2 * prop * prop;
                });

                for (int lp = 0; lp < S; ++lp) {
                    const double lam_p = lambda_of(lp, k, 1);
                    for (int sp = 0; sp < 2; ++sp) {
                        const double p1 = sp ? 1.0 - lam_p : 0.0;
                        parallel_for(Ne, options.workers, [&](long i) {
                            for (int j = 0; j < Nv; ++j) {
                                // Expected mismatch cost at k+2 if the slot-k
                                // packet misses, and the continuation values.
                                const double e_nd =
                                    c_del + p1 * del_quad[j] + (1.0 - p1) * nd_quad[i];
                                const double ev0 =
                                    p1 * del_cont[static_cast<std::size_t>(j) * 2 + 0] +
                                    (1.0 - p1) * nd_cont[static_cast<std::size_t>(i) * 2 + 0];
                                const double ev1 =
                                    p1 * del_cont[static_cast<std::size_t>(j) * 2 + 1] +
                                    (1.0 - p1) * nd_cont[static_cast<std::size_t>(i) * 2 + 1];
                                const double j0 = e_nd + ev0;
                                const double j1 = th + (1.0 - lam_c) * c_del + lam_c * e_nd + ev1;
                                const double v = j0 - j1;
                                const std::size_t at =
                                    grid.flat_index(static_cast<int>(i), j, lp, lc, sp);
                                voi[at] = v;
                                value[at] = std::min(j0, j1);
                                transmit[at] = v >= 0.0 ? 1 : 0;
                            }
                        });
                    }
                }
            }
        }
        grid.value_[static_cast<std::size_t>(k)] = std::move(value);
        grid.voi_[static_cast<std::size_t>(k)] = std::move(voi);
        grid.transmit_[static_cast<std::size_t>(k)] = std::move(transmit);
    }
    return grid;
}

ValueFunctionGrid solve_dp(const SourceModel& model, const ChannelSpec& channel,
                           const CostSpec& cost, const DpOptions& options) {
    auto schedule = std::make_shared<const FilterSchedule>(model);
    auto kernel =
        std::make_shared<MismatchKernel>(model, schedule, channel, cost.Lambda, cost.theta);
    return solve_dp(std::move(kernel), options);
}

double ValueFunctionGrid::expected_total_loss() const {
    const MismatchKernel& ker = *kernel_;
    const int d = delay_;
    const GaussHermite quad(options_.quadrature);

    // Warm-up error terms and the decision-independent filter term.
    double total = 0.0;
    Eigen::MatrixXd cov = ker.gain(0) * ker.innovation_cov(0) * ker.gain(0).transpose();
    for (int tau = 0; tau <= horizon_; ++tau) {
        if (tau > 0)
            cov = (ker.A(tau - 1) * cov * ker.A(tau - 1).transpose() +
                   ker.gain(tau) * ker.innovation_cov(tau) * ker.gain(tau).transpose())
                      .eval();
        total += (ker.weight(tau) * ker.filtered_cov(tau)).trace();
        if (tau < d) total += (ker.weight(tau) * cov).trace();  // no deliveries yet
    }

    // E[V(0, s(0))]: etilde(0) = K(0) nu(0); the nu buffer (d = 2) holds the
    // same draw; warm-up sigma entries are zero.
    const double s0 = std::sqrt(ker.innovation_cov(0)(0, 0));
    const double K0 = ker.gain(0)(0, 0);
    double ev0 = 0.0;
    for (std::size_t q = 0; q < quad.nodes.size(); ++q) {
        const double nu0 = s0 * quad.nodes[q];
        SchedulerInput s;
        s.k = 0;
        s.etilde = Eigen::VectorXd::Constant(1, K0 * nu0);
        if (d == 2) s.nu.push_back(Eigen::VectorXd::Constant(1, nu0));
        s.sigma.assign(static_cast<std::size_t>(d - 1), 0);
        s.lambda.assign(static_cast<std::size_t>(d), 0.0);
        if (chain_) {
            const LambdaChain& chain = ker.lambda_chain();
            double acc = 0.0;
            for (Eigen::Index l = 0; l < chain.states.size(); ++l) {
                SchedulerInput sl = s;
                std::fill(sl.lambda.begin(), sl.lambda.end(), chain.states[l]);
                acc += chain.initial[l] * value_at(0, sl, nullptr);
            }
            ev0 += quad.weights[q] * acc;
        } else {
            for (int i = 0; i < d; ++i)
                s.lambda[static_cast<std::size_t>(i)] = ker.lambda_value(std::max(0 - (d - 1 - i), 0));
            ev0 += quad.weights[q] * value_at(0, s, nullptr);
        }
    }
    return total + ev0;
}

}  // namespace voisim
