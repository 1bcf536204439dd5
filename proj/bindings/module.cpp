#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "voisim/harness.hpp"
#include "voisim/io.hpp"

namespace py = pybind11;
using namespace voisim;

namespace {

py::dict log_to_dict(const EpisodeLog& log) {
    py::dict out;
    out["seed"] = log.seed;
    out["policy"] = log.policy_name;
    out["mode"] = log.mode == Mode::Control ? "control" : "estimation";
    out["phi"] = log.phi;
    out["phi_prime"] = log.phi_prime;
    out["psi"] = log.psi;
    out["total_mse"] = log.total_mse;
    out["sends"] = log.sends;
    out["losses"] = log.losses;

    const std::size_t rows = log.slots.size();
    py::list sigma, gamma, delivered, lambda, voi, mse, x, xcheck, xhat, u;
    for (std::size_t k = 0; k < rows; ++k) {
        const SlotRecord& slot = log.slots[k];
        sigma.append(slot.sigma);
        gamma.append(slot.gamma ? py::cast(*slot.gamma) : py::none());
        delivered.append(slot.delivered);
        lambda.append(slot.lambda);
        voi.append(slot.voi ? py::cast(*slot.voi) : py::none());
        mse.append(slot.mse);
        auto vec = [](const Eigen::VectorXd& v) {
            py::list l;
            for (Eigen::Index i = 0; i < v.size(); ++i) l.append(v[i]);
            return l;
        };
        x.append(vec(slot.x));
        xcheck.append(vec(slot.xcheck));
        xhat.append(vec(slot.xhat));
        if (slot.u.size() > 0) u.append(vec(slot.u));
    }
    out["sigma"] = sigma;
    out["gamma"] = gamma;
    out["delivered"] = delivered;
    out["lambda"] = lambda;
    out["voi"] = voi;
    out["mse"] = mse;
    out["x"] = x;
    out["xcheck"] = xcheck;
    out["xhat"] = xhat;
    if (log.mode == Mode::Control) out["u"] = u;
    return out;
}

py::dict report_to_dict(const AggregateReport& report) {
    py::dict out;
    out["mode"] = report.mode == Mode::Control ? "control" : "estimation";
    out["seeds"] = report.seeds;
    py::list policies;
    for (const PolicyStats& s : report.policies) {
        py::dict p;
        p["policy"] = s.name;
        p["episodes"] = s.episodes;
        p["loss_mean"] = s.loss_mean;
        p["loss_se"] = s.loss_se;
        p["mse_mean"] = s.mse_mean;
        p["mse_se"] = s.mse_se;
        p["sends_mean"] = s.sends_mean;
        p["losses_mean"] = s.losses_mean;
        p["loss_fraction"] = s.loss_fraction;
        p["loss"] = s.loss;
        policies.append(p);
    }
    out["policies"] = policies;
    py::list pairs;
    for (const PairDiff& d : report.pairs) {
        py::dict p;
        p["a"] = d.a;
        p["b"] = d.b;
        p["mean_diff"] = d.mean_diff;
        p["se_diff"] = d.se_diff;
        pairs.append(p);
    }
    out["pairs"] = pairs;
    return out;
}

std::vector<Eigen::MatrixXd> to_lists_keep(const std::vector<Eigen::MatrixXd>& ms) { return ms; }

py::list matrices_to_list(const std::vector<Eigen::MatrixXd>& ms) {
    py::list out;
    for (const Eigen::MatrixXd& m : ms) {
        py::list rows;
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            py::list row;
            for (Eigen::Index c = 0; c < m.cols(); ++c) row.append(m(r, c));
            rows.append(row);
        }
        out.append(rows);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Event-triggered estimation and control over a lossy delayed channel";

    py::class_<ScenarioConfig>(m, "Scenario")
        .def_property_readonly("horizon",
                               [](const ScenarioConfig& c) { return c.source.horizon; })
        .def_property_readonly("state_dim",
                               [](const ScenarioConfig& c) { return c.source.state_dim; })
        .def_property_readonly("delay", [](const ScenarioConfig& c) { return c.channel.delay; })
        .def_property_readonly("mode",
                               [](const ScenarioConfig& c) {
                                   return c.mode == Mode::Control ? "control" : "estimation";
                               })
        .def_property(
            "seed", [](const ScenarioConfig& c) { return c.seed; },
            [](ScenarioConfig& c, std::uint64_t seed) { c.seed = seed; })
        .def_property(
            "episodes", [](const ScenarioConfig& c) { return c.episodes; },
            [](ScenarioConfig& c, int n) { c.episodes = n; })
        .def_property(
            "policy", [](const ScenarioConfig& c) { return c.policy.name(); },
            [](ScenarioConfig& c, const std::string& sel) { c.policy = parse_policy(sel); })
        .def("to_json", [](const ScenarioConfig& c) { return scenario_to_json(c); })
        .def("__repr__", [](const ScenarioConfig& c) {
            return "<Scenario T=" + std::to_string(c.source.horizon) +
                   " n=" + std::to_string(c.source.state_dim) +
                   " d=" + std::to_string(c.channel.delay) + " policy=" + c.policy.name() + ">";
        });

    m.def("spacecraft_scenario", &spacecraft_scenario,
          "Spin-stabilized spacecraft downlink scenario (T = 1000, d = 2)");
    m.def("scenario_from_json", &scenario_from_json, py::arg("text"));
    m.def(
        "validate", [](const ScenarioConfig& c) { return validate(c); }, py::arg("scenario"),
        "List of invariant violations; empty means valid");

    m.def(
        "run_episode",
        [](const ScenarioConfig& cfg, std::optional<std::uint64_t> seed,
           std::optional<std::string> policy) {
            ScenarioConfig local = cfg;
            if (policy) local.policy = parse_policy(*policy);
            SimContext ctx = make_context(local);
            const std::uint64_t s = seed ? *seed : episode_seed(local.seed, 0);
            return log_to_dict(run_episode(ctx, s));
        },
        py::arg("scenario"), py::arg("seed") = std::nullopt, py::arg("policy") = std::nullopt,
        "Simulate one episode and return the trajectory as plain lists");

    m.def(
        "monte_carlo",
        [](const ScenarioConfig& cfg, const std::vector<std::string>& policies, int episodes,
           std::optional<std::uint64_t> seed, int workers) {
            ScenarioConfig local = cfg;
            if (seed) local.seed = *seed;
            SimContext ctx = make_context(local);
            std::vector<PolicySpec> specs;
            specs.reserve(policies.size());
            for (const std::string& p : policies) specs.push_back(parse_policy(p));
            return report_to_dict(monte_carlo(ctx, specs, episodes, workers));
        },
        py::arg("scenario"), py::arg("policies"), py::arg("episodes"),
        py::arg("seed") = std::nullopt, py::arg("workers") = 0,
        "Common-random-number comparison of transmit policies");

    m.def(
        "solve_riccati",
        [](const ScenarioConfig& cfg) {
            const RiccatiSolution sol = solve_riccati(cfg.source, cfg.cost);
            py::dict out;
            out["S"] = matrices_to_list(to_lists_keep(sol.S));
            out["L"] = matrices_to_list(to_lists_keep(sol.L));
            out["Gamma"] = matrices_to_list(to_lists_keep(sol.Gamma));
            return out;
        },
        py::arg("scenario"), "Backward Riccati pass: S(0..T+1), L(0..T), Gamma(0..T)");

    m.def(
        "solve_dp",
        [](const ScenarioConfig& cfg) {
            SimContext ctx = make_context(cfg);
            const ValueFunctionGrid grid = solve_dp(ctx.kernel, ctx.dp_options);
            py::dict out;
            out["delay"] = grid.delay();
            out["horizon"] = grid.horizon();
            out["predicted_total_loss"] = grid.expected_total_loss();
            py::list e_nodes;
            for (int i = 0; i < grid.e_axis().n; ++i) e_nodes.append(grid.e_axis().node(i));
            out["e_nodes"] = e_nodes;
            return out;
        },
        py::arg("scenario"),
        "Tabulate the value function (scalar sources, d <= 2) and report its summary");

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "0.1.0";
#endif
}
