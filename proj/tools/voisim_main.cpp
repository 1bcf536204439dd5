#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voisim/harness.hpp"
#include "voisim/io.hpp"
#include "voisim/parallel.hpp"

namespace {

namespace fs = std::filesystem;
using namespace voisim;

ScenarioConfig load_scenario(const std::string& ref) {
    if (ref == "spacecraft" && !fs::exists(ref)) return spacecraft_scenario();
    return load_scenario_file(ref);
}

std::string sanitize(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (c == ':' || c == '/' || c == '\\') c = '-';
    return out;
}

std::vector<PolicySpec> parse_policy_list(const std::string& text) {
    std::vector<PolicySpec> specs;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto next = text.find(',', start);
        const std::string item =
            next == std::string::npos ? text.substr(start) : text.substr(start, next - start);
        if (!item.empty()) specs.push_back(parse_policy(item));
        if (next == std::string::npos) break;
        start = next + 1;
    }
    if (specs.empty()) throw std::invalid_argument("empty policy list");
    return specs;
}

void print_report(const AggregateReport& report) {
    std::printf("%-16s %12s %12s %10s %10s %10s\n", "policy", "loss_mean", "loss_se", "mse_mean",
                "sends", "loss_frac");
    for (const PolicyStats& s : report.policies)
        std::printf("%-16s %12.6g %12.3g %10.4g %10.2f %10.3f\n", s.name.c_str(), s.loss_mean,
                    s.loss_se, s.mse_mean, s.sends_mean, s.loss_fraction);
    for (const PairDiff& d : report.pairs)
        std::printf("pair %s - %s: mean diff %.6g (se %.3g)\n", d.a.c_str(), d.b.c_str(),
                    d.mean_diff, d.se_diff);
}

int cmd_validate(const std::string& scenario_ref) {
    const ScenarioConfig cfg = load_scenario(scenario_ref);
    const std::vector<std::string> violations = validate(cfg);
    for (const std::string& v : violations) std::cout << v << "\n";
    if (violations.empty()) {
        std::cout << "ok\n";
        return 0;
    }
    return 1;
}

int cmd_preset(const std::string& name, const std::string& out_path) {
    if (name != "spacecraft") {
        std::cerr << "unknown preset '" << name << "' (available: spacecraft)\n";
        return 1;
    }
    save_scenario_file(spacecraft_scenario(), out_path);
    std::cout << out_path << "\n";
    return 0;
}

int cmd_run(const std::string& scenario_ref, const std::string& policy, std::uint64_t seed,
            bool seed_set, int episodes, const std::string& out_dir, int workers) {
    ScenarioConfig cfg = load_scenario(scenario_ref);
    if (!policy.empty()) cfg.policy = parse_policy(policy);
    if (seed_set) cfg.seed = seed;
    if (episodes > 0) cfg.episodes = episodes;

    SimContext ctx = make_context(cfg);
    const PolicyFactory factory = make_policy_factory(ctx, ctx.config.policy);
    const std::string name = ctx.config.policy.name();
    fs::create_directories(out_dir);

    std::vector<EpisodeLog> logs(static_cast<std::size_t>(ctx.config.episodes));
    parallel_for(ctx.config.episodes, workers, [&](long e) {
        logs[static_cast<std::size_t>(e)] = run_episode(
            ctx, factory, name, episode_seed(ctx.config.seed, static_cast<int>(e)));
    });

    double phi_sum = 0.0;
    for (std::size_t e = 0; e < logs.size(); ++e) {
        const fs::path file = fs::path(out_dir) / ("episode_" + std::to_string(e) + "_" +
                                                   sanitize(name) + ".csv");
        write_trajectory(logs[e], file.string());
        const double loss = ctx.config.mode == Mode::Control ? logs[e].phi_prime : logs[e].phi;
        phi_sum += loss;
        std::printf("episode %zu: loss %.8g mse %.8g sends %d losses %d%s\n", e, loss,
                    logs[e].total_mse, logs[e].sends, logs[e].losses,
                    logs[e].clamp_flagged ? " [voi grid clamped >1%]" : "");
    }
    std::printf("mean loss over %zu episode(s): %.8g\n", logs.size(), phi_sum / logs.size());
    return 0;
}

int cmd_compare(const std::string& scenario_ref, const std::string& policies, int episodes,
                std::uint64_t seed, bool seed_set, const std::string& out_dir, int workers) {
    ScenarioConfig cfg = load_scenario(scenario_ref);
    if (seed_set) cfg.seed = seed;
    if (episodes > 0) cfg.episodes = episodes;
    SimContext ctx = make_context(cfg);
    const std::vector<PolicySpec> specs = parse_policy_list(policies);
    const AggregateReport report = monte_carlo(ctx, specs, ctx.config.episodes, workers);
    print_report(report);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_report(report, (fs::path(out_dir) / "report.json").string());
    }
    return 0;
}

int cmd_solve_dp(const std::string& scenario_ref, const std::string& out_path) {
    ScenarioConfig cfg = load_scenario(scenario_ref);
    SimContext ctx = make_context(cfg);
    if (!ctx.supports_exact_dp())
        throw UnsupportedConfigError(
            "exact value function needs a scalar source and d <= 2; use voi-rollout");
    const ValueFunctionGrid grid = solve_dp(ctx.kernel, ctx.dp_options);
    write_value_table(grid, out_path);
    std::printf("value table written to %s (predicted expected loss %.8g)\n", out_path.c_str(),
                grid.expected_total_loss());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-triggered estimation and control over a lossy delayed channel"};
    app.require_subcommand(1);

    std::string scenario_ref, policy, policies, out_dir = "out", out_file;
    std::uint64_t seed = 0;
    int episodes = 0, workers = 0;

    CLI::App* validate_cmd = app.add_subcommand("validate", "check a scenario file");
    validate_cmd->add_option("scenario", scenario_ref, "scenario file (or 'spacecraft')")
        ->required();

    CLI::App* preset_cmd = app.add_subcommand("preset", "write a built-in scenario file");
    std::string preset_name;
    std::string preset_out = "spacecraft.json";
    preset_cmd->add_option("name", preset_name, "preset name")->required();
    preset_cmd->add_option("--out", preset_out, "output path");

    CLI::App* run_cmd = app.add_subcommand("run", "simulate episodes, write trajectories");
    run_cmd->add_option("--scenario", scenario_ref, "scenario file or preset name")->required();
    run_cmd->add_option("--policy", policy, "override the scenario's policy selector");
    CLI::Option* run_seed = run_cmd->add_option("--seed", seed, "master seed");
    run_cmd->add_option("--episodes", episodes, "episode count");
    run_cmd->add_option("--out", out_dir, "output directory (default: out)");
    run_cmd->add_option("--workers", workers, "worker threads (default: VOISIM_WORKERS or all)");

    CLI::App* compare_cmd = app.add_subcommand("compare", "evaluate policies on common seeds");
    compare_cmd->add_option("--scenario", scenario_ref, "scenario file or preset name")
        ->required();
    compare_cmd->add_option("--policies", policies, "comma-separated selectors")->required();
    compare_cmd->add_option("--episodes", episodes, "episode count");
    CLI::Option* cmp_seed = compare_cmd->add_option("--seed", seed, "master seed");
    compare_cmd->add_option("--out", out_dir, "report directory (default: out)");
    compare_cmd->add_option("--workers", workers, "worker threads");

    CLI::App* dp_cmd = app.add_subcommand("solve-dp", "tabulate the value function");
    dp_cmd->add_option("--scenario", scenario_ref, "scenario file or preset name")->required();
    dp_cmd->add_option("--out", out_file, "table path (default: value_table.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*validate_cmd) return cmd_validate(scenario_ref);
        if (*preset_cmd) return cmd_preset(preset_name, preset_out);
        if (*run_cmd)
            return cmd_run(scenario_ref, policy, seed, run_seed->count() > 0, episodes, out_dir,
                           workers);
        if (*compare_cmd)
            return cmd_compare(scenario_ref, policies, episodes, seed, cmp_seed->count() > 0,
                               out_dir, workers);
        if (*dp_cmd)
            return cmd_solve_dp(scenario_ref, out_file.empty() ? "value_table.csv" : out_file);
    } catch (const ValidationError& e) {
        for (const std::string& v : e.violations) std::cerr << v << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
