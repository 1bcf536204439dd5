#include "voisim/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace voisim {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw std::invalid_argument("scenario." + path + ": " + message);
}

bool is_numeric(const json& j) { return j.is_number(); }

Eigen::MatrixXd parse_matrix(const json& j, const std::string& path) {
    if (is_numeric(j)) {
        Eigen::MatrixXd m(1, 1);
        m(0, 0) = j.get<double>();
        return m;
    }
    if (!j.is_array() || j.empty() || !j[0].is_array())
        fail(path, "expected a matrix (nested row-major arrays) or a scalar");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols) fail(path, "ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!is_numeric(j[r][c])) fail(path, "matrix entries must be numbers");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                j[r][c].get<double>();
        }
    }
    return m;
}

// One value broadcasts; a list is per-slot. Scalars (plain numbers) can be
// listed as a flat numeric array.
MatrixSeq parse_matrix_seq(const json& j, const std::string& path) {
    if (is_numeric(j)) return MatrixSeq(parse_matrix(j, path));
    if (!j.is_array() || j.empty()) fail(path, "expected a matrix or a list");
    if (j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
        std::vector<Eigen::MatrixXd> per_slot;
        per_slot.reserve(j.size());
        for (std::size_t i = 0; i < j.size(); ++i)
            per_slot.push_back(parse_matrix(j[i], path + "[" + std::to_string(i) + "]"));
        return MatrixSeq(std::move(per_slot));
    }
    if (j[0].is_array()) return MatrixSeq(parse_matrix(j, path));
    // Flat numeric array: a sequence of 1x1 matrices.
    std::vector<Eigen::MatrixXd> per_slot;
    per_slot.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        per_slot.push_back(parse_matrix(j[i], path + "[" + std::to_string(i) + "]"));
    return MatrixSeq(std::move(per_slot));
}

ScalarSeq parse_scalar_seq(const json& j, const std::string& path) {
    if (is_numeric(j)) return ScalarSeq(j.get<double>());
    if (!j.is_array() || j.empty()) fail(path, "expected a number or a list of numbers");
    std::vector<double> values;
    values.reserve(j.size());
    for (const json& v : j) {
        if (!is_numeric(v)) fail(path, "expected numbers");
        values.push_back(v.get<double>());
    }
    return ScalarSeq(std::move(values));
}

Eigen::VectorXd parse_vector(const json& j, const std::string& path) {
    if (is_numeric(j)) return Eigen::VectorXd::Constant(1, j.get<double>());
    if (!j.is_array()) fail(path, "expected a vector");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!is_numeric(j[i])) fail(path, "vector entries must be numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json matrix_seq_to_json(const MatrixSeq& seq) {
    if (seq.constant()) return matrix_to_json(seq.raw().front());
    json list = json::array();
    for (const Eigen::MatrixXd& m : seq.raw()) list.push_back(matrix_to_json(m));
    return list;
}

json scalar_seq_to_json(const ScalarSeq& seq) {
    if (seq.constant()) return json(seq.raw().front());
    return json(seq.raw());
}

json vector_to_json(const Eigen::VectorXd& v) {
    json list = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) list.push_back(v[i]);
    return list;
}

}  // namespace

ScenarioConfig scenario_from_json(const std::string& text) {
    json root = json::parse(text, nullptr, true, true);  // allow comments
    ScenarioConfig cfg;

    if (!root.contains("horizon") || !root["horizon"].is_number_integer())
        fail("horizon", "required integer");
    cfg.source.horizon = root["horizon"].get<int>();

    const std::string mode = root.value("mode", std::string("estimation"));
    if (mode == "estimation") {
        cfg.mode = Mode::Estimation;
    } else if (mode == "control") {
        cfg.mode = Mode::Control;
    } else {
        fail("mode", "must be 'estimation' or 'control'");
    }

    if (!root.contains("source") || !root["source"].is_object()) fail("source", "required object");
    const json& src = root["source"];
    auto need = [&](const json& obj, const char* key, const std::string& path) -> const json& {
        if (!obj.contains(key)) fail(path, "missing");
        return obj[key];
    };
    cfg.source.A = parse_matrix_seq(need(src, "A", "source.A"), "source.A");
    cfg.source.C = parse_matrix_seq(need(src, "C", "source.C"), "source.C");
    cfg.source.W = parse_matrix_seq(need(src, "W", "source.W"), "source.W");
    cfg.source.V = parse_matrix_seq(need(src, "V", "source.V"), "source.V");
    if (src.contains("B")) cfg.source.B = parse_matrix_seq(src["B"], "source.B");
    cfg.source.m0 = parse_vector(need(src, "m0", "source.m0"), "source.m0");
    cfg.source.M0 = parse_matrix(need(src, "M0", "source.M0"), "source.M0");
    cfg.source.state_dim = static_cast<int>(cfg.source.A.at(0).rows());
    cfg.source.output_dim = static_cast<int>(cfg.source.C.at(0).rows());
    cfg.source.input_dim = cfg.source.B.empty() ? 0 : static_cast<int>(cfg.source.B.at(0).cols());

    if (!root.contains("channel") || !root["channel"].is_object())
        fail("channel", "required object");
    const json& ch = root["channel"];
    if (!ch.contains("delay") || !ch["delay"].is_number_integer())
        fail("channel.delay", "required integer");
    cfg.channel.delay = ch["delay"].get<int>();
    const json& lam = need(ch, "lambda", "channel.lambda");
    if (lam.is_object()) {
        LambdaChain chain;
        chain.states = parse_vector(need(lam, "states", "channel.lambda.states"),
                                    "channel.lambda.states");
        chain.transition = parse_matrix(need(lam, "transition", "channel.lambda.transition"),
                                        "channel.lambda.transition");
        if (lam.contains("initial")) {
            chain.initial = parse_vector(lam["initial"], "channel.lambda.initial");
        } else {
            chain.initial =
                Eigen::VectorXd::Constant(chain.states.size(), 1.0 / chain.states.size());
        }
        cfg.channel.lambda_chain = std::move(chain);
    } else {
        cfg.channel.lambda_seq = parse_scalar_seq(lam, "channel.lambda");
    }

    if (!root.contains("cost") || !root["cost"].is_object()) fail("cost", "required object");
    const json& cost = root["cost"];
    cfg.cost.theta = parse_scalar_seq(need(cost, "theta", "cost.theta"), "cost.theta");
    if (cost.contains("Lambda")) cfg.cost.Lambda = parse_matrix_seq(cost["Lambda"], "cost.Lambda");
    if (cost.contains("Q")) cfg.cost.Q = parse_matrix_seq(cost["Q"], "cost.Q");
    if (cost.contains("R")) cfg.cost.R = parse_matrix_seq(cost["R"], "cost.R");

    if (root.contains("policy")) {
        if (!root["policy"].is_string()) fail("policy", "expected a selector string");
        cfg.policy = parse_policy(root["policy"].get<std::string>());
    }
    cfg.seed = root.value("seed", 0ULL);
    cfg.episodes = root.value("episodes", 1);
    return cfg;
}

std::string scenario_to_json(const ScenarioConfig& cfg, int indent) {
    json root;
    root["horizon"] = cfg.source.horizon;
    root["mode"] = cfg.mode == Mode::Control ? "control" : "estimation";
    json src;
    src["A"] = matrix_seq_to_json(cfg.source.A);
    if (!cfg.source.B.empty()) src["B"] = matrix_seq_to_json(cfg.source.B);
    src["C"] = matrix_seq_to_json(cfg.source.C);
    src["W"] = matrix_seq_to_json(cfg.source.W);
    src["V"] = matrix_seq_to_json(cfg.source.V);
    src["m0"] = vector_to_json(cfg.source.m0);
    src["M0"] = matrix_to_json(cfg.source.M0);
    root["source"] = std::move(src);
    json ch;
    ch["delay"] = cfg.channel.delay;
    if (cfg.channel.chain()) {
        json chain;
        chain["states"] = vector_to_json(cfg.channel.lambda_chain->states);
        chain["transition"] = matrix_to_json(cfg.channel.lambda_chain->transition);
        chain["initial"] = vector_to_json(cfg.channel.lambda_chain->initial);
        ch["lambda"] = std::move(chain);
    } else {
        ch["lambda"] = scalar_seq_to_json(cfg.channel.lambda_seq);
    }
    root["channel"] = std::move(ch);
    json cost;
    cost["theta"] = scalar_seq_to_json(cfg.cost.theta);
    if (!cfg.cost.Lambda.empty()) cost["Lambda"] = matrix_seq_to_json(cfg.cost.Lambda);
    if (!cfg.cost.Q.empty()) cost["Q"] = matrix_seq_to_json(cfg.cost.Q);
    if (!cfg.cost.R.empty()) cost["R"] = matrix_seq_to_json(cfg.cost.R);
    root["cost"] = std::move(cost);
    root["policy"] = cfg.policy.name();
    root["seed"] = cfg.seed;
    root["episodes"] = cfg.episodes;
    return root.dump(indent);
}

ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return scenario_from_json(buffer.str());
}

void save_scenario_file(const ScenarioConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file: " + path);
    out << scenario_to_json(config) << "\n";
    if (!out) throw std::runtime_error("failed writing scenario file: " + path);
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void write_trajectory(const EpisodeLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
    const Eigen::Index n = log.slots.empty() ? 0 : log.slots.front().x.size();
    const Eigen::Index p = log.slots.empty() ? 0 : log.slots.front().u.size();

    out << "k,sigma,gamma,delivered,lambda,voi,mse";
    for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",xcheck" << i;
    for (Eigen::Index i = 0; i < n; ++i) out << ",xhat" << i;
    for (Eigen::Index i = 0; i < p; ++i) out << ",u" << i;
    out << "\n";

    for (std::size_t k = 0; k < log.slots.size(); ++k) {
        const SlotRecord& slot = log.slots[k];
        out << k << "," << slot.sigma << ",";
        if (slot.gamma) out << (*slot.gamma ? 1 : 0);
        out << "," << (slot.delivered ? 1 : 0) << "," << fmt17(slot.lambda) << ",";
        if (slot.voi) out << fmt17(*slot.voi);
        out << "," << fmt17(slot.mse);
        for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt17(slot.x[i]);
        for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt17(slot.xcheck[i]);
        for (Eigen::Index i = 0; i < n; ++i) out << "," << fmt17(slot.xhat[i]);
        for (Eigen::Index i = 0; i < p; ++i) out << "," << fmt17(slot.u[i]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing trajectory file: " + path);
}

EpisodeLog read_trajectory(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trajectory file: " + path);

    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    auto count_prefix = [&header](const std::string& prefix) {
        int c = 0;
        for (const std::string& h : header) {
            if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) continue;
            bool digits = true;
            for (std::size_t i = prefix.size(); i < h.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(h[i]));
            if (digits) ++c;
        }
        return c;
    };
    const int n = count_prefix("x");
    const int p = count_prefix("u");

    EpisodeLog log;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        cells.resize(header.size());
        SlotRecord slot;
        std::size_t at = 1;
        slot.sigma = std::stoi(cells[at++]);
        if (!cells[at].empty()) slot.gamma = cells[at] != "0";
        ++at;
        slot.delivered = cells[at++] == "1";
        slot.lambda = std::stod(cells[at++]);
        if (!cells[at].empty()) slot.voi = std::stod(cells[at]);
        ++at;
        slot.mse = std::stod(cells[at++]);
        slot.x.resize(n);
        for (int i = 0; i < n; ++i) slot.x[i] = std::stod(cells[at++]);
        slot.xcheck.resize(n);
        for (int i = 0; i < n; ++i) slot.xcheck[i] = std::stod(cells[at++]);
        slot.xhat.resize(n);
        for (int i = 0; i < n; ++i) slot.xhat[i] = std::stod(cells[at++]);
        slot.u.resize(p);
        for (int i = 0; i < p; ++i) slot.u[i] = std::stod(cells[at++]);
        if (slot.sigma) {
            ++log.sends;
            if (slot.gamma && !*slot.gamma) ++log.losses;
        }
        log.total_mse += slot.mse;
        log.slots.push_back(std::move(slot));
    }
    log.horizon = static_cast<int>(log.slots.size()) - 1;
    return log;
}

std::string report_to_json(const AggregateReport& report, int indent) {
    json root;
    root["mode"] = report.mode == Mode::Control ? "control" : "estimation";
    root["loss_metric"] = report.mode == Mode::Control ? "phi_prime" : "phi";
    root["seed"] = report.master_seed;
    root["episodes"] = report.policies.empty() ? 0 : report.policies.front().episodes;
    root["episode_seeds"] = report.seeds;
    json policies = json::array();
    for (const PolicyStats& s : report.policies) {
        json p;
        p["policy"] = s.name;
        p["episodes"] = s.episodes;
        p["loss_mean"] = s.loss_mean;
        p["loss_se"] = s.loss_se;
        p["mse_mean"] = s.mse_mean;
        p["mse_se"] = s.mse_se;
        p["sends_mean"] = s.sends_mean;
        p["losses_mean"] = s.losses_mean;
        p["loss_fraction"] = s.loss_fraction;
        p["clamp_flagged_episodes"] = s.clamp_flagged_episodes;
        p["loss"] = s.loss;
        policies.push_back(std::move(p));
    }
    root["policies"] = std::move(policies);
    json pairs = json::array();
    for (const PairDiff& d : report.pairs) {
        json p;
        p["a"] = d.a;
        p["b"] = d.b;
        p["mean_diff"] = d.mean_diff;
        p["se_diff"] = d.se_diff;
        pairs.push_back(std::move(p));
    }
    root["pairs"] = std::move(pairs);
    return root.dump(indent);
}

void write_report(const AggregateReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << report_to_json(report) << "\n";
    if (!out) throw std::runtime_error("failed writing report file: " + path);
}

void write_value_table(const ValueFunctionGrid& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write value table: " + path);
    const int d = grid.delay();
    const bool chain = grid.lambda_is_chain();
    out << "k,etilde";
    if (d == 2) out << ",nu";
    if (chain) {
        if (d == 2) out << ",lambda_prev";
        out << ",lambda";
    }
    if (d == 2) out << ",sigma_prev";
    out << ",value,voi,transmit\n";

    const int S = grid.num_lambda();
    for (int k = 0; k <= grid.last_decision_slot(); ++k) {
        const Eigen::ArrayXd& value = grid.value_slab(k);
        const Eigen::ArrayXd& voi = grid.voi_slab(k);
        const std::vector<std::uint8_t>& transmit = grid.transmit_slab(k);
        for (int ei = 0; ei < grid.e_axis().n; ++ei) {
            const int nv = d == 2 ? grid.nu_axis().n : 1;
            for (int vi = 0; vi < nv; ++vi) {
                for (int lp = 0; lp < (d == 2 ? S : 1); ++lp) {
                    for (int lc = 0; lc < S; ++lc) {
                        for (int sp = 0; sp < (d == 2 ? 2 : 1); ++sp) {
                            const std::size_t at = grid.flat_index(ei, vi, lp, lc, sp);
                            out << k << "," << fmt17(grid.e_axis().node(ei));
                            if (d == 2) out << "," << fmt17(grid.nu_axis().node(vi));
                            if (chain) {
                                if (d == 2) out << "," << fmt17(grid.lambda_state(lp));
                                out << "," << fmt17(grid.lambda_state(lc));
                            }
                            if (d == 2) out << "," << sp;
                            out << "," << fmt17(value[at]) << "," << fmt17(voi[at]) << ","
                                << static_cast<int>(transmit[at]) << "\n";
                        }
                    }
                }
            }
        }
    }
    if (!out) throw std::runtime_error("failed writing value table: " + path);
}

}  // namespace voisim
