#include "voisim/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace voisim {

namespace {

constexpr double kPdTol = 1e-12;

double symmetric_eigen_min(const Eigen::MatrixXd& m, double* eigen_max = nullptr) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                      Eigen::EigenvaluesOnly);
    if (eigen_max) *eigen_max = es.eigenvalues().maxCoeff();
    return es.eigenvalues().minCoeff();
}

bool is_symmetric(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale;
}

class Checker {
  public:
    explicit Checker(std::vector<std::string>& out) : out_(out) {}

    void fail(const std::string& path, const std::string& message) {
        out_.push_back(path + ": " + message);
    }

    // Sequence length must be 1 (broadcast) or `expected`.
    void check_length(const std::string& path, std::size_t stored, std::size_t expected) {
        if (stored != 1 && stored != expected) {
            std::ostringstream os;
            os << "sequence must hold one entry or " << expected << " entries, got " << stored;
            fail(path, os.str());
        }
    }

    void check_dims(const std::string& path, const MatrixSeq& seq, Eigen::Index rows,
                    Eigen::Index cols) {
        for (std::size_t i = 0; i < seq.stored(); ++i) {
            const Eigen::MatrixXd& m = seq.raw()[i];
            if (m.rows() != rows || m.cols() != cols) {
                std::ostringstream os;
                os << "expected " << rows << "x" << cols << " matrix, got " << m.rows() << "x"
                   << m.cols() << " at entry " << i;
                fail(path, os.str());
                return;
            }
        }
    }

    void check_spd(const std::string& path, const MatrixSeq& seq) {
        for (std::size_t i = 0; i < seq.stored(); ++i) {
            const Eigen::MatrixXd& m = seq.raw()[i];
            if (!is_symmetric(m)) {
                fail(path, "not symmetric at entry " + std::to_string(i));
                return;
            }
            if (!is_positive_definite(m)) {
                fail(path, "not positive definite at entry " + std::to_string(i));
                return;
            }
        }
    }

    void check_psd(const std::string& path, const MatrixSeq& seq) {
        for (std::size_t i = 0; i < seq.stored(); ++i) {
            const Eigen::MatrixXd& m = seq.raw()[i];
            if (!is_symmetric(m)) {
                fail(path, "not symmetric at entry " + std::to_string(i));
                return;
            }
            if (!is_positive_semidefinite(m)) {
                fail(path, "not positive semidefinite at entry " + std::to_string(i));
                return;
            }
        }
    }

  private:
    std::vector<std::string>& out_;
};

}  // namespace

bool is_positive_definite(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    double eig_max = 0.0;
    const double eig_min = symmetric_eigen_min(m, &eig_max);
    return eig_min > kPdTol * std::max(eig_max, 1.0);
}

bool is_positive_semidefinite(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    double eig_max = 0.0;
    const double eig_min = symmetric_eigen_min(m, &eig_max);
    return eig_min >= -kPdTol * std::max(eig_max, 1.0);
}

std::string PolicySpec::name() const {
    switch (kind) {
        case PolicyKind::VoiDp: return "voi-dp";
        case PolicyKind::VoiRollout: return "voi-rollout";
        case PolicyKind::VoiAuto: return "voi";
        case PolicyKind::Periodic: {
            std::ostringstream os;
            os << "periodic:" << period;
            if (phase != 0) os << ":" << phase;
            return os.str();
        }
        case PolicyKind::Random: {
            std::ostringstream os;
            os << "random:" << rate;
            return os.str();
        }
        case PolicyKind::Always: return "always";
        case PolicyKind::Never: return "never";
    }
    return "?";
}

PolicySpec parse_policy(const std::string& text) {
    PolicySpec spec;
    std::string head = text;
    std::vector<std::string> args;
    if (auto pos = text.find(':'); pos != std::string::npos) {
        head = text.substr(0, pos);
        std::string rest = text.substr(pos + 1);
        std::size_t start = 0;
        while (start <= rest.size()) {
            auto next = rest.find(':', start);
            if (next == std::string::npos) {
                args.push_back(rest.substr(start));
                break;
            }
            args.push_back(rest.substr(start, next - start));
            start = next + 1;
        }
    }
    auto want_args = [&](std::size_t lo, std::size_t hi) {
        if (args.size() < lo || args.size() > hi)
            throw std::invalid_argument("policy '" + text + "': wrong number of parameters");
    };
    try {
        if (head == "voi-dp") {
            spec.kind = PolicyKind::VoiDp;
            want_args(0, 0);
        } else if (head == "voi-rollout") {
            spec.kind = PolicyKind::VoiRollout;
            want_args(0, 0);
        } else if (head == "voi") {
            spec.kind = PolicyKind::VoiAuto;
            want_args(0, 0);
        } else if (head == "periodic") {
            spec.kind = PolicyKind::Periodic;
            want_args(1, 2);
            spec.period = std::stoi(args.at(0));
            spec.phase = args.size() > 1 ? std::stoi(args.at(1)) : 0;
        } else if (head == "random") {
            spec.kind = PolicyKind::Random;
            want_args(1, 1);
            spec.rate = std::stod(args.at(0));
        } else if (head == "always") {
            spec.kind = PolicyKind::Always;
            want_args(0, 0);
        } else if (head == "never") {
            spec.kind = PolicyKind::Never;
            want_args(0, 0);
        } else {
            throw std::invalid_argument("unknown policy selector '" + text + "'");
        }
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("policy '" + text + "': malformed parameter");
    }
    return spec;
}

std::vector<std::string> validate(const ScenarioConfig& config) {
    std::vector<std::string> violations;
    Checker check(violations);

    const SourceModel& src = config.source;
    const int T = src.horizon;
    const std::size_t len = static_cast<std::size_t>(T) + 1;

    if (T < 1) check.fail("source.horizon", "horizon must be at least 1");
    if (src.state_dim < 1) check.fail("source.state_dim", "state dimension must be positive");
    if (src.output_dim < 1) check.fail("source.output_dim", "output dimension must be positive");
    const bool control = config.mode == Mode::Control;
    if (control && src.input_dim < 1)
        check.fail("source.input_dim", "control mode requires a positive input dimension");
    if (!violations.empty()) return violations;  // dimension checks below need sane sizes

    const Eigen::Index n = src.state_dim, m = src.output_dim, p = src.input_dim;

    if (src.A.empty()) check.fail("source.A", "missing");
    if (src.C.empty()) check.fail("source.C", "missing");
    if (src.W.empty()) check.fail("source.W", "missing");
    if (src.V.empty()) check.fail("source.V", "missing");
    if (control && src.B.empty()) check.fail("source.B", "missing in control mode");
    if (!violations.empty()) return violations;

    check.check_length("source.A", src.A.stored(), len);
    check.check_length("source.C", src.C.stored(), len);
    check.check_length("source.W", src.W.stored(), len);
    check.check_length("source.V", src.V.stored(), len);
    check.check_dims("source.A", src.A, n, n);
    check.check_dims("source.C", src.C, m, n);
    check.check_dims("source.W", src.W, n, n);
    check.check_dims("source.V", src.V, m, m);
    if (!src.B.empty()) {
        check.check_length("source.B", src.B.stored(), len);
        check.check_dims("source.B", src.B, n, p);
    }
    if (src.m0.size() != n) check.fail("source.m0", "initial mean has wrong dimension");
    if (src.M0.rows() != n || src.M0.cols() != n) {
        check.fail("source.M0", "initial covariance has wrong dimension");
    } else if (!is_symmetric(src.M0) || !is_positive_definite(src.M0)) {
        check.fail("source.M0", "not positive definite");
    }
    check.check_spd("source.W", src.W);
    check.check_spd("source.V", src.V);

    const ChannelSpec& ch = config.channel;
    if (ch.delay < 1 || ch.delay > T)
        check.fail("channel.delay", "delay must satisfy 1 <= d <= T");
    if (ch.chain()) {
        const LambdaChain& chain = *ch.lambda_chain;
        const Eigen::Index s = chain.states.size();
        if (s < 1) check.fail("channel.lambda.states", "chain needs at least one state");
        for (Eigen::Index i = 0; i < s; ++i) {
            if (chain.states[i] < 0.0 || chain.states[i] > 1.0) {
                check.fail("channel.lambda.states", "loss probability outside [0, 1]");
                break;
            }
        }
        if (chain.transition.rows() != s || chain.transition.cols() != s) {
            check.fail("channel.lambda.transition", "transition matrix has wrong dimension");
        } else {
            for (Eigen::Index i = 0; i < s; ++i) {
                if (chain.transition.row(i).minCoeff() < 0.0 ||
                    std::abs(chain.transition.row(i).sum() - 1.0) > 1e-12) {
                    check.fail("channel.lambda.transition",
                               "row " + std::to_string(i) + " is not a distribution");
                }
            }
        }
        if (chain.initial.size() != s) {
            check.fail("channel.lambda.initial", "initial distribution has wrong dimension");
        } else if (chain.initial.minCoeff() < 0.0 ||
                   std::abs(chain.initial.sum() - 1.0) > 1e-12) {
            check.fail("channel.lambda.initial", "not a distribution");
        }
    } else {
        if (ch.lambda_seq.empty()) {
            check.fail("channel.lambda", "missing");
        } else {
            check.check_length("channel.lambda", ch.lambda_seq.stored(), len);
            for (double v : ch.lambda_seq.raw()) {
                if (v < 0.0 || v > 1.0) {
                    check.fail("channel.lambda", "loss probability outside [0, 1]");
                    break;
                }
            }
        }
    }

    const CostSpec& cost = config.cost;
    if (cost.theta.empty()) {
        check.fail("cost.theta", "missing");
    } else {
        check.check_length("cost.theta", cost.theta.stored(), len);
        for (double v : cost.theta.raw()) {
            if (v < 0.0) {
                check.fail("cost.theta", "communication price must be nonnegative");
                break;
            }
        }
    }
    if (config.mode == Mode::Estimation) {
        if (cost.Lambda.empty()) {
            check.fail("cost.Lambda", "missing in estimation mode");
        } else {
            check.check_length("cost.Lambda", cost.Lambda.stored(), len);
            check.check_dims("cost.Lambda", cost.Lambda, n, n);
            check.check_spd("cost.Lambda", cost.Lambda);
        }
    } else {
        if (cost.Q.empty()) {
            check.fail("cost.Q", "missing in control mode");
        } else {
            check.check_length("cost.Q", cost.Q.stored(), len + 1);  // Q(T+1) must exist
            check.check_dims("cost.Q", cost.Q, n, n);
            check.check_psd("cost.Q", cost.Q);
        }
        if (cost.R.empty()) {
            check.fail("cost.R", "missing in control mode");
        } else {
            check.check_length("cost.R", cost.R.stored(), len);
            check.check_dims("cost.R", cost.R, p, p);
            check.check_spd("cost.R", cost.R);
        }
        if (!cost.Lambda.empty()) {
            check.check_length("cost.Lambda", cost.Lambda.stored(), len);
            check.check_dims("cost.Lambda", cost.Lambda, n, n);
        }
    }

    const PolicySpec& pol = config.policy;
    if (pol.kind == PolicyKind::Periodic && pol.period < 1)
        check.fail("policy.period", "period must be at least 1");
    if (pol.kind == PolicyKind::Random && (pol.rate < 0.0 || pol.rate > 1.0))
        check.fail("policy.rate", "rate must lie in [0, 1]");
    if (pol.kind == PolicyKind::VoiDp) {
        if (src.state_dim != 1 || src.output_dim != 1)
            check.fail("policy", "voi-dp requires a scalar source (n = m = 1); use voi-rollout");
        if (ch.delay > 2)
            check.fail("policy", "voi-dp requires d <= 2; use voi-rollout");
    }
    if (config.episodes < 1) check.fail("episodes", "episode count must be at least 1");

    return violations;
}

ScenarioConfig spacecraft_scenario() {
    ScenarioConfig cfg;
    const int T = 1000;

    SourceModel& src = cfg.source;
    src.horizon = T;
    src.state_dim = 3;
    src.output_dim = 3;
    src.input_dim = 0;

    Eigen::MatrixXd A(3, 3);
    A << 0.4258, 0.4258, 0.0,  //
        0.4258, 0.4258, 0.0,   //
        0.0, 0.0, 1.0;
    src.A = MatrixSeq(A);

    Eigen::VectorXd w_diag(3);
    w_diag << 0.2245, 0.2245, 0.0025;
    const Eigen::MatrixXd W = 1e-6 * w_diag.asDiagonal().toDenseMatrix();
    src.W = MatrixSeq(W);

    src.C = MatrixSeq(Eigen::MatrixXd::Identity(3, 3));
    src.V = MatrixSeq(1e-3 * Eigen::MatrixXd::Identity(3, 3));

    src.m0 = Eigen::Vector3d(0.0, 0.0, 2.0 * std::numbers::pi);
    src.M0 = 10.0 * W;

    cfg.channel.delay = 2;
    cfg.channel.lambda_seq = ScalarSeq(0.3);

    std::vector<double> theta(static_cast<std::size_t>(T) + 1);
    for (int k = 0; k <= T; ++k)
        theta[static_cast<std::size_t>(k)] = (k <= T / 2) ? 8e-6 : 6e-6;
    cfg.cost.theta = ScalarSeq(std::move(theta));
    cfg.cost.Lambda = MatrixSeq(Eigen::MatrixXd::Identity(3, 3));

    cfg.mode = Mode::Estimation;
    cfg.policy.kind = PolicyKind::VoiAuto;
    cfg.seed = 1;
    cfg.episodes = 1;
    return cfg;
}

}  // namespace voisim
