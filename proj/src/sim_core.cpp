#include "voisim/sim_core.hpp"

#include <stdexcept>

namespace voisim {

namespace {

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

GaussianSampler::GaussianSampler(const MatrixSeq& cov) {
    sqrts_.reserve(cov.stored());
    for (const Eigen::MatrixXd& m : cov.raw()) sqrts_.push_back(symmetric_sqrt(m));
}

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
    sqrts_.push_back(symmetric_sqrt(cov));
}

Eigen::VectorXd GaussianSampler::sample(int k, RngStream& rng) const {
    const Eigen::MatrixXd& s =
        sqrts_.size() == 1 ? sqrts_.front() : sqrts_.at(static_cast<std::size_t>(k));
    return rng.gaussian(s);
}

SourceSimulator::SourceSimulator(const SourceModel& model)
    : model_(&model), w_sampler_(model.W), v_sampler_(model.V), m0_sampler_(model.M0) {}

Eigen::VectorXd SourceSimulator::initial_state(RngStream& init) const {
    return model_->m0 + m0_sampler_.sample(0, init);
}

void SourceSimulator::step(SourceState& s, const std::optional<Eigen::VectorXd>& u,
                           RngStream& process) const {
    if (s.k >= model_->horizon) throw std::runtime_error("step_source: past the horizon");
    const int k = s.k;
    if (s.x.size() != model_->state_dim)
        throw std::invalid_argument("step_source: state dimension mismatch");
    Eigen::VectorXd next = model_->A.at(k) * s.x;
    if (u.has_value()) {
        if (model_->B.empty()) throw std::invalid_argument("step_source: input without B");
        if (u->size() != model_->input_dim)
            throw std::invalid_argument("step_source: input dimension mismatch");
        next += model_->B.at(k) * (*u);
    } else if (!model_->B.empty() && model_->input_dim > 0) {
        throw std::invalid_argument("step_source: missing input in control mode");
    }
    next += w_sampler_.sample(k, process);
    s.x = std::move(next);
    s.k = k + 1;
}

Eigen::VectorXd SourceSimulator::observe(const SourceState& s, RngStream& measurement) const {
    return model_->C.at(s.k) * s.x + v_sampler_.sample(s.k, measurement);
}

ChannelPipeline::ChannelPipeline(const ChannelSpec& spec, int horizon, RngStream erasure,
                                 RngStream lambda)
    : spec_(&spec),
      horizon_(horizon),
      ring_(static_cast<std::size_t>(spec.delay)),
      erasure_(std::move(erasure)),
      lambda_(std::move(lambda)) {
    if (spec.delay < 1) throw std::invalid_argument("channel delay must be at least 1");
    if (spec.chain()) {
        // Initial chain state from the initial distribution.
        const Eigen::VectorXd& init = spec.lambda_chain->initial;
        const double u = lambda_.uniform01();
        double acc = 0.0;
        chain_state_ = static_cast<int>(init.size()) - 1;
        for (Eigen::Index i = 0; i < init.size(); ++i) {
            acc += init[i];
            if (u < acc) {
                chain_state_ = static_cast<int>(i);
                break;
            }
        }
    }
}

void ChannelPipeline::require_phase(Phase expected, const char* op) const {
    if (phase_ != expected)
        throw std::runtime_error(std::string("channel: ") + op + " called out of slot order");
}

double ChannelPipeline::lambda_step() {
    require_phase(Phase::Lambda, "lambda_step");
    if (spec_->chain()) {
        const LambdaChain& chain = *spec_->lambda_chain;
        if (k_ > 0) {
            const double u = lambda_.uniform01();
            double acc = 0.0;
            int next = static_cast<int>(chain.states.size()) - 1;
            for (Eigen::Index j = 0; j < chain.states.size(); ++j) {
                acc += chain.transition(chain_state_, j);
                if (u < acc) {
                    next = static_cast<int>(j);
                    break;
                }
            }
            chain_state_ = next;
        }
        lambda_current_ = chain.states[chain_state_];
    } else {
        lambda_current_ = spec_->lambda_seq.at(k_);
    }
    phase_ = Phase::Transfer;
    return lambda_current_;
}

ChannelOutput ChannelPipeline::receive() const {
    require_phase(Phase::Transfer, "receive");
    ChannelOutput out;
    if (k_ < spec_->delay) return out;  // z(0..d-1) empty by convention
    const InFlight& slot = ring_[static_cast<std::size_t>((k_ - spec_->delay) % spec_->delay)];
    if (slot.sent && slot.send_time == k_ - spec_->delay && !slot.erased) {
        out.delivered = true;
        out.payload = slot.payload;
    }
    return out;
}

std::optional<Ack> ChannelPipeline::ack() const {
    require_phase(Phase::Transfer, "ack");
    if (k_ < spec_->delay) return std::nullopt;
    const InFlight& slot = ring_[static_cast<std::size_t>((k_ - spec_->delay) % spec_->delay)];
    if (!slot.sent || slot.send_time != k_ - spec_->delay) return std::nullopt;
    return Ack{slot.send_time, !slot.erased};
}

std::optional<bool> ChannelPipeline::send(bool sigma, const Eigen::VectorXd& payload) {
    require_phase(Phase::Transfer, "send");
    phase_ = Phase::Send;
    // One fate draw per slot regardless of sigma keeps erasure outcomes
    // aligned across runs with different transmit patterns.
    const double u = erasure_.uniform01();
    const bool erased = u < lambda_current_;
    InFlight& slot = ring_[static_cast<std::size_t>(k_ % spec_->delay)];
    if (!sigma) {
        slot.sent = false;
        slot.send_time = k_;
        return std::nullopt;
    }
    slot.sent = true;
    slot.erased = erased;
    slot.send_time = k_;
    slot.payload = payload;
    return !erased;
}

void ChannelPipeline::end_slot() {
    require_phase(Phase::Send, "end_slot");
    if (k_ > horizon_) throw std::runtime_error("channel: stepped past the horizon");
    ++k_;
    phase_ = Phase::Lambda;
}

}  // namespace voisim
