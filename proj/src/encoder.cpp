#include "voisim/encoder.hpp"

#include <stdexcept>

namespace voisim {

namespace {

Eigen::MatrixXd symmetric_inverse(const Eigen::MatrixXd& m, const char* what) {
    Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
    if (llt.info() != Eigen::Success)
        throw std::runtime_error(std::string("filter schedule: singular ") + what);
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

FilterSchedule::FilterSchedule(const SourceModel& model) : horizon_(model.horizon) {
    const int T = model.horizon;
    M_.reserve(idx(T) + 1);
    O_.reserve(idx(T) + 1);
    K_.reserve(idx(T) + 1);
    S_.reserve(idx(T) + 1);
    Ssqrt_.reserve(idx(T) + 1);

    Eigen::MatrixXd M = model.M0;
    for (int k = 0; k <= T; ++k) {
        if (k > 0) {
            const Eigen::MatrixXd& A = model.A.at(k - 1);
            M = A * O_.back() * A.transpose() + model.W.at(k - 1);
            M = 0.5 * (M + M.transpose()).eval();
        }
        const Eigen::MatrixXd& C = model.C.at(k);
        const Eigen::MatrixXd Vinv = symmetric_inverse(model.V.at(k), "V");
        // Information form: invert M, add C^T V^-1 C, invert back.
        Eigen::MatrixXd O = symmetric_inverse(
            (symmetric_inverse(M, "M") + C.transpose() * Vinv * C).eval(), "information matrix");
        Eigen::MatrixXd K = O * C.transpose() * Vinv;
        Eigen::MatrixXd S = C * M * C.transpose() + model.V.at(k);
        S = 0.5 * (S + S.transpose()).eval();

        M_.push_back(M);
        O_.push_back(std::move(O));
        K_.push_back(std::move(K));
        Ssqrt_.push_back(symmetric_sqrt(S));
        S_.push_back(std::move(S));
    }
}

Encoder::Encoder(const SourceModel& model, const FilterSchedule& schedule, int delay, bool control)
    : model_(&model),
      schedule_(&schedule),
      delay_(delay),
      control_(control),
      m_(model.m0),
      replica_(model, delay, control),
      pending_(static_cast<std::size_t>(delay)) {
    if (delay < 1) throw std::invalid_argument("encoder: delay must be at least 1");
}

void Encoder::predict(const std::optional<Eigen::VectorXd>& u_prev) {
    if (!updated_) throw std::runtime_error("encoder: predict before first update");
    const int k = k_ + 1;
    if (k > model_->horizon) throw std::runtime_error("encoder: predicted past the horizon");
    m_ = model_->A.at(k - 1) * xcheck_;
    if (u_prev.has_value()) {
        if (model_->B.empty()) throw std::invalid_argument("encoder: input without B");
        m_ += model_->B.at(k - 1) * (*u_prev);
    }
    if (!m_.allFinite()) throw std::runtime_error("encoder: non-finite prediction");
    k_ = k;
    predicted_ = true;
    updated_ = false;
}

Eigen::VectorXd Encoder::update(const Eigen::VectorXd& y) {
    if (k_ > 0 && !predicted_) throw std::runtime_error("encoder: update before predict");
    if (updated_) throw std::runtime_error("encoder: duplicate update");
    const Eigen::MatrixXd& C = model_->C.at(k_);
    if (y.size() != C.rows()) throw std::invalid_argument("encoder: measurement dimension");
    Eigen::VectorXd nu = y - C * m_;
    xcheck_ = m_ + schedule_->gain(k_) * nu;
    if (!xcheck_.allFinite()) throw std::runtime_error("encoder: non-finite estimate");
    updated_ = true;
    predicted_ = false;

    if (delay_ > 1) {
        nu_buf_.push_back(nu);
        if (nu_buf_.size() > static_cast<std::size_t>(delay_ - 1)) nu_buf_.pop_front();
    }
    return nu;
}

void Encoder::note_lambda(double lambda) {
    lambda_buf_.push_back(lambda);
    if (lambda_buf_.size() > static_cast<std::size_t>(delay_)) lambda_buf_.pop_front();
}

void Encoder::apply_delivery(bool delivered) {
    ChannelOutput z;
    if (delivered) {
        const Pending& pkt = pending_[static_cast<std::size_t>((k_ - delay_) % delay_)];
        if (!pkt.sigma || pkt.send_time != k_ - delay_)
            throw std::runtime_error("encoder: delivery acknowledged for a slot with no send");
        z.delivered = true;
        z.payload = pkt.payload;
    }
    replica_.step(z);
}

SchedulerInput Encoder::scheduler_input() const {
    if (replica_.slot() != k_)
        throw std::runtime_error("encoder: scheduler input requested before the replica step");
    SchedulerInput s;
    s.k = k_;
    s.etilde = xcheck_ - replica_.xhat();

    const int n_nu = delay_ - 1;
    s.nu.reserve(static_cast<std::size_t>(n_nu));
    for (int i = 0; i < n_nu; ++i) {
        const int from_back = n_nu - 1 - i;
        if (from_back < static_cast<int>(nu_buf_.size()))
            s.nu.push_back(nu_buf_[nu_buf_.size() - 1 - static_cast<std::size_t>(from_back)]);
        else
            s.nu.push_back(Eigen::VectorXd::Zero(model_->output_dim));
    }
    s.lambda.assign(static_cast<std::size_t>(delay_), 0.0);
    for (int i = 0; i < delay_; ++i) {
        const int from_back = delay_ - 1 - i;
        if (from_back < static_cast<int>(lambda_buf_.size()))
            s.lambda[static_cast<std::size_t>(i)] =
                lambda_buf_[lambda_buf_.size() - 1 - static_cast<std::size_t>(from_back)];
    }
    s.sigma.assign(static_cast<std::size_t>(delay_ - 1), 0);
    for (int i = 0; i < delay_ - 1; ++i) {
        const int from_back = delay_ - 2 - i;
        if (from_back < static_cast<int>(sigma_buf_.size()))
            s.sigma[static_cast<std::size_t>(i)] =
                sigma_buf_[sigma_buf_.size() - 1 - static_cast<std::size_t>(from_back)];
    }
    return s;
}

void Encoder::record_decision(bool sigma) {
    Pending& pkt = pending_[static_cast<std::size_t>(k_ % delay_)];
    pkt.sigma = sigma;
    pkt.send_time = k_;
    if (sigma) pkt.payload = xcheck_;
    if (delay_ > 1) {
        sigma_buf_.push_back(sigma ? 1 : 0);
        if (sigma_buf_.size() > static_cast<std::size_t>(delay_ - 1)) sigma_buf_.pop_front();
    }
}

void Encoder::record_input(const Eigen::VectorXd& u) {
    replica_.push_input(u);
}

}  // namespace voisim
