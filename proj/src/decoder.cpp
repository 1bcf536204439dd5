#include "voisim/decoder.hpp"

#include <stdexcept>

namespace voisim {

Decoder::Decoder(const SourceModel& model, int delay, bool control)
    : model_(&model),
      delay_(delay),
      control_(control),
      u_ring_(static_cast<std::size_t>(delay)),
      u_slot_(static_cast<std::size_t>(delay), -1) {
    if (delay < 1) throw std::invalid_argument("decoder: delay must be at least 1");
}

const Eigen::VectorXd& Decoder::input_at(int t) const {
    const std::size_t i = static_cast<std::size_t>(t % delay_);
    if (u_slot_[i] != t) throw std::runtime_error("decoder: input history is missing u(k)");
    return u_ring_[i];
}

void Decoder::step(const ChannelOutput& z) {
    const int k = k_ + 1;
    if (k == 0) {
        xhat_ = model_->m0;
        k_ = 0;
        return;
    }
    if (z.delivered) {
        if (k < delay_) throw std::runtime_error("decoder: delivery before slot d");
        // Roll the payload forward d steps through the known dynamics,
        // folding in the applied inputs along the way.
        Eigen::VectorXd v = z.payload;
        for (int s = k - delay_; s <= k - 1; ++s) {
            v = model_->A.at(s) * v;
            if (control_) v += model_->B.at(s) * input_at(s);
        }
        xhat_ = std::move(v);
    } else {
        Eigen::VectorXd v = model_->A.at(k - 1) * xhat_;
        if (control_) v += model_->B.at(k - 1) * input_at(k - 1);
        xhat_ = std::move(v);
    }
    k_ = k;
}

void Decoder::push_input(const Eigen::VectorXd& u) {
    if (!control_) throw std::runtime_error("decoder: inputs only exist in control mode");
    const std::size_t i = static_cast<std::size_t>(k_ % delay_);
    u_ring_[i] = u;
    u_slot_[i] = k_;
}

}  // namespace voisim
