#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "voisim/model.hpp"

namespace voisim {

/// Everything recorded at one slot of an episode.
struct SlotRecord {
    double lambda = 0.0;
    int sigma = 0;
    std::optional<bool> gamma;  // erasure outcome of this slot's send, if any
    bool delivered = false;     // channel produced a payload this slot
    std::optional<double> voi;  // VoI policies only
    double mse = 0.0;           // (x - xhat)^T Lambda (x - xhat)
    Eigen::VectorXd x, xcheck, xhat;
    Eigen::VectorXd u;  // control mode only
};

/// Full per-episode trajectory plus the realized loss accounting.
struct EpisodeLog {
    Mode mode = Mode::Estimation;
    int horizon = 0;
    std::uint64_t seed = 0;
    std::string policy_name;

    std::vector<SlotRecord> slots;  // 0..T
    Eigen::VectorXd final_state;    // x(T+1), control mode

    double phi = 0.0;        // theta-weighted sends + weighted squared error
    double phi_prime = 0.0;  // control-mode loss (control episodes)
    double psi = 0.0;        // equivalent loss (control episodes)
    double total_mse = 0.0;
    int sends = 0;
    int losses = 0;

    long voi_evals = 0;
    long voi_clamped = 0;
    bool clamp_flagged = false;  // > 1% of evaluations clamped at grid edge
};

}  // namespace voisim
