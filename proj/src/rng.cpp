#include "voisim/rng.hpp"

#include <cmath>
#include <numbers>

namespace voisim {

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view stream_id)
    : engine_(mix64(seed ^ mix64(fnv1a(stream_id)))) {}

double RngStream::uniform01() {
    ++draws_;
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    // Box-Muller, cosine branch only: fixed consumption of two uniforms.
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd RngStream::normals(Eigen::Index n) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = normal();
    return z;
}

Eigen::VectorXd RngStream::gaussian(const Eigen::MatrixXd& sqrt_cov) {
    return sqrt_cov * normals(sqrt_cov.cols());
}

}  // namespace voisim
