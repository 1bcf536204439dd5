#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace voisim {

/// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Seed for episode `index` under a master seed. Episodes are independent
/// units; the same (seed, index) always maps to the same episode stream.
constexpr std::uint64_t episode_seed(std::uint64_t master_seed, int index) {
    return mix64(mix64(master_seed) + static_cast<std::uint64_t>(index));
}

/// One named random stream. Identical (seed, stream_id) pairs reproduce the
/// exact draw sequence; distinct stream_ids decorrelate via seed mixing.
///
/// Normals use an explicit Box-Muller transform with a fixed two-draw cost so
/// the engine consumption per call never depends on earlier draws.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::string_view stream_id);

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01();

    /// Standard normal (one per call, two engine draws).
    double normal();

    /// n independent standard normals.
    Eigen::VectorXd normals(Eigen::Index n);

    /// sqrt_cov * z with z standard normal; sqrt_cov is any matrix square
    /// root of the target covariance.
    Eigen::VectorXd gaussian(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>& sqrt_cov);

    /// Raw engine draws consumed so far (stream accounting in tests).
    std::uint64_t draws() const { return draws_; }

  private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

}  // namespace voisim
