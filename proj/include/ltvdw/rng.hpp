#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace ltvdw {

/// Deterministic random source used by every stochastic operation in this
/// library. The generator is std::mt19937_64 (bit-exact across platforms
/// per the C++ standard). Standard-normal variates use the Box-Muller
/// cosine branch so that each draw consumes exactly two engine outputs:
///
///   u1 = ((s1 >> 11) + 1) * 2^-53   in (0, 1]
///   u2 =  (s2 >> 11)      * 2^-53   in [0, 1)
///   z  = sqrt(-2 ln u1) * cos(2 pi u2)
///
/// std::normal_distribution is deliberately avoided: its algorithm is
/// implementation-defined and would break bit-reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Standard normal draw (Box-Muller cosine branch, two engine outputs).
  double normal();

  /// Vector of s independent standard normals.
  Eigen::VectorXd normal_vector(int s);

 private:
  std::mt19937_64 engine_;
};

/// Seed-splitting rule for parallel / multi-run work: stream `index` of
/// root seed `root` is splitmix64(root + (index+1) * 0x9E3779B97F4A7C15).
/// Documented so that run j of any Monte Carlo experiment is reproducible
/// in isolation.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

}  // namespace ltvdw
