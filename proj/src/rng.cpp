#include "ltvdw/rng.hpp"

#include <cmath>
#include <numbers>

namespace ltvdw {

double Rng::normal() {
  // (s >> 11) keeps the top 53 bits; +1 moves u1 into (0, 1] so the log is
  // finite.
  const double u1 = static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd Rng::normal_vector(int s) {
  Eigen::VectorXd v(s);
  for (int i = 0; i < s; ++i) v(i) = normal();
  return v;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 output function on state root + (index+1) * golden gamma.
  std::uint64_t z = root + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ltvdw
