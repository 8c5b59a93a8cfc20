#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace tmarch {

/// Seeded stream of standard Gaussian innovations.
///
/// Two sources built from the same seed produce bit-identical sequences on a
/// given toolchain. Copying a source forks the stream at its current position.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  double next() { return normal_(engine_); }

  Eigen::VectorXd draw(Eigen::Index n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace tmarch
