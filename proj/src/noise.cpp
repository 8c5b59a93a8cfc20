#include "tmarch/noise.hpp"

namespace tmarch {

Eigen::VectorXd NoiseSource::draw(Eigen::Index n) {
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = next();
  return out;
}

}  // namespace tmarch
