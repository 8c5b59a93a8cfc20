#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmarch/noise.hpp"

namespace tmarch {

/// ARCH(s): sigma_t^2 = a + sum_i b_i z_{t-i}^2.
struct ArchSpec {
  double a = 1.0;
  std::vector<double> b;

  std::size_t order() const noexcept { return b.size(); }
  void validate() const;
};

/// GARCH(s,r): sigma_t^2 = a + sum_i b_i z_{t-i}^2 + sum_i c_i sigma_{t-i}^2.
struct GarchSpec {
  double a = 1.0;
  std::vector<double> b;
  std::vector<double> c;

  void validate() const;
  /// Sum of all impact and persistence coefficients; < 1 is the usual
  /// covariance-stationarity condition.
  double persistence() const noexcept;
  bool stationary() const noexcept { return persistence() < 1.0; }
};

/// Aligned output of any generator. `v` and `regime` are empty for the
/// classical models.
struct SimulationResult {
  std::string model;
  Eigen::VectorXd z;
  Eigen::VectorXd sigma;
  Eigen::VectorXd v;
  std::vector<bool> regime;
  nlohmann::json spec;
  std::uint64_t seed = 0;
  std::size_t warmup = 0;
  nlohmann::json metadata = nlohmann::json::object();

  Eigen::Index size() const noexcept { return z.size(); }
};

/// Default number of discarded initial steps for a recurrence of the given order.
inline std::size_t default_warmup(std::size_t order) { return 10 * (order == 0 ? 1 : order); }

SimulationResult simulate_arch(const ArchSpec& spec, std::size_t n,
                               std::optional<std::size_t> warmup, NoiseSource noise);

SimulationResult simulate_garch(const GarchSpec& spec, std::size_t n,
                                std::optional<std::size_t> warmup, NoiseSource noise);

/// Stationary variance a/(1-b) of ARCH(1). Throws DomainError for b >= 1.
double arch1_stationary_variance(double a, double b);

/// <z^4> of ARCH(1) for innovations with fourth moment `noise_fourth_moment`.
/// Throws DomainError when b^2 <omega^4> >= 1 (infinite fourth moment).
double arch1_fourth_moment(double a, double b, double noise_fourth_moment);

nlohmann::json to_json(const ArchSpec& spec);
nlohmann::json to_json(const GarchSpec& spec);
ArchSpec arch_spec_from_json(const nlohmann::json& j);
GarchSpec garch_spec_from_json(const nlohmann::json& j);

}  // namespace tmarch
