#pragma once

#include <cstddef>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmarch/stats.hpp"

namespace tmarch {

/// Symmetric density P(z) = Z^{-1} (1 + B |z|^{2 nu})^{1/(1 - q')}, with the
/// stretched exponential Z^{-1} exp(-B |z|^{2 nu}) as the q' = 1 member.
struct GqParams {
  double q_prime = 1.0;
  double nu = 1.0;
  double B = 0.5;

  bool stretched_exponential() const noexcept { return q_prime == 1.0; }
  /// Throws DomainError unless nu > 0, B > 0, q' >= 1 and 2 nu / (q' - 1) > 1.
  void validate() const;
};

/// ln Z, the log of the normalising integral over the real line.
double gq_log_norm(const GqParams& p);
double gq_pdf(const GqParams& p, double z);
double gq_log_pdf(const GqParams& p, double z);
double gq_cdf(const GqParams& p, double z);
/// Vectorised CDF; one call into the incomplete beta/gamma kernels.
Eigen::ArrayXd gq_cdf(const GqParams& p, const Eigen::ArrayXd& z);

/// Even moment <z^n>. Throws DomainError when 2 nu / (q' - 1) <= n + 1.
double gq_moment(const GqParams& p, int n);

/// Tail index q with 2/(q - 1) = 2 nu/(q' - 1).
double tail_index(double q_prime, double nu);

/// B that gives unit variance for nu = 1: (q - 1)/(5 - 3q).
double unit_variance_B(double q);

struct Histogram {
  Eigen::VectorXd centers;
  Eigen::VectorXd density;
  Eigen::VectorXd counts;
  double width = 0.0;
  std::size_t total = 0;
  std::size_t min_occupancy = 5;

  std::size_t occupied() const;
};

/// Equal-width bins over mean +- half_range_sd sample standard deviations.
Histogram make_histogram(const SeriesRef& data, std::size_t bins = 101, double half_range_sd = 6.0,
                         std::size_t min_occupancy = 5);

struct GqFitOptions {
  std::optional<double> fix_nu;
  bool stretched_only = false;  // force q' = 1
  std::size_t max_restarts = 50;
  double tolerance = 1e-8;
  /// Above this many samples the log-likelihood is evaluated on `log_bins`
  /// groups of ln|z| (within-group mean); 0 disables grouping.
  std::size_t exact_limit = 20000;
  std::size_t log_bins = 8192;
};

struct GqFit {
  GqParams params;
  Eigen::Vector3d stderr_params = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  double loglik = 0.0;
  double q_tail = 1.0;
  double chi2_per_bin = 0.0;
  double r2 = 0.0;
  double hill_alpha = std::numeric_limits<double>::quiet_NaN();
  double hill_crosscheck = std::numeric_limits<double>::quiet_NaN();  // |2/(q-1) - alpha| / alpha
  bool converged = false;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
};

/// Maximum-likelihood fit of the symmetric family to `data`, multi-started
/// from a 3x3x3 grid in (q', nu, scale).
GqFit fit_gq_mle(const SeriesRef& data, const GqFitOptions& options = {});

/// Least squares on occupied bin densities; chi2_per_bin is the mean squared
/// density residual per bin.
GqFit fit_gq_binned(const Histogram& hist, const GqFitOptions& options = {});

nlohmann::json to_json(const GqParams& p);
nlohmann::json to_json(const GqFit& f);

}  // namespace tmarch
