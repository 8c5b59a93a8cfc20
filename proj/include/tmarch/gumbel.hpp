#pragma once

#include <cstddef>
#include <limits>
#include <optional>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmarch/stats.hpp"

namespace tmarch {

/// Type-2 Gumbel (Frechet) law, CDF exp(-beta sigma^-zeta) on sigma > 0.
struct Gumbel2Params {
  double beta = 1.0;
  double zeta = 1.0;

  void validate() const;
};

double gumbel2_pdf(const Gumbel2Params& p, double sigma);
double gumbel2_log_pdf(const Gumbel2Params& p, double sigma);
double gumbel2_cdf(const Gumbel2Params& p, double sigma);
/// Inverse CDF, u in (0, 1).
double gumbel2_quantile(const Gumbel2Params& p, double u);

struct Gumbel2FitOptions {
  /// Upper cut of the fit range; unset means pick the crossover automatically.
  std::optional<double> cut;
  /// Log-spaced bins for the empirical density used by the crossover search.
  std::size_t log_bins = 60;
  std::size_t min_bin_count = 20;
  /// Crossover: local slope steeper than -(zeta + slope_margin).
  double slope_margin = 3.0;
  std::size_t max_iterations = 8;
};

struct Gumbel2Fit {
  Gumbel2Params params;
  double beta_stderr = std::numeric_limits<double>::quiet_NaN();
  double zeta_stderr = std::numeric_limits<double>::quiet_NaN();
  double loglik = 0.0;
  double cut = std::numeric_limits<double>::infinity();
  bool cut_automatic = false;
  std::size_t n_used = 0;
  std::size_t n_total = 0;
  /// Least-squares log-log slope of the empirical density above the cut; NaN
  /// when fewer than two populated bins lie there.
  double slope_beyond_cut = std::numeric_limits<double>::quiet_NaN();
};

/// Truncated maximum likelihood on samples <= cut.
Gumbel2Fit fit_gumbel2(const SeriesRef& sigma, const Gumbel2FitOptions& options = {});

struct TailPrediction {
  double exponent = 0.0;  // P(z) ~ |z|^-exponent
  bool thin_tailed = false;
};

/// Power-law tail of z = sigma * omega implied by a Frechet sigma law.
TailPrediction predict_tail_from_sigma(const Gumbel2Params& p, double thin_limit = 50.0);

struct LogDensity {
  Eigen::VectorXd centers;  // geometric bin centres
  Eigen::VectorXd density;
  Eigen::VectorXd counts;
};

/// Empirical density on `bins` log-spaced bins over [min, max] of positive data.
LogDensity log_binned_density(const SeriesRef& data, std::size_t bins);

nlohmann::json to_json(const Gumbel2Fit& f);

}  // namespace tmarch
