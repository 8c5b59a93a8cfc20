#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tmarch {

using SeriesRef = Eigen::Ref<const Eigen::VectorXd>;

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double kurtosis = 0.0;  // m4 / m2^2 with central sample moments
  std::size_t count = 0;
};

/// Throws InsufficientDataError below 4 samples, DomainError for zero variance.
MomentSummary moments(const SeriesRef& series);

/// Biased autocorrelation estimator at lags 0..max_lag.
Eigen::VectorXd acf(const SeriesRef& series, std::size_t max_lag);

/// Characteristic time of an exponentially decaying autocorrelation, from a
/// least-squares line through ln acf(k) over the leading run of lags k >= 1
/// with acf(k) > 0.05. `values[0]` is lag 0.
double fit_exp_time(const SeriesRef& values);

// ---------------------------------------------------------------------------
// Detrended fluctuation analysis

struct DfaOptions {
  int order = 1;
  std::size_t grid_points = 20;
  std::optional<std::size_t> ell_min;  // default 10
  std::optional<std::size_t> ell_max;  // default N / 10
  std::optional<std::pair<double, double>> fit_range;  // default [ell_min, ell_max]
};

struct DfaResult {
  std::vector<std::size_t> ells;
  Eigen::VectorXd F;
  double H = 0.0;
  double H_stderr = 0.0;
  double fit_r = 0.0;
  std::pair<double, double> fit_range{0.0, 0.0};
};

/// Fluctuation function of the profile of `series`, detrended per segment
/// with a polynomial of the given order; segments are taken from both ends.
DfaResult dfa(const SeriesRef& series, const DfaOptions& options = {});

// ---------------------------------------------------------------------------
// Hill tail estimator

struct HillResult {
  std::size_t k = 0;
  double alpha_hat = 0.0;
  std::vector<std::pair<std::size_t, double>> trace;  // (k, alpha) on a geometric k grid
};

/// Tail exponent from the k largest |x|. Default k = ceil(0.05 n).
HillResult hill(const SeriesRef& series, std::optional<std::size_t> k = std::nullopt);

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct KsResult {
  double D = 0.0;
  double p_value = 1.0;
  /// Reported critical value 1 - alpha_crit, with alpha_crit taken as the
  /// achieved significance (p-value) of D.
  double p_star = 0.0;
  double n_effective = 0.0;
};

/// Survival function Q(lambda) = P(K > lambda) of the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

/// Asymptotic p-value with the (sqrt(n) + 0.12 + 0.11/sqrt(n)) scaling.
double ks_p_value(double D, double n_effective);

using Cdf = std::function<double(double)>;

KsResult ks_one_sample(const SeriesRef& data, const Cdf& cdf);

/// Variant for a CDF that is cheaper to evaluate on a whole sorted sample.
KsResult ks_one_sample_sorted(const SeriesRef& sorted_data, const SeriesRef& cdf_values);

KsResult ks_two_sample(const SeriesRef& x, const SeriesRef& y);

// ---------------------------------------------------------------------------

struct KlDivergence {
  double value = 0.0;
  double excluded_mass = 0.0;  // grid mass dropped at nodes where either density is 0
  bool mass_loss_warning = false;
};

/// (1/2)[int p ln(p/q) + int q ln(q/p)] by the trapezoid rule; both densities
/// are renormalised on the grid first.
KlDivergence symmetrized_kl(const SeriesRef& grid, const SeriesRef& p, const SeriesRef& q);

}  // namespace tmarch
