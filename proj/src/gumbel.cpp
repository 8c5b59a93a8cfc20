#include "tmarch/gumbel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "tmarch/errors.hpp"

namespace tmarch {

void Gumbel2Params::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("gumbel2: beta must be > 0");
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw DomainError("gumbel2: zeta must be > 0");
}

double gumbel2_log_pdf(const Gumbel2Params& p, double sigma) {
  p.validate();
  if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
  const double l = std::log(sigma);
  return std::log(p.beta) + std::log(p.zeta) - (p.zeta + 1.0) * l - std::exp(std::log(p.beta) - p.zeta * l);
}

double gumbel2_pdf(const Gumbel2Params& p, double sigma) { return std::exp(gumbel2_log_pdf(p, sigma)); }

double gumbel2_cdf(const Gumbel2Params& p, double sigma) {
  p.validate();
  if (!(sigma > 0.0)) return 0.0;
  return std::exp(-p.beta * std::pow(sigma, -p.zeta));
}

double gumbel2_quantile(const Gumbel2Params& p, double u) {
  p.validate();
  if (!(u > 0.0 && u < 1.0)) throw DomainError("gumbel2_quantile: u must lie in (0, 1)");
  return std::pow(-std::log(u) / p.beta, -1.0 / p.zeta);
}

LogDensity log_binned_density(const SeriesRef& data, std::size_t bins) {
  if (bins < 2) throw DomainError("log_binned_density: need at least 2 bins");
  if (data.size() == 0) throw InsufficientDataError("log_binned_density: empty sample");
  if (!(data.minCoeff() > 0.0)) throw DomainError("log_binned_density: samples must be > 0");
  const double lo = std::log(data.minCoeff());
  const double hi = std::log(data.maxCoeff());
  const double width = std::max(hi - lo, 1e-12) / static_cast<double>(bins);
  LogDensity out;
  out.counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bins));
  for (double x : data) {
    auto k = static_cast<std::size_t>((std::log(x) - lo) / width);
    out.counts[static_cast<Eigen::Index>(std::min(k, bins - 1))] += 1.0;
  }
  out.centers.resize(static_cast<Eigen::Index>(bins));
  out.density.resize(static_cast<Eigen::Index>(bins));
  const double n = static_cast<double>(data.size());
  for (std::size_t k = 0; k < bins; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double a = std::exp(lo + width * static_cast<double>(k));
    const double b = std::exp(lo + width * static_cast<double>(k + 1));
    out.centers[i] = std::sqrt(a * b);
    out.density[i] = out.counts[i] / (n * (b - a));
  }
  return out;
}

namespace {

struct Truncated {
  std::vector<double> logs;  // ln sigma for sigma <= cut
  double log_cut = std::numeric_limits<double>::infinity();
  double min_log = 0.0;
  double sum_log = 0.0;
};

Truncated truncate(const SeriesRef& sigma, double cut) {
  Truncated t;
  t.log_cut = std::isfinite(cut) ? std::log(cut) : std::numeric_limits<double>::infinity();
  for (double s : sigma) {
    if (s <= cut) t.logs.push_back(std::log(s));
  }
  if (t.logs.size() < 2) throw InsufficientDataError("fit_gumbel2: fewer than 2 samples below the cut");
  t.min_log = *std::min_element(t.logs.begin(), t.logs.end());
  for (double l : t.logs) t.sum_log += l;
  return t;
}

// ln(sum_i sigma_i^-zeta - n cut^-zeta) + zeta * min_log, i.e. scaled by sigma_min^zeta.
double log_denominator(const Truncated& t, double zeta) {
  double s = 0.0;
  for (double l : t.logs) s += std::exp(-zeta * (l - t.min_log));
  if (std::isfinite(t.log_cut)) s -= static_cast<double>(t.logs.size()) * std::exp(-zeta * (t.log_cut - t.min_log));
  return std::log(s);
}

// Log-likelihood with beta profiled out; returns ln beta through `log_beta`.
double profile_loglik(const Truncated& t, double zeta, double& log_beta) {
  const double n = static_cast<double>(t.logs.size());
  const double ld = log_denominator(t, zeta);
  if (!std::isfinite(ld)) return -std::numeric_limits<double>::infinity();
  log_beta = std::log(n) - ld + zeta * t.min_log;
  return n * log_beta + n * std::log(zeta) - (zeta + 1.0) * t.sum_log - n;
}

void fit_on(const Truncated& t, Gumbel2Fit& out) {
  constexpr double kLo = -4.6;  // zeta in [0.01, 1000]
  constexpr double kHi = 6.9;
  double lb = 0.0;
  const auto neg = [&](double x) {
    const double v = profile_loglik(t, std::exp(x), lb);
    return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
  };
  boost::uintmax_t iters = 200;
  const auto [x, f] = boost::math::tools::brent_find_minima(neg, kLo, kHi, 40, iters);
  if (x - kLo < 1e-3 || kHi - x < 1e-3 || f == std::numeric_limits<double>::max()) {
    throw FitFailure("fit_gumbel2: no interior maximum (degenerate sample?)");
  }
  const double zeta = std::exp(x);
  const double loglik = profile_loglik(t, zeta, lb);
  out.params = {std::exp(lb), zeta};
  out.loglik = loglik;
  out.n_used = t.logs.size();

  // Observed information in (beta, zeta).
  const double n = static_cast<double>(t.logs.size());
  double hbz = 0.0;
  double hzz = -n / (zeta * zeta);
  for (double l : t.logs) {
    const double bs = std::exp(lb - zeta * l);
    hbz += l * bs;
    hzz -= l * l * bs;
  }
  if (std::isfinite(t.log_cut)) {
    const double bg = std::exp(lb - zeta * t.log_cut);
    hbz -= n * t.log_cut * bg;
    hzz += n * t.log_cut * t.log_cut * bg;
  }
  const double beta = out.params.beta;
  Eigen::Matrix2d info;
  info << n / (beta * beta), -hbz / beta, -hbz / beta, -hzz;
  const Eigen::Matrix2d cov = info.inverse();
  out.beta_stderr = cov(0, 0) > 0.0 ? std::sqrt(cov(0, 0)) : std::numeric_limits<double>::quiet_NaN();
  out.zeta_stderr = cov(1, 1) > 0.0 ? std::sqrt(cov(1, 1)) : std::numeric_limits<double>::quiet_NaN();
}

double slope_above(const LogDensity& d, double cut, std::size_t min_count) {
  Eigen::Index m = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (Eigen::Index k = 0; k < d.centers.size(); ++k) {
    if (d.centers[k] <= cut || d.counts[k] < static_cast<double>(min_count)) continue;
    const double x = std::log(d.centers[k]);
    const double y = std::log(d.density[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  const double md = static_cast<double>(m);
  const double den = md * sxx - sx * sx;
  return den > 0.0 ? (md * sxy - sx * sy) / den : std::numeric_limits<double>::quiet_NaN();
}

// First bin beyond the mode whose local slope, and the next one's, fall below
// `threshold`; returns its centre, or +inf when the tail never steepens.
double find_crossover(const LogDensity& d, double threshold, std::size_t min_count) {
  const Eigen::Index nb = d.centers.size();
  Eigen::Index mode = 0;
  d.density.maxCoeff(&mode);
  const auto usable = [&](Eigen::Index k) { return k >= 0 && k < nb && d.counts[k] >= static_cast<double>(min_count); };
  const auto local = [&](Eigen::Index k) {
    return (std::log(d.density[k + 1]) - std::log(d.density[k - 1])) /
           (std::log(d.centers[k + 1]) - std::log(d.centers[k - 1]));
  };
  for (Eigen::Index k = mode + 1; k + 1 < nb; ++k) {
    if (!usable(k - 1) || !usable(k + 1)) break;
    if (local(k) >= threshold) continue;
    const bool next_ok = k + 2 < nb && usable(k + 2);
    if (!next_ok || local(k + 1) < threshold) return d.centers[k];
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

Gumbel2Fit fit_gumbel2(const SeriesRef& sigma, const Gumbel2FitOptions& options) {
  if (sigma.size() < 2) throw InsufficientDataError("fit_gumbel2: need at least 2 samples");
  if (!(sigma.minCoeff() > 0.0) || !sigma.allFinite()) throw DomainError("fit_gumbel2: samples must be finite and > 0");
  if (sigma.maxCoeff() == sigma.minCoeff()) throw FitFailure("fit_gumbel2: constant sample");

  Gumbel2Fit out;
  out.n_total = static_cast<std::size_t>(sigma.size());
  const LogDensity dens = log_binned_density(sigma, options.log_bins);

  if (options.cut) {
    if (!(*options.cut > 0.0)) throw DomainError("fit_gumbel2: cut must be > 0");
    out.cut = *options.cut;
    fit_on(truncate(sigma, out.cut), out);
  } else {
    out.cut_automatic = true;
    double cut = std::numeric_limits<double>::infinity();
    fit_on(truncate(sigma, cut), out);
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
      const double next = find_crossover(dens, -(out.params.zeta + options.slope_margin), options.min_bin_count);
      if (next == cut) break;
      cut = next;
      fit_on(truncate(sigma, cut), out);
    }
    out.cut = cut;
  }
  out.slope_beyond_cut = std::isfinite(out.cut) ? slope_above(dens, out.cut, 5) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

TailPrediction predict_tail_from_sigma(const Gumbel2Params& p, double thin_limit) {
  p.validate();
  return {p.zeta, p.zeta > thin_limit};
}

nlohmann::json to_json(const Gumbel2Fit& f) {
  nlohmann::json j;
  j["params"] = {{"beta", f.params.beta}, {"zeta", f.params.zeta}};
  j["errors"] = {{"beta", f.beta_stderr}, {"zeta", f.zeta_stderr}};
  j["loglik"] = f.loglik;
  j["diagnostics"] = {{"cut", std::isfinite(f.cut) ? nlohmann::json(f.cut) : nlohmann::json(nullptr)},
                      {"cut_automatic", f.cut_automatic},
                      {"n_used", f.n_used},
                      {"n_total", f.n_total},
                      {"slope_beyond_cut", std::isnan(f.slope_beyond_cut) ? nlohmann::json(nullptr)
                                                                           : nlohmann::json(f.slope_beyond_cut)}};
  return j;
}

}  // namespace tmarch
