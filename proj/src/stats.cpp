#include "tmarch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "tmarch/errors.hpp"

namespace tmarch {

MomentSummary moments(const SeriesRef& series) {
  const auto n = series.size();
  if (n < 4) throw InsufficientDataError("moments: need at least 4 samples");
  MomentSummary m;
  m.count = static_cast<std::size_t>(n);
  m.mean = series.mean();
  const Eigen::ArrayXd d = series.array() - m.mean;
  const double m2 = d.square().mean();
  const double m4 = d.square().square().mean();
  if (!(m2 > 0.0)) throw DomainError("moments: zero variance, kurtosis undefined");
  m.variance = m2 * static_cast<double>(n) / static_cast<double>(n - 1);
  m.kurtosis = m4 / (m2 * m2);
  return m;
}

Eigen::VectorXd acf(const SeriesRef& series, std::size_t max_lag) {
  const auto n = series.size();
  if (n < 2 || static_cast<Eigen::Index>(max_lag) >= n) throw InsufficientDataError("acf: series shorter than max lag");
  const Eigen::VectorXd d = series.array() - series.mean();
  const double c0 = d.squaredNorm();
  if (!(c0 > 0.0)) throw DomainError("acf: zero variance");
  Eigen::VectorXd out(static_cast<Eigen::Index>(max_lag + 1));
  for (std::size_t k = 0; k <= max_lag; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out[kk] = d.head(n - kk).dot(d.tail(n - kk)) / c0;
  }
  return out;
}

double fit_exp_time(const SeriesRef& values) {
  std::vector<double> xs, ys;
  for (Eigen::Index k = 1; k < values.size() && values[k] > 0.05; ++k) {
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(values[k]));
  }
  if (xs.empty()) throw FitFailure("fit_exp_time: no positive autocorrelation above 0.05");
  if (xs.size() == 1) return -1.0 / ys.front();
  const Eigen::Map<const Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const double xm = x.mean(), ym = y.mean();
  const double slope = ((x.array() - xm) * (y.array() - ym)).sum() / (x.array() - xm).square().sum();
  if (!(slope < 0.0)) throw FitFailure("fit_exp_time: autocorrelation does not decay");
  return -1.0 / slope;
}

// ---------------------------------------------------------------------------

namespace {

struct LineFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
  double r = 0.0;
};

LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double xm = x.mean(), ym = y.mean();
  const Eigen::ArrayXd dx = x.array() - xm, dy = y.array() - ym;
  const double sxx = dx.square().sum(), syy = dy.square().sum(), sxy = (dx * dy).sum();
  LineFit f;
  f.slope = sxy / sxx;
  f.r = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 1.0;
  const auto n = x.size();
  if (n > 2) {
    const double resid = (dy - f.slope * dx).square().sum();
    f.slope_stderr = std::sqrt(resid / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

std::vector<std::size_t> geometric_grid(std::size_t lo, std::size_t hi, std::size_t points) {
  std::set<std::size_t> out;
  if (points < 2 || hi <= lo) return {lo};
  const double ratio = std::log(static_cast<double>(hi) / static_cast<double>(lo)) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    out.insert(static_cast<std::size_t>(std::llround(static_cast<double>(lo) * std::exp(ratio * static_cast<double>(i)))));
  }
  return {out.begin(), out.end()};
}

// Mean squared residual of every length-`ell` segment of `profile` about its
// least-squares polynomial, segments laid from the start and from the end.
double fluctuation(const Eigen::VectorXd& profile, std::size_t ell, int order) {
  const auto n = profile.size();
  const auto l = static_cast<Eigen::Index>(ell);
  const Eigen::Index segments = n / l;

  Eigen::MatrixXd vander(l, order + 1);
  for (Eigen::Index i = 0; i < l; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(l) - 0.5;
    double p = 1.0;
    for (int c = 0; c <= order; ++c) {
      vander(i, c) = p;
      p *= u;
    }
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(vander);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(l, order + 1);

  double total = 0.0;
  Eigen::VectorXd seg(l);
  for (int dir = 0; dir < 2; ++dir) {
    for (Eigen::Index k = 0; k < segments; ++k) {
      const Eigen::Index start = dir == 0 ? k * l : n - (k + 1) * l;
      seg = profile.segment(start, l);
      seg.array() -= seg.mean();
      const Eigen::VectorXd resid = seg - q * (q.transpose() * seg);
      total += resid.squaredNorm() / static_cast<double>(l);
    }
  }
  return total / static_cast<double>(2 * segments);
}

}  // namespace

DfaResult dfa(const SeriesRef& series, const DfaOptions& options) {
  if (options.order < 1) throw DomainError("dfa: detrending order must be >= 1");
  const auto n = static_cast<std::size_t>(series.size());
  const std::size_t ell_min = options.ell_min.value_or(10);
  const std::size_t ell_max = options.ell_max.value_or(n / 10);
  if (ell_min < static_cast<std::size_t>(options.order) + 2) throw DomainError("dfa: smallest segment too short for the order");
  if (ell_max < ell_min || n < 4 * ell_max || n < 40) throw InsufficientDataError("dfa: series too short for the segment grid");

  Eigen::VectorXd profile(series.size());
  const double mean = series.mean();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    acc += series[i] - mean;
    profile[i] = acc;
  }

  DfaResult out;
  out.ells = geometric_grid(ell_min, ell_max, options.grid_points);
  out.F.resize(static_cast<Eigen::Index>(out.ells.size()));
  for (std::size_t i = 0; i < out.ells.size(); ++i) {
    out.F[static_cast<Eigen::Index>(i)] = std::sqrt(fluctuation(profile, out.ells[i], options.order));
  }

  out.fit_range = options.fit_range.value_or(std::pair<double, double>(ell_min, ell_max));
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < out.ells.size(); ++i) {
    const double ell = static_cast<double>(out.ells[i]);
    if (ell < out.fit_range.first || ell > out.fit_range.second) continue;
    const double f = out.F[static_cast<Eigen::Index>(i)];
    if (!(f > 0.0)) throw DomainError("dfa: vanishing fluctuation function");
    lx.push_back(std::log(ell));
    ly.push_back(std::log(f));
  }
  if (lx.size() < 2) throw InsufficientDataError("dfa: fewer than two scales inside the fit range");
  const auto fit = fit_line(Eigen::Map<Eigen::VectorXd>(lx.data(), static_cast<Eigen::Index>(lx.size())),
                            Eigen::Map<Eigen::VectorXd>(ly.data(), static_cast<Eigen::Index>(ly.size())));
  out.H = fit.slope;
  out.H_stderr = fit.slope_stderr;
  out.fit_r = fit.r;
  return out;
}

// ---------------------------------------------------------------------------

HillResult hill(const SeriesRef& series, std::optional<std::size_t> k_opt) {
  const auto n = static_cast<std::size_t>(series.size());
  const std::size_t k = k_opt.value_or(static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n))));
  if (k < 10) throw DomainError("hill: k must be >= 10");
  if (2 * k >= n) throw InsufficientDataError("hill: k must be < n / 2");

  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::abs(series[static_cast<Eigen::Index>(i)]);
  const std::size_t kmax = (n - 1) / 2;
  std::partial_sort(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(kmax + 1), x.end(), std::greater<>());

  auto alpha_at = [&](std::size_t kk) {
    const double ref = x[kk];
    if (!(ref > 0.0)) throw DomainError("hill: non-positive order statistic in the tail");
    double s = 0.0;
    for (std::size_t j = 0; j < kk; ++j) s += std::log(x[j] / ref);
    if (!(s > 0.0)) throw DomainError("hill: degenerate tail (equal order statistics)");
    return static_cast<double>(kk) / s;
  };

  HillResult out;
  out.k = k;
  out.alpha_hat = alpha_at(k);
  for (std::size_t kk : geometric_grid(10, kmax, 40)) {
    try {
      out.trace.emplace_back(kk, alpha_at(kk));
    } catch (const DomainError&) {
      // Trace entries in a degenerate stretch are skipped.
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // CDF via the theta-function dual series, accurate for small lambda.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k < 50; ++k) {
      const double m = 2.0 * k - 1.0;
      const double term = std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-18) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_p_value(double D, double n_effective) {
  const double sn = std::sqrt(n_effective);
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * D);
}

namespace {

KsResult finish(double D, double ne) {
  KsResult r;
  r.D = D;
  r.n_effective = ne;
  r.p_value = ks_p_value(D, ne);
  r.p_star = 1.0 - r.p_value;
  return r;
}

}  // namespace

KsResult ks_one_sample_sorted(const SeriesRef& sorted, const SeriesRef& cdf_values) {
  const auto n = sorted.size();
  if (n == 0) throw InsufficientDataError("ks: empty sample");
  if (cdf_values.size() != n) throw DomainError("ks: cdf values do not match sample size");
  const double dn = static_cast<double>(n);
  double D = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double F = cdf_values[i];
    D = std::max({D, F - static_cast<double>(i) / dn, static_cast<double>(i + 1) / dn - F});
  }
  return finish(std::clamp(D, 0.0, 1.0), dn);
}

KsResult ks_one_sample(const SeriesRef& data, const Cdf& cdf) {
  if (data.size() == 0) throw InsufficientDataError("ks: empty sample");
  Eigen::VectorXd sorted = data;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  Eigen::VectorXd F(sorted.size());
  for (Eigen::Index i = 0; i < sorted.size(); ++i) F[i] = cdf(sorted[i]);
  return ks_one_sample_sorted(sorted, F);
}

KsResult ks_two_sample(const SeriesRef& x_in, const SeriesRef& y_in) {
  if (x_in.size() == 0 || y_in.size() == 0) throw InsufficientDataError("ks: empty sample");
  std::vector<double> x(x_in.data(), x_in.data() + x_in.size());
  std::vector<double> y(y_in.data(), y_in.data() + y_in.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size()), m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    D = std::max(D, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  // Once one sample is exhausted the remaining gap can only shrink.
  return finish(D, n * m / (n + m));
}

// ---------------------------------------------------------------------------

KlDivergence symmetrized_kl(const SeriesRef& grid, const SeriesRef& p_in, const SeriesRef& q_in) {
  const auto n = grid.size();
  if (n < 2 || p_in.size() != n || q_in.size() != n) throw DomainError("kl: densities must share a grid of >= 2 nodes");

  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);  // trapezoid weights
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double h = grid[i + 1] - grid[i];
    if (!(h > 0.0)) throw DomainError("kl: grid must be strictly increasing");
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  const double pm = w.dot(p_in), qm = w.dot(q_in);
  if (!(pm > 0.0) || !(qm > 0.0)) throw DomainError("kl: densities carry no mass on the grid");
  const Eigen::VectorXd p = p_in / pm, q = q_in / qm;

  KlDivergence out;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] > 0.0 && q[i] > 0.0) {
      acc += w[i] * (p[i] - q[i]) * std::log(p[i] / q[i]);
    } else {
      out.excluded_mass += w[i] * 0.5 * (p[i] + q[i]);
    }
  }
  out.value = 0.5 * acc;
  out.mass_loss_warning = out.excluded_mass > 1e-4;
  return out;
}

}  // namespace tmarch
