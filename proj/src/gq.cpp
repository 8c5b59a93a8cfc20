#include "tmarch/gq.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>
#include <unsupported/Eigen/SpecialFunctions>

#include "tmarch/errors.hpp"
#include "tmarch/nelder_mead.hpp"

namespace tmarch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ln Gamma(x - d) - ln Gamma(x) without cancellation for large x.
double log_gamma_ratio(double x, double d) {
  if (x < 1e5) return std::lgamma(x - d) - std::lgamma(x);
  // Stirling: (x-d-1/2) ln(x-d) - (x-1/2) ln x + d + 1/(12(x-d)) - 1/(12x)
  const double y = x - d;
  return (y - 0.5) * std::log1p(-d / x) - d * std::log(x) + d + 1.0 / (12.0 * y) - 1.0 / (12.0 * x);
}

// ln of int_R |z|^n (1 + B|z|^{2nu})^{-1/(q'-1)} dz, or of the exp(-B|z|^{2nu}) limit.
double log_moment_integral(const GqParams& p, int n) {
  const double e = (n + 1.0) / (2.0 * p.nu);
  double r = -std::log(p.nu) + std::lgamma(e) - e * std::log(p.B);
  if (!p.stretched_exponential()) r += log_gamma_ratio(1.0 / (p.q_prime - 1.0), e);
  return r;
}

}  // namespace

void GqParams::validate() const {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("gq: nu must be > 0");
  if (!(B > 0.0) || !std::isfinite(B)) throw DomainError("gq: B must be > 0");
  if (!(q_prime >= 1.0) || !std::isfinite(q_prime)) throw DomainError("gq: q' must be >= 1");
  if (q_prime > 1.0 && !(2.0 * nu / (q_prime - 1.0) > 1.0)) {
    throw DomainError("gq: not normalisable, need 2 nu / (q' - 1) > 1");
  }
}

double gq_log_norm(const GqParams& p) {
  p.validate();
  return log_moment_integral(p, 0);
}

double gq_log_pdf(const GqParams& p, double z) {
  const double lz = gq_log_norm(p);
  const double u = p.B * std::pow(std::abs(z), 2.0 * p.nu);
  if (p.stretched_exponential()) return -lz - u;
  return -lz - std::log1p(u) / (p.q_prime - 1.0);
}

double gq_pdf(const GqParams& p, double z) { return std::exp(gq_log_pdf(p, z)); }

Eigen::ArrayXd gq_cdf(const GqParams& p, const Eigen::ArrayXd& z) {
  p.validate();
  const double a = 1.0 / (2.0 * p.nu);
  const Eigen::ArrayXd u = p.B * z.abs().pow(2.0 * p.nu);
  Eigen::ArrayXd inner(z.size());  // P(|Z| <= |z|)
  if (p.stretched_exponential()) {
    inner = Eigen::igamma(Eigen::ArrayXd::Constant(z.size(), a), u);
  } else {
    const double m = 1.0 / (p.q_prime - 1.0);
    const Eigen::ArrayXd av = Eigen::ArrayXd::Constant(z.size(), a);
    const Eigen::ArrayXd bv = Eigen::ArrayXd::Constant(z.size(), m - a);
    // I_w(a, m-a) with w = u/(1+u); the complement form keeps precision in the tail.
    const Eigen::ArrayXd lower = Eigen::betainc(av, bv, u / (1.0 + u));
    const Eigen::ArrayXd upper = Eigen::betainc(bv, av, 1.0 / (1.0 + u));
    inner = (u < 1.0).select(lower, 1.0 - upper);
  }
  return 0.5 + 0.5 * z.sign() * inner;
}

double gq_cdf(const GqParams& p, double z) { return gq_cdf(p, Eigen::ArrayXd::Constant(1, z))[0]; }

double gq_moment(const GqParams& p, int n) {
  p.validate();
  if (n < 0 || n % 2 != 0) throw DomainError("gq moment: order must be even and >= 0");
  if (!p.stretched_exponential() && !(2.0 * p.nu / (p.q_prime - 1.0) > n + 1.0)) {
    throw DomainError("gq moment: moment of order " + std::to_string(n) + " needs 2 nu/(q' - 1) > " +
                      std::to_string(n + 1));
  }
  if (n == 0) return 1.0;
  return std::exp(log_moment_integral(p, n) - log_moment_integral(p, 0));
}

double tail_index(double q_prime, double nu) {
  if (!(nu > 0.0)) throw DomainError("tail index: nu must be > 0");
  return (q_prime + nu - 1.0) / nu;
}

double unit_variance_B(double q) {
  if (!(q >= 1.0) || !(q < 5.0 / 3.0)) throw DomainError("unit variance needs 1 <= q < 5/3");
  return (q - 1.0) / (5.0 - 3.0 * q);
}

// ---------------------------------------------------------------------------

std::size_t Histogram::occupied() const {
  return static_cast<std::size_t>((counts.array() >= static_cast<double>(min_occupancy)).count());
}

Histogram make_histogram(const SeriesRef& data, std::size_t bins, double half_range_sd, std::size_t min_occupancy) {
  if (data.size() < 2 || bins < 1) throw InsufficientDataError("histogram: need data and bins");
  const double mean = data.mean();
  const double sd = std::sqrt((data.array() - mean).square().sum() / static_cast<double>(data.size() - 1));
  if (!(sd > 0.0)) throw DomainError("histogram: zero spread");
  const double lo = mean - half_range_sd * sd, hi = mean + half_range_sd * sd;
  Histogram h;
  h.min_occupancy = min_occupancy;
  h.width = (hi - lo) / static_cast<double>(bins);
  h.counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(bins));
  h.centers.resize(static_cast<Eigen::Index>(bins));
  for (std::size_t i = 0; i < bins; ++i) h.centers[static_cast<Eigen::Index>(i)] = lo + (i + 0.5) * h.width;
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double k = std::floor((data[i] - lo) / h.width);
    if (k >= 0.0 && k < static_cast<double>(bins)) h.counts[static_cast<Eigen::Index>(k)] += 1.0;
  }
  h.total = static_cast<std::size_t>(data.size());
  h.density = h.counts / (static_cast<double>(h.total) * h.width);
  return h;
}

// ---------------------------------------------------------------------------

namespace {

// Search coordinates. q' > 1: (ln(q'-1), ln nu, ln beta) with B = (q'-1) beta,
// which keeps the q' -> 1 end smooth. Stretched: (ln nu, ln B). A fixed nu
// drops its coordinate.
struct Parametrization {
  bool stretched = false;
  std::optional<double> fixed_nu;

  GqParams decode(const Eigen::VectorXd& x) const {
    GqParams p;
    Eigen::Index i = 0;
    if (!stretched) p.q_prime = 1.0 + std::exp(x[i++]);
    p.nu = fixed_nu ? *fixed_nu : std::exp(x[i++]);
    const double scale = std::exp(x[i++]);
    p.B = stretched ? scale : (p.q_prime - 1.0) * scale;
    return p;
  }

  Eigen::VectorXd encode(double q_prime, double nu, double beta) const {
    std::vector<double> v;
    if (!stretched) v.push_back(std::log(q_prime - 1.0));
    if (!fixed_nu) v.push_back(std::log(nu));
    v.push_back(std::log(beta));
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  bool admissible(const GqParams& p) const {
    if (!stretched && !(p.q_prime - 1.0 >= 1e-7 && p.q_prime - 1.0 <= 20.0)) return false;
    if (!(p.nu >= 0.05 && p.nu <= 20.0)) return false;
    if (!(p.B > 0.0) || !std::isfinite(p.B)) return false;
    return p.stretched_exponential() || 2.0 * p.nu / (p.q_prime - 1.0) > 1.0 + 1e-9;
  }
};

// ln|z| grouped into equal-width bins (exact samples when small).
struct LogAbsSample {
  Eigen::VectorXd log_abs;
  Eigen::VectorXd weight;
  double total = 0.0;
  Eigen::Index zeros = 0;

  static LogAbsSample build(const SeriesRef& data, const GqFitOptions& opt) {
    LogAbsSample s;
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(data.size()));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const double a = std::abs(data[i]);
      if (!std::isfinite(a)) throw DomainError("gq fit: non-finite sample");
      if (a == 0.0) {
        ++s.zeros;
      } else {
        logs.push_back(std::log(a));
      }
    }
    s.total = static_cast<double>(data.size());
    if (opt.log_bins == 0 || logs.size() <= opt.exact_limit) {
      s.log_abs = Eigen::Map<Eigen::VectorXd>(logs.data(), static_cast<Eigen::Index>(logs.size()));
      s.weight = Eigen::VectorXd::Ones(s.log_abs.size());
      return s;
    }
    const auto [lo_it, hi_it] = std::minmax_element(logs.begin(), logs.end());
    const double lo = *lo_it, hi = *hi_it;
    const double width = (hi - lo) / static_cast<double>(opt.log_bins);
    std::vector<double> sum(opt.log_bins, 0.0), cnt(opt.log_bins, 0.0);
    for (double l : logs) {
      auto k = static_cast<std::size_t>(width > 0.0 ? (l - lo) / width : 0.0);
      k = std::min(k, opt.log_bins - 1);
      sum[k] += l;
      cnt[k] += 1.0;
    }
    std::vector<double> ls, ws;
    for (std::size_t k = 0; k < opt.log_bins; ++k) {
      if (cnt[k] > 0.0) {
        ls.push_back(sum[k] / cnt[k]);
        ws.push_back(cnt[k]);
      }
    }
    s.log_abs = Eigen::Map<Eigen::VectorXd>(ls.data(), static_cast<Eigen::Index>(ls.size()));
    s.weight = Eigen::Map<Eigen::VectorXd>(ws.data(), static_cast<Eigen::Index>(ws.size()));
    return s;
  }

  double loglik(const GqParams& p) const {
    const double lz = log_moment_integral(p, 0);
    const Eigen::ArrayXd u = p.B * (2.0 * p.nu * log_abs.array()).exp();
    double core;
    if (p.stretched_exponential()) {
      core = (weight.array() * u).sum();
    } else {
      core = (weight.array() * u.log1p()).sum() / (p.q_prime - 1.0);
    }
    return -total * lz - core;
  }

  // Mean of |z|^{2 nu}, used to place the scale of the starting grid.
  double mean_power(double nu) const {
    return (weight.array() * (2.0 * nu * log_abs.array()).exp()).sum() / total;
  }
};

std::vector<Eigen::VectorXd> starting_grid(const Parametrization& par, const LogAbsSample* sample,
                                           double fallback_power) {
  const std::vector<double> qs = par.stretched ? std::vector<double>{1.0} : std::vector<double>{1.05, 1.3, 1.6};
  const std::vector<double> nus = par.fixed_nu ? std::vector<double>{*par.fixed_nu} : std::vector<double>{0.7, 1.0, 1.4};
  std::vector<Eigen::VectorXd> starts;
  for (double q : qs) {
    for (double nu : nus) {
      // For exp(-beta |z|^{2nu}), E|z|^{2nu} = 1/(2 nu beta).
      const double power = sample ? sample->mean_power(nu) : fallback_power;
      const double beta0 = 1.0 / (2.0 * nu * power);
      for (double f : {0.5, 1.0, 2.0}) {
        if (!par.stretched && !(2.0 * nu / (q - 1.0) > 1.0)) continue;
        starts.push_back(par.encode(q, nu, f * beta0));
      }
    }
  }
  return starts;
}

struct FamilyFit {
  GqParams params;
  double objective = kInf;
  bool converged = false;
  std::size_t evaluations = 0;
  std::size_t restarts = 0;
};

FamilyFit minimize_family(const Parametrization& par, const std::function<double(const GqParams&)>& cost,
                          const std::vector<Eigen::VectorXd>& starts, const GqFitOptions& opt) {
  const Objective f = [&](const Eigen::VectorXd& x) {
    const GqParams p = par.decode(x);
    if (!par.admissible(p)) return kInf;
    return cost(p);
  };
  NelderMeadOptions nm;
  nm.f_tolerance = opt.tolerance;
  nm.initial_step = 0.2;
  const auto r = multi_start_minimize(f, starts, nm, opt.max_restarts);
  FamilyFit out;
  out.params = par.decode(r.best.x);
  out.objective = r.best.value;
  out.converged = r.best.converged && std::isfinite(r.best.value);
  out.evaluations = r.total_evaluations;
  out.restarts = r.restarts;
  return out;
}

// Standard errors from the observed information in natural coordinates.
Eigen::Vector3d natural_stderr(const GqParams& p, const std::optional<double>& fixed_nu,
                               const std::function<double(const GqParams&)>& neg_loglik) {
  Eigen::Vector3d out = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
  std::vector<int> free;
  if (!p.stretched_exponential()) free.push_back(0);
  if (!fixed_nu) free.push_back(1);
  free.push_back(2);
  Eigen::VectorXd x(static_cast<Eigen::Index>(free.size()));
  const Eigen::Vector3d base(p.q_prime, p.nu, p.B);
  for (std::size_t i = 0; i < free.size(); ++i) x[static_cast<Eigen::Index>(i)] = base[free[i]];
  const Objective f = [&](const Eigen::VectorXd& y) {
    Eigen::Vector3d v = base;
    for (std::size_t i = 0; i < free.size(); ++i) v[free[i]] = y[static_cast<Eigen::Index>(i)];
    GqParams q{v[0], v[1], v[2]};
    try {
      q.validate();
    } catch (const DomainError&) {
      return kInf;
    }
    return neg_loglik(q);
  };
  Eigen::VectorXd scaled_step = x;
  const Eigen::MatrixXd H = numerical_hessian(f, x, 1e-4);
  if (!H.allFinite()) return out;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(x.size(), x.size()));
  for (std::size_t i = 0; i < free.size(); ++i) {
    const double var = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    out[free[i]] = var > 0.0 ? std::sqrt(var) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void fill_binned_diagnostics(GqFit& fit, const Histogram& h) {
  double ss_res = 0.0, ss_tot = 0.0;
  std::size_t used = 0;
  double mean = 0.0;
  for (Eigen::Index i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] >= static_cast<double>(h.min_occupancy)) {
      mean += h.density[i];
      ++used;
    }
  }
  if (used == 0) return;
  mean /= static_cast<double>(used);
  for (Eigen::Index i = 0; i < h.counts.size(); ++i) {
    if (h.counts[i] < static_cast<double>(h.min_occupancy)) continue;
    const double r = h.density[i] - gq_pdf(fit.params, h.centers[i]);
    ss_res += r * r;
    ss_tot += (h.density[i] - mean) * (h.density[i] - mean);
  }
  fit.chi2_per_bin = ss_res / static_cast<double>(used);
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
}

// Residual functor for the Levenberg-Marquardt polish of the binned fit.
struct BinResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  const Parametrization* par = nullptr;
  Eigen::VectorXd x, y;
  Eigen::Index n_inputs = 0;

  int inputs() const { return static_cast<int>(n_inputs); }
  int values() const { return static_cast<int>(x.size()); }

  int operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& fvec) const {
    const GqParams p = par->decode(theta);
    if (!par->admissible(p)) {
      fvec.setConstant(x.size(), 1e3);
      return 0;
    }
    const double lz = log_moment_integral(p, 0);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = p.B * std::pow(std::abs(x[i]), 2.0 * p.nu);
      const double lp = p.stretched_exponential() ? -lz - u : -lz - std::log1p(u) / (p.q_prime - 1.0);
      fvec[i] = std::exp(lp) - y[i];
    }
    return 0;
  }
};

}  // namespace

GqFit fit_gq_mle(const SeriesRef& data, const GqFitOptions& opt) {
  if (data.size() < 20) throw InsufficientDataError("gq fit: need at least 20 samples");
  const auto sample = LogAbsSample::build(data, opt);
  const auto nll = [&](const GqParams& p) { return -sample.loglik(p); };

  FamilyFit best;
  bool have = false;
  if (!opt.stretched_only) {
    Parametrization par{false, opt.fix_nu};
    best = minimize_family(par, nll, starting_grid(par, &sample, 1.0), opt);
    have = std::isfinite(best.objective);
  }
  {
    Parametrization par{true, opt.fix_nu};
    auto alt = minimize_family(par, nll, starting_grid(par, &sample, 1.0), opt);
    // Prefer the exact q' = 1 limit unless q' > 1 is a real improvement.
    if (!have || alt.objective <= best.objective + opt.tolerance) {
      alt.evaluations += best.evaluations;
      best = alt;
      have = std::isfinite(best.objective);
    } else {
      best.evaluations += alt.evaluations;
    }
  }
  if (!have || !best.converged) throw FitFailure("gq fit: optimizer did not converge within the restart budget");

  GqFit fit;
  fit.params = best.params;
  fit.loglik = -best.objective;
  fit.q_tail = tail_index(fit.params.q_prime, fit.params.nu);
  fit.converged = best.converged;
  fit.evaluations = best.evaluations;
  fit.restarts = best.restarts;
  fit.stderr_params = natural_stderr(fit.params, opt.fix_nu, nll);
  if (data.size() >= 200) {
    fill_binned_diagnostics(fit, make_histogram(data));
    try {
      const auto h = hill(data);
      fit.hill_alpha = h.alpha_hat;
      if (fit.q_tail > 1.0) fit.hill_crosscheck = std::abs(2.0 / (fit.q_tail - 1.0) - h.alpha_hat) / h.alpha_hat;
    } catch (const Error&) {
    }
  }
  return fit;
}

GqFit fit_gq_binned(const Histogram& hist, const GqFitOptions& opt) {
  if (hist.occupied() < 20) throw InsufficientDataError("gq binned fit: fewer than 20 occupied bins");
  std::vector<double> xs, ys;
  for (Eigen::Index i = 0; i < hist.counts.size(); ++i) {
    if (hist.counts[i] >= static_cast<double>(hist.min_occupancy)) {
      xs.push_back(hist.centers[i]);
      ys.push_back(hist.density[i]);
    }
  }
  const Eigen::Map<Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::Map<Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const auto sse = [&](const GqParams& p) {
    const double lz = log_moment_integral(p, 0);
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double u = p.B * std::pow(std::abs(x[i]), 2.0 * p.nu);
      const double lp = p.stretched_exponential() ? -lz - u : -lz - std::log1p(u) / (p.q_prime - 1.0);
      const double r = std::exp(lp) - y[i];
      s += r * r;
    }
    return s;
  };
  // Second moment of the binned density places the scale grid.
  const double m2 = (x.array().square() * y.array()).sum() / y.sum();

  FamilyFit best;
  Parametrization best_par;
  bool have = false;
  for (bool stretched : {false, true}) {
    if (stretched == false && opt.stretched_only) continue;
    Parametrization par{stretched, opt.fix_nu};
    GqFitOptions local = opt;
    local.tolerance = std::min(opt.tolerance, 1e-14);
    // E|z|^{2nu} for the scale grid from the binned second moment.
    auto r = minimize_family(par, sse, starting_grid(par, nullptr, m2), local);
    if (!have || r.objective < best.objective) {
      r.evaluations += have ? best.evaluations : 0;
      best = r;
      best_par = par;
      have = true;
    }
  }
  if (!have || !std::isfinite(best.objective)) throw FitFailure("gq binned fit: no admissible solution");

  // Levenberg-Marquardt polish from the simplex optimum.
  BinResiduals functor;
  functor.par = &best_par;
  functor.x = x;
  functor.y = y;
  Eigen::VectorXd theta = best_par.encode(best_par.stretched ? 2.0 : best.params.q_prime, best.params.nu,
                                          best_par.stretched ? best.params.B : best.params.B / (best.params.q_prime - 1.0));
  functor.n_inputs = theta.size();
  Eigen::NumericalDiff<BinResiduals> numdiff(functor);
  Eigen::LevenbergMarquardt<Eigen::NumericalDiff<BinResiduals>> lm(numdiff);
  lm.parameters.xtol = 1e-15;
  lm.parameters.ftol = 1e-15;
  lm.parameters.maxfev = 4000;
  lm.minimize(theta);
  const GqParams polished = best_par.decode(theta);
  if (best_par.admissible(polished) && sse(polished) <= best.objective) {
    best.params = polished;
    best.objective = sse(polished);
  }

  GqFit fit;
  fit.params = best.params;
  fit.q_tail = tail_index(fit.params.q_prime, fit.params.nu);
  fit.converged = true;
  fit.evaluations = best.evaluations;
  fit.restarts = best.restarts;
  fill_binned_diagnostics(fit, hist);
  return fit;
}

nlohmann::json to_json(const GqParams& p) { return {{"q_prime", p.q_prime}, {"nu", p.nu}, {"B", p.B}}; }

nlohmann::json to_json(const GqFit& f) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"params", to_json(f.params)},
          {"errors", {{"q_prime", num(f.stderr_params[0])}, {"nu", num(f.stderr_params[1])}, {"B", num(f.stderr_params[2])}}},
          {"loglik", f.loglik},
          {"q", f.q_tail},
          {"chi2_per_bin", f.chi2_per_bin},
          {"r2", f.r2},
          {"diagnostics",
           {{"converged", f.converged},
            {"evaluations", f.evaluations},
            {"restarts", f.restarts},
            {"hill_alpha", num(f.hill_alpha)},
            {"hill_relative_gap", num(f.hill_crosscheck)}}}};
}

}  // namespace tmarch
