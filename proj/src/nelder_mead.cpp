#include "tmarch/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tmarch/errors.hpp"

namespace tmarch {

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x, std::size_t& evals) {
  ++evals;
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

bool lexicographically_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& opt) {
  const Eigen::Index n = x0.size();
  if (n < 1) throw DomainError("nelder_mead: empty parameter vector");
  constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;

  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> fv(static_cast<std::size_t>(n + 1));
  NelderMeadResult res;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& v = simplex[static_cast<std::size_t>(i + 1)];
    v[i] += x0[i] != 0.0 ? opt.initial_step * std::abs(x0[i]) : opt.initial_step;
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) fv[i] = safe_eval(f, simplex[i], res.evaluations);

  std::vector<std::size_t> order(simplex.size());
  while (res.evaluations < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    double xspread = 0.0;
    for (const auto& v : simplex) xspread = std::max(xspread, (v - simplex[best]).lpNorm<Eigen::Infinity>());
    if (std::isfinite(fv[worst]) && std::abs(fv[worst] - fv[best]) <= opt.f_tolerance) {
      res.converged = true;
      break;
    }
    if (xspread <= opt.x_tolerance) {
      res.converged = std::isfinite(fv[best]);
      break;
    }
    ++res.iterations;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + alpha * (centroid - simplex[worst]);
    const double fr = safe_eval(f, xr, res.evaluations);
    if (fr < fv[best]) {
      const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
      const double fe = safe_eval(f, xe, res.evaluations);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    const Eigen::VectorXd xc =
        outside ? Eigen::VectorXd(centroid + rho * (xr - centroid)) : Eigen::VectorXd(centroid + rho * (simplex[worst] - centroid));
    const double fc = safe_eval(f, xc, res.evaluations);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + shrink * (simplex[i] - simplex[best]);
      fv[i] = safe_eval(f, simplex[i], res.evaluations);
    }
  }

  const auto it = std::min_element(fv.begin(), fv.end());
  const auto idx = static_cast<std::size_t>(it - fv.begin());
  res.x = simplex[idx];
  res.value = *it;
  return res;
}

MultiStartResult multi_start_minimize(const Objective& f, const std::vector<Eigen::VectorXd>& starts,
                                      const NelderMeadOptions& opt, std::size_t max_restarts) {
  if (starts.empty()) throw DomainError("multi_start_minimize: no starting points");
  MultiStartResult out;
  bool have = false;
  for (const auto& s : starts) {
    auto r = nelder_mead(f, s, opt);
    out.total_evaluations += r.evaluations;
    out.start_values.push_back(r.value);
    if (!have || r.value < out.best.value ||
        (r.value == out.best.value && lexicographically_less(r.x, out.best.x))) {
      out.best = std::move(r);
      have = true;
    }
  }
  // Fresh simplices around the incumbent escape premature collapse.
  while (out.restarts < max_restarts) {
    auto r = nelder_mead(f, out.best.x, opt);
    ++out.restarts;
    out.total_evaluations += r.evaluations;
    const double gain = out.best.value - r.value;
    if (r.value < out.best.value) {
      const bool converged = r.converged;
      out.best = std::move(r);
      out.best.converged = converged;
    }
    if (!(gain > opt.f_tolerance)) {
      out.best.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace tmarch

namespace tmarch {

Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double step) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = step * std::max(std::abs(x[i]), 1.0);
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h[i];
    xm[i] -= h[i];
    H(i, i) = (f(xp) - 2.0 * f0 + f(xm)) / (h[i] * h[i]);
    for (Eigen::Index j = 0; j < i; ++j) {
      Eigen::VectorXd a = x, b = x, c = x, d = x;
      a[i] += h[i]; a[j] += h[j];
      b[i] += h[i]; b[j] -= h[j];
      c[i] -= h[i]; c[j] += h[j];
      d[i] -= h[i]; d[j] -= h[j];
      H(i, j) = H(j, i) = (f(a) - f(b) - f(c) + f(d)) / (4.0 * h[i] * h[j]);
    }
  }
  return H;
}

}  // namespace tmarch
