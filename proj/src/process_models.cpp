#include "tmarch/process_models.hpp"

#include <algorithm>
#include <cmath>

#include "tmarch/errors.hpp"

namespace tmarch {

namespace {

void require_nonnegative(const std::vector<double>& xs, const char* name) {
  for (double x : xs) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw DomainError(std::string(name) + " coefficients must be finite and nonnegative");
    }
  }
}

// Shared recurrence. Missing lags of z^2 are 0 and missing lags of sigma^2
// are `a`; the coefficient loops run in ascending lag order so that a
// GARCH run with c == 0 matches the ARCH run bit for bit.
SimulationResult run_recurrence(double a, const std::vector<double>& b, const std::vector<double>& c,
                                std::size_t n, std::size_t warmup, NoiseSource& noise) {
  const std::size_t total = n + warmup;
  std::vector<double> zsq(total, 0.0);
  std::vector<double> s2(total, 0.0);

  SimulationResult out;
  out.z.resize(static_cast<Eigen::Index>(n));
  out.sigma.resize(static_cast<Eigen::Index>(n));
  out.seed = noise.seed();
  out.warmup = warmup;

  for (std::size_t t = 0; t < total; ++t) {
    double sigma2 = a;
    const std::size_t nb = std::min(b.size(), t);
    for (std::size_t i = 1; i <= nb; ++i) sigma2 += b[i - 1] * zsq[t - i];
    for (std::size_t i = 1; i <= c.size(); ++i) sigma2 += c[i - 1] * (i <= t ? s2[t - i] : a);

    const double omega = noise.next();
    const double sigma = std::sqrt(sigma2);
    const double z = sigma * omega;
    if (!std::isfinite(sigma2) || !std::isfinite(z)) {
      throw DivergenceError(t, "non-finite conditional variance");
    }
    s2[t] = sigma2;
    zsq[t] = z * z;
    if (t >= warmup) {
      const auto k = static_cast<Eigen::Index>(t - warmup);
      out.z[k] = z;
      out.sigma[k] = sigma;
    }
  }
  return out;
}

}  // namespace

void ArchSpec::validate() const {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("ARCH: a must be finite and >= 0");
  require_nonnegative(b, "ARCH b");
}

void GarchSpec::validate() const {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("GARCH: a must be finite and >= 0");
  require_nonnegative(b, "GARCH b");
  require_nonnegative(c, "GARCH c");
}

double GarchSpec::persistence() const noexcept {
  double s = 0.0;
  for (double x : b) s += x;
  for (double x : c) s += x;
  return s;
}

SimulationResult simulate_arch(const ArchSpec& spec, std::size_t n, std::optional<std::size_t> warmup,
                               NoiseSource noise) {
  spec.validate();
  if (n < 1) throw DomainError("simulate_arch: n must be >= 1");
  const std::size_t w = warmup.value_or(default_warmup(spec.order()));
  if (w < spec.order()) throw DomainError("simulate_arch: warmup must be >= s");
  auto out = run_recurrence(spec.a, spec.b, {}, n, w, noise);
  out.model = "arch";
  out.spec = to_json(spec);
  return out;
}

SimulationResult simulate_garch(const GarchSpec& spec, std::size_t n, std::optional<std::size_t> warmup,
                                NoiseSource noise) {
  spec.validate();
  if (n < 1) throw DomainError("simulate_garch: n must be >= 1");
  const std::size_t order = std::max(spec.b.size(), spec.c.size());
  const std::size_t w = warmup.value_or(default_warmup(order));
  if (w < order) throw DomainError("simulate_garch: warmup must be >= max(s, r)");
  auto out = run_recurrence(spec.a, spec.b, spec.c, n, w, noise);
  out.model = "garch";
  out.spec = to_json(spec);
  out.metadata["stationary"] = spec.stationary();
  return out;
}

double arch1_stationary_variance(double a, double b) {
  if (!(b >= 0.0) || b >= 1.0) throw DomainError("ARCH(1) stationary variance needs 0 <= b < 1");
  return a / (1.0 - b);
}

double arch1_fourth_moment(double a, double b, double noise_fourth_moment) {
  if (!(b >= 0.0)) throw DomainError("ARCH(1) fourth moment needs b >= 0");
  const double denom = 1.0 - b * b * noise_fourth_moment;
  if (!(denom > 0.0) || b >= 1.0) throw DomainError("ARCH(1) fourth moment is infinite: b^2 <w^4> >= 1");
  return a * a * noise_fourth_moment * (1.0 + b) / ((1.0 - b) * denom);
}

nlohmann::json to_json(const ArchSpec& spec) { return {{"a", spec.a}, {"b", spec.b}}; }

nlohmann::json to_json(const GarchSpec& spec) { return {{"a", spec.a}, {"b", spec.b}, {"c", spec.c}}; }

ArchSpec arch_spec_from_json(const nlohmann::json& j) {
  ArchSpec s;
  s.a = j.at("a").get<double>();
  s.b = j.at("b").get<std::vector<double>>();
  return s;
}

GarchSpec garch_spec_from_json(const nlohmann::json& j) {
  GarchSpec s;
  s.a = j.at("a").get<double>();
  s.b = j.at("b").get<std::vector<double>>();
  s.c = j.value("c", std::vector<double>{});
  return s;
}

}  // namespace tmarch
