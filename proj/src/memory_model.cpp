#include "tmarch/memory_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tmarch/errors.hpp"

namespace tmarch {

void MemoryModelSpec::validate() const {
  if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("memory model: a must be finite and >= 0");
  if (!(b >= 0.0) || !(b < 1.0)) throw DomainError("memory model: b must lie in [0, 1)");
  if (window < 1) throw DomainError("memory model: W must be >= 1");
  if (!(decay_time() > 0.0) || !std::isfinite(decay_time())) throw DomainError("memory model: tau must be > 0");
  if (!(phi_units > 0.0)) throw DomainError("memory model: phi must be > 0");
  if (cutoff_mult < 1) throw DomainError("memory model: cutoff multiplier must be >= 1");
  if (warmup && *warmup < 2 * window) throw DomainError("memory model: warmup must be >= 2W");
  if (recall_cap && *recall_cap < 1) throw DomainError("memory model: recall cap must be >= 1");
  const double phi = phi_units * a / (1.0 - b);
  if (!std::isfinite(phi) || !(phi > 0.0)) throw DomainError("memory model: absolute threshold must be finite and > 0");
}

std::size_t MemoryModelSpec::warmup_steps() const {
  return warmup.value_or(std::max(2 * window, 10 * window));
}

double threshold_absolute(const MemoryModelSpec& spec) {
  spec.validate();
  return spec.phi_units * spec.a / (1.0 - spec.b);
}

KernelWeights KernelWeights::exponential(double b, double tau, std::size_t length, KernelNormalization mode) {
  if (!(b >= 0.0) || !(tau > 0.0) || length < 1) throw DomainError("kernel: need b >= 0, tau > 0, length >= 1");
  KernelWeights k;
  k.mode_ = mode;
  k.weights_.resize(static_cast<Eigen::Index>(length));
  for (std::size_t i = 1; i <= length; ++i) {
    k.weights_[static_cast<Eigen::Index>(i - 1)] = std::exp(-static_cast<double>(i) / tau);
  }
  if (mode == KernelNormalization::kSumToImpact) {
    const double raw = k.weights_.sum();
    k.weights_ *= b / raw;
  } else {
    k.weights_ *= b;
  }
  k.total_ = k.weights_.sum();
  return k;
}

double local_volatility(std::span<const double> zsq_window, std::size_t window) {
  if (window < 1) throw DomainError("local volatility: W must be >= 1");
  if (zsq_window.size() < window) throw InsufficientDataError("local volatility: fewer than W samples");
  if (zsq_window.size() != window) throw DomainError("local volatility: window must hold exactly W samples");
  double s = 0.0;
  for (double x : zsq_window) {
    if (!(x >= 0.0)) throw DomainError("local volatility: negative squared value");
    s += x;
  }
  return s / static_cast<double>(window);
}

// ---------------------------------------------------------------------------

RegimeState::RegimeState(std::size_t window, double phi_abs, std::optional<std::size_t> recall_cap,
                         RecallNormalization normalization)
    : window_(window),
      phi_abs_(phi_abs),
      recall_cap_(recall_cap),
      normalization_(normalization),
      cross_(window),
      lagged_(window),
      lagged_all_(window) {
  if (window < 1) throw DomainError("regime state: W must be >= 1");
}

void RegimeState::push(double zsq) {
  const std::size_t t = zsq_.size();
  zsq_.push_back(zsq);
  window_sum_.add(zsq);
  if (t >= window_) window_sum_.add(-zsq_[t - window_]);

  if (t + 1 >= window_) {
    v_.push_back(window_sum_.value() / static_cast<double>(window_));
  } else {
    v_.push_back(std::numeric_limits<double>::quiet_NaN());
  }

  if (normalization_ == RecallNormalization::kAllLags && t >= window_) {
    for (std::size_t j = 1; j <= window_; ++j) lagged_all_[j - 1].add(zsq_[t - j]);
  }
  if (v_.back() >= phi_abs_) {
    qualifying_.push_back(t);
    if (t >= window_) {
      recallable_.push_back(t);
      add_recallable(t, 1.0);
      if (recall_cap_ && recallable_.size() > *recall_cap_) {
        add_recallable(recallable_.front(), -1.0);
        recallable_.pop_front();
      }
    }
  }
}

void RegimeState::add_recallable(std::size_t s, double sign) {
  const double xs = zsq_[s];
  for (std::size_t j = 1; j <= window_; ++j) {
    const double lagged = zsq_[s - j];
    cross_[j - 1].add(sign * xs * lagged);
    lagged_[j - 1].add(sign * lagged);
  }
}

bool RegimeState::regime_active() const noexcept {
  const std::size_t t = time();
  return t >= window_ && v_[t - 1] >= phi_abs_;
}

double RegimeState::recall_numerator() const {
  const std::size_t t = time();
  double s = 0.0;
  for (std::size_t j = 1; j <= window_ && j <= t; ++j) s += zsq_[t - j] * std::max(cross_[j - 1].value(), 0.0);
  return s;
}

double RegimeState::recall_denominator() const {
  const std::size_t t = time();
  double s = 0.0;
  const auto& c = normalization_ == RecallNormalization::kAllLags ? lagged_all_ : lagged_;
  for (std::size_t j = 1; j <= window_ && j <= t; ++j) s += zsq_[t - j] * std::max(c[j - 1].value(), 0.0);
  return s;
}

// ---------------------------------------------------------------------------

double regular_sigma2(const RegimeState& state, const KernelWeights& kernel, double a) {
  const auto x = state.zsq();
  const std::size_t t = state.time();
  const auto& k = kernel.weights();
  const std::size_t m = std::min(t, kernel.size());
  double sigma2 = a;
  for (std::size_t i = 1; i <= m; ++i) sigma2 += k[static_cast<Eigen::Index>(i - 1)] * x[t - i];
  return sigma2;
}

RecallWeights similarity_weights(const RegimeState& state, std::size_t t, std::optional<std::size_t> recall_cap) {
  const std::size_t w = state.window();
  if (t > state.time()) throw DomainError("similarity weights: t beyond recorded history");
  if (t < 2 * w) throw InsufficientDataError("similarity weights: need t >= 2W");
  const auto x = state.zsq();
  const auto v = state.v();
  if (!(v[t - 1] >= state.phi_abs())) throw DomainError("similarity weights: memory regime not active at t");

  std::vector<std::size_t> times;
  for (std::size_t s : state.qualifying()) {
    if (s >= t) break;
    if (s >= w) times.push_back(s);
  }
  if (recall_cap && times.size() > *recall_cap) {
    times.erase(times.begin(), times.end() - static_cast<std::ptrdiff_t>(*recall_cap));
  }

  RecallWeights out;
  out.t = t;
  out.p.resize(static_cast<Eigen::Index>(times.size()));
  out.lags.reserve(times.size());
  double total = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const std::size_t s = times[k];
    double raw = 0.0;
    for (std::size_t j = 1; j <= w; ++j) raw += x[t - j] * x[s - j];
    out.p[static_cast<Eigen::Index>(k)] = raw;
    out.lags.push_back(t - s);
    total += raw;
  }
  if (state.normalization() == RecallNormalization::kAllLags) {
    total = 0.0;
    for (std::size_t s = w; s < t; ++s) {
      double raw = 0.0;
      for (std::size_t j = 1; j <= w; ++j) raw += x[t - j] * x[s - j];
      total += raw;
    }
  }
  if (!(total > 0.0) || !(out.p.sum() > 0.0)) throw DegenerateWeightsError("similarity weights: all raw weights vanish");
  out.normalizer = total;
  out.p /= total;
  return out;
}

double memory_sigma2(const RegimeState& state, const RecallWeights& weights, double a, double b) {
  const auto x = state.zsq();
  double acc = 0.0;
  for (std::size_t k = 0; k < weights.lags.size(); ++k) {
    acc += weights.p[static_cast<Eigen::Index>(k)] * x[weights.t - weights.lags[k]];
  }
  return a + b * acc;
}

// ---------------------------------------------------------------------------

MemoryModelSimulator::MemoryModelSimulator(const MemoryModelSpec& spec, NoiseSource noise)
    : spec_(spec),
      noise_(noise),
      kernel_(KernelWeights::exponential(spec.b, spec.decay_time(), spec.history_cutoff(), spec.kernel)),
      state_(spec.window, threshold_absolute(spec), spec.recall_cap, spec.recall),
      warmup_(spec.warmup_steps()) {}

StepRecord MemoryModelSimulator::step() {
  const std::size_t t = state_.time();
  StepRecord rec;
  rec.regime = state_.regime_active();

  double sigma2 = 0.0;
  bool use_memory = rec.regime && t >= warmup_;
  if (use_memory) {
    const double den = state_.recall_denominator();
    const double num = state_.recall_numerator();
    if (den > 0.0 && num > 0.0 && std::isfinite(den) && std::isfinite(num)) {
      sigma2 = spec_.a + spec_.b * (num / den);
    } else {
      use_memory = false;
      rec.fallback = true;
      ++fallbacks_;
    }
  }
  if (!use_memory) {
    // Same arithmetic, in the same order, as the ARCH recurrence.
    const auto x = state_.zsq();
    const auto& k = kernel_.weights();
    const std::size_t m = std::min(t, kernel_.size());
    sigma2 = spec_.a;
    for (std::size_t i = 1; i <= m; ++i) sigma2 += k[static_cast<Eigen::Index>(i - 1)] * x[t - i];
  } else {
    ++memory_steps_;
  }

  const double omega = noise_.next();
  const double sigma = std::sqrt(sigma2);
  const double z = sigma * omega;
  if (!std::isfinite(sigma2) || !std::isfinite(z)) throw DivergenceError(t, "non-finite conditional variance");
  state_.push(z * z);

  rec.z = z;
  rec.sigma2 = sigma2;
  rec.v = state_.v().back();
  rec.memory_branch = use_memory;
  return rec;
}

SimulationResult simulate_memory_model(const MemoryModelSpec& spec, std::size_t n, NoiseSource noise) {
  spec.validate();
  if (n < 1) throw DomainError("simulate_memory_model: n must be >= 1");
  MemoryModelSimulator sim(spec, noise);
  const std::size_t warmup = spec.warmup_steps();

  SimulationResult out;
  out.model = "memory";
  out.seed = noise.seed();
  out.warmup = warmup;
  out.spec = to_json(spec);
  out.z.resize(static_cast<Eigen::Index>(n));
  out.sigma.resize(static_cast<Eigen::Index>(n));
  out.v.resize(static_cast<Eigen::Index>(n));
  out.regime.assign(n, false);

  for (std::size_t t = 0; t < warmup; ++t) sim.step();
  const std::size_t fallback_in_warmup = sim.fallback_steps();
  for (std::size_t k = 0; k < n; ++k) {
    const StepRecord r = sim.step();
    const auto i = static_cast<Eigen::Index>(k);
    out.z[i] = r.z;
    out.sigma[i] = std::sqrt(r.sigma2);
    out.v[i] = r.v;
    out.regime[k] = r.regime;
  }

  out.metadata["kernel_normalization"] =
      spec.kernel == KernelNormalization::kSumToImpact ? "sum_to_impact" : "raw";
  out.metadata["kernel_total"] = sim.kernel().total();
  out.metadata["recall_normalization"] = spec.recall == RecallNormalization::kGated ? "gated" : "all_lags";
  out.metadata["phi_abs"] = sim.phi_abs();
  out.metadata["warmup"] = warmup;
  out.metadata["fallback_steps"] = sim.fallback_steps() - fallback_in_warmup;
  out.metadata["memory_steps"] = sim.memory_steps();
  return out;
}

nlohmann::json to_json(const MemoryModelSpec& spec) {
  nlohmann::json j = {{"a", spec.a},
                      {"b", spec.b},
                      {"W", spec.window},
                      {"tau", spec.decay_time()},
                      {"phi", spec.phi_units},
                      {"cutoff_mult", spec.cutoff_mult},
                      {"warmup", spec.warmup_steps()},
                      {"kernel", spec.kernel == KernelNormalization::kSumToImpact ? "sum_to_impact" : "raw"}};
  j["recall_normalization"] = spec.recall == RecallNormalization::kGated ? "gated" : "all_lags";
  j["recall_cap"] = spec.recall_cap ? nlohmann::json(*spec.recall_cap) : nlohmann::json(nullptr);
  return j;
}

MemoryModelSpec memory_spec_from_json(const nlohmann::json& j) {
  MemoryModelSpec s;
  s.a = j.value("a", 1.0);
  s.b = j.at("b").get<double>();
  s.window = j.at("W").get<std::size_t>();
  if (j.contains("tau")) s.tau = j.at("tau").get<double>();
  s.phi_units = j.at("phi").get<double>();
  s.cutoff_mult = j.value("cutoff_mult", std::size_t{10});
  if (j.contains("warmup")) s.warmup = j.at("warmup").get<std::size_t>();
  if (j.contains("recall_cap") && !j.at("recall_cap").is_null()) s.recall_cap = j.at("recall_cap").get<std::size_t>();
  const std::string recall = j.value("recall_normalization", std::string("all_lags"));
  if (recall == "gated") {
    s.recall = RecallNormalization::kGated;
  } else if (recall == "all_lags") {
    s.recall = RecallNormalization::kAllLags;
  } else {
    throw ConfigError("unknown recall normalization '" + recall + "'");
  }
  const std::string kernel = j.value("kernel", std::string("sum_to_impact"));
  if (kernel == "raw") {
    s.kernel = KernelNormalization::kRaw;
  } else if (kernel == "sum_to_impact") {
    s.kernel = KernelNormalization::kSumToImpact;
  } else {
    throw ConfigError("unknown kernel normalization '" + kernel + "'");
  }
  return s;
}

}  // namespace tmarch
