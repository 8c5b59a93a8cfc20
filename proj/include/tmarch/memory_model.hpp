#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmarch/detail/compensated_sum.hpp"
#include "tmarch/noise.hpp"
#include "tmarch/process_models.hpp"

namespace tmarch {

/// How the truncated exponential kernel of the regular branch is scaled.
enum class KernelNormalization {
  kSumToImpact,  ///< weights rescaled so that they sum to b
  kRaw,          ///< b * exp(-i / tau) as is
};

/// Domain over which the similarity weights are normalised.
enum class RecallNormalization {
  kGated,    ///< sum of p_i over threshold-gated lags is 1
  kAllLags,  ///< sum over every lag with a complete window is 1; gating then drops mass
};

/// Threshold-memory ARCH model.
///
/// Below the volatility threshold the conditional variance follows an
/// exponential-kernel ARCH truncated at `cutoff_mult * window` lags. Once
/// the local volatility of the last `window` squared values reaches the
/// threshold, the variance is rebuilt from past high-volatility moments,
/// each weighted by the overlap of the window preceding it with the window
/// preceding the current step.
struct MemoryModelSpec {
  double a = 1.0;
  double b = 0.0;
  std::size_t window = 1;
  std::optional<double> tau;  // defaults to `window`
  double phi_units = 1.0;     // threshold in units of a / (1 - b)
  std::size_t cutoff_mult = 10;
  std::optional<std::size_t> warmup;  // defaults to max(2W, 10W)
  std::optional<std::size_t> recall_cap;
  KernelNormalization kernel = KernelNormalization::kSumToImpact;
  RecallNormalization recall = RecallNormalization::kAllLags;

  void validate() const;
  double decay_time() const { return tau.value_or(static_cast<double>(window)); }
  std::size_t history_cutoff() const { return cutoff_mult * window; }
  std::size_t warmup_steps() const;
};

double threshold_absolute(const MemoryModelSpec& spec);

/// Truncated exponential kernel k_1..k_L of the regular branch.
class KernelWeights {
 public:
  static KernelWeights exponential(double b, double tau, std::size_t length,
                                   KernelNormalization mode = KernelNormalization::kSumToImpact);

  /// weights()[i - 1] is the coefficient of z_{t-i}^2.
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(weights_.size()); }
  double total() const noexcept { return total_; }
  KernelNormalization mode() const noexcept { return mode_; }

 private:
  Eigen::VectorXd weights_;
  double total_ = 0.0;
  KernelNormalization mode_ = KernelNormalization::kSumToImpact;
};

/// Mean of the trailing window; `zsq_window` must hold exactly `window` values.
double local_volatility(std::span<const double> zsq_window, std::size_t window);

/// History and incremental bookkeeping of one run.
///
/// Besides the raw z^2 history it maintains the running window sum, the local
/// volatility series, the index of threshold-crossing times and, for the
/// memory branch, two per-offset accumulators over recallable times s
///
///   A_j = sum_s z_s^2 z_{s-j}^2,   C_j = sum_s z_{s-j}^2,   j = 1..W,
///
/// so that the recall average at time t costs O(W) instead of O(W |S|).
class RegimeState {
 public:
  RegimeState(std::size_t window, double phi_abs, std::optional<std::size_t> recall_cap = std::nullopt,
              RecallNormalization normalization = RecallNormalization::kAllLags);

  /// Appends z_t^2 where t == time() before the call.
  void push(double zsq);

  /// Number of samples pushed, i.e. the index of the next step.
  std::size_t time() const noexcept { return zsq_.size(); }
  std::size_t window() const noexcept { return window_; }
  double phi_abs() const noexcept { return phi_abs_; }
  std::optional<std::size_t> recall_cap() const noexcept { return recall_cap_; }
  RecallNormalization normalization() const noexcept { return normalization_; }

  std::span<const double> zsq() const noexcept { return zsq_; }
  /// v_t for every pushed t; NaN while fewer than W samples exist.
  std::span<const double> v() const noexcept { return v_; }
  /// Times s with v_s >= phi_abs, ascending.
  const std::vector<std::size_t>& qualifying() const noexcept { return qualifying_; }
  /// Times currently feeding the recall accumulators (s >= W, capped).
  const std::deque<std::size_t>& recallable() const noexcept { return recallable_; }

  double window_sum() const noexcept { return window_sum_.value(); }
  /// True when v_{t-1} >= phi_abs for t == time().
  bool regime_active() const noexcept;

  /// Unnormalised recall sum over recallable s of w_s z_s^2, where w_s is the
  /// overlap of the windows preceding t == time() and s.
  double recall_numerator() const;
  /// Sum of w_s over the normalisation domain (gated or all complete lags).
  double recall_denominator() const;

 private:
  void add_recallable(std::size_t s, double sign);

  std::size_t window_;
  double phi_abs_;
  std::optional<std::size_t> recall_cap_;
  RecallNormalization normalization_;
  std::vector<double> zsq_;
  std::vector<double> v_;
  std::vector<std::size_t> qualifying_;
  std::deque<std::size_t> recallable_;
  detail::CompensatedSum window_sum_;
  std::vector<detail::CompensatedSum> cross_;  // A_j, index j-1
  std::vector<detail::CompensatedSum> lagged_;  // C_j, index j-1
  std::vector<detail::CompensatedSum> lagged_all_;  // C_j over every s in [W, t-1]
};

/// Normalised recall weights for one step.
struct RecallWeights {
  std::size_t t = 0;
  std::vector<std::size_t> lags;  // i = t - s, ascending in s
  Eigen::VectorXd p;
  double normalizer = 0.0;
};

/// a + sum_{i=1}^{min(t, L)} k_i z_{t-i}^2 at t == state.time().
double regular_sigma2(const RegimeState& state, const KernelWeights& kernel, double a);

/// Direct evaluation of the similarity weights at time t (<= state.time()).
/// Under RecallNormalization::kAllLags `p` still lists gated lags only but
/// sums to the gated share of the total similarity.
/// Throws DomainError when the regime is not active or t < 2W and
/// DegenerateWeightsError when every raw weight vanishes.
RecallWeights similarity_weights(const RegimeState& state, std::size_t t,
                                 std::optional<std::size_t> recall_cap = std::nullopt);

/// a + b * sum_i p_i z_{t-i}^2.
double memory_sigma2(const RegimeState& state, const RecallWeights& weights, double a, double b);

struct StepRecord {
  double z = 0.0;
  double sigma2 = 0.0;
  double v = 0.0;
  bool regime = false;
  bool memory_branch = false;
  bool fallback = false;
};

/// Step-by-step driver of the threshold-memory model.
class MemoryModelSimulator {
 public:
  MemoryModelSimulator(const MemoryModelSpec& spec, NoiseSource noise);

  StepRecord step();

  const RegimeState& state() const noexcept { return state_; }
  const KernelWeights& kernel() const noexcept { return kernel_; }
  const MemoryModelSpec& spec() const noexcept { return spec_; }
  double phi_abs() const noexcept { return state_.phi_abs(); }
  std::size_t fallback_steps() const noexcept { return fallbacks_; }
  std::size_t memory_steps() const noexcept { return memory_steps_; }

 private:
  MemoryModelSpec spec_;
  NoiseSource noise_;
  KernelWeights kernel_;
  RegimeState state_;
  std::size_t warmup_;
  std::size_t fallbacks_ = 0;
  std::size_t memory_steps_ = 0;
};

/// Runs warmup + n steps and returns the last n.
SimulationResult simulate_memory_model(const MemoryModelSpec& spec, std::size_t n, NoiseSource noise);

nlohmann::json to_json(const MemoryModelSpec& spec);
MemoryModelSpec memory_spec_from_json(const nlohmann::json& j);

}  // namespace tmarch
