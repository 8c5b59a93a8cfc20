#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace tmarch {

struct NelderMeadOptions {
  double f_tolerance = 1e-8;   // absolute spread of simplex values
  double x_tolerance = 1e-10;  // max vertex distance from the best vertex
  std::size_t max_evaluations = 4000;
  double initial_step = 0.1;   // relative to |x0_i|, absolute if x0_i == 0
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  std::size_t evaluations = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Minimises `f` from `x0` with the standard reflection/expansion/contraction/
/// shrink simplex. Non-finite objective values are treated as +infinity.
NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const NelderMeadOptions& opt = {});

struct MultiStartResult {
  NelderMeadResult best;
  std::size_t restarts = 0;
  std::size_t total_evaluations = 0;
  std::vector<double> start_values;  // objective at the end of each start
};

/// Runs nelder_mead from every start, then restarts from the incumbent until
/// an improvement smaller than `opt.f_tolerance` or `max_restarts` in total.
/// Ties go to the lexicographically smaller parameter vector.
MultiStartResult multi_start_minimize(const Objective& f, const std::vector<Eigen::VectorXd>& starts,
                                      const NelderMeadOptions& opt = {}, std::size_t max_restarts = 50);

}  // namespace tmarch

namespace tmarch {

/// Central-difference Hessian of `f` at `x` with per-coordinate steps
/// h_i = step * max(|x_i|, 1).
Eigen::MatrixXd numerical_hessian(const Objective& f, const Eigen::VectorXd& x, double step = 1e-4);

}  // namespace tmarch
