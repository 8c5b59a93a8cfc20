#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <doctest.h>

#include "tmarch/errors.hpp"
#include "tmarch/noise.hpp"
#include "tmarch/stats.hpp"

using namespace tmarch;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

Eigen::VectorXd pareto(double alpha, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  for (auto& v : x) v = std::pow(1.0 - u(eng), -1.0 / alpha);
  return x;
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("moments") {
  Eigen::VectorXd x(6);
  x << 1, 2, 3, 4, 5, 6;
  const auto m = moments(x);
  CHECK(m.mean == doctest::Approx(3.5));
  CHECK(m.variance == doctest::Approx(3.5));
  // central m4 = 14.7292, m2 = 2.9167
  CHECK(m.kurtosis == doctest::Approx((707.0 / 48.0) / std::pow(35.0 / 12.0, 2)));
  CHECK(m.count == 6);
  CHECK_THROWS_AS(moments(x.head(3)), InsufficientDataError);
  CHECK_THROWS_AS(moments(Eigen::VectorXd::Constant(10, 2.0)), DomainError);
  const auto g = moments(NoiseSource(1).draw(1000000));
  CHECK(g.kurtosis == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("autocorrelation of an AR(1) series") {
  NoiseSource n(3);
  const double rho = 0.8;
  Eigen::VectorXd x(200000);
  x[0] = n.next();
  for (Eigen::Index t = 1; t < x.size(); ++t) x[t] = rho * x[t - 1] + n.next();
  const auto r = acf(x, 10);
  CHECK(r[0] == doctest::Approx(1.0));
  for (int k = 1; k <= 5; ++k) CHECK(r[k] == doctest::Approx(std::pow(rho, k)).epsilon(0.03));
  CHECK(fit_exp_time(r) == doctest::Approx(-1.0 / std::log(rho)).epsilon(0.05));
}

TEST_CASE("DFA of white noise gives H = 1/2") {
  const Eigen::VectorXd x = NoiseSource(7).draw(200000);
  const auto d = dfa(x);
  CHECK(std::abs(d.H - 0.5) < 0.02);
  CHECK(d.fit_r > 0.99);
  CHECK(d.ells.front() == 10);
  CHECK(d.ells.back() <= 20000);
  DfaOptions o2;
  o2.order = 2;
  CHECK(dfa(x, o2).H == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("DFA of a random walk gives H = 3/2") {
  Eigen::VectorXd x = NoiseSource(8).draw(100000);
  std::partial_sum(x.begin(), x.end(), x.begin());
  CHECK(dfa(x).H == doctest::Approx(1.5).epsilon(0.05));
}

TEST_CASE("DFA is scale equivariant and shuffling destroys correlations") {
  NoiseSource n(9);
  Eigen::VectorXd x(100000);
  x[0] = 0.0;
  for (Eigen::Index t = 1; t < x.size(); ++t) x[t] = 0.95 * x[t - 1] + n.next();
  const auto a = dfa(x);
  const Eigen::VectorXd scaled = 3.0 * x;
  const auto b = dfa(scaled);
  CHECK(b.H == doctest::Approx(a.H).epsilon(1e-10));
  for (Eigen::Index i = 0; i < a.F.size(); ++i) CHECK(b.F[i] == doctest::Approx(3.0 * a.F[i]).epsilon(1e-10));

  std::vector<double> v(x.begin(), x.end());
  std::shuffle(v.begin(), v.end(), std::mt19937_64(1));
  const auto s = dfa(Eigen::Map<Eigen::VectorXd>(v.data(), Eigen::Index(v.size())));
  CHECK(a.H > 0.6);
  CHECK(std::abs(s.H - 0.5) < 0.02);
}

TEST_CASE("DFA rejects short series and bad orders") {
  CHECK_THROWS(dfa(NoiseSource(1).draw(50)));
  DfaOptions o;
  o.order = 0;
  CHECK_THROWS(dfa(NoiseSource(1).draw(10000), o));
}

TEST_CASE("Hill estimator on Pareto tails") {
  const auto x = pareto(3.0, 200000, 4);
  const auto h = hill(x);
  CHECK(h.k == 10000);
  CHECK(h.alpha_hat == doctest::Approx(3.0).epsilon(0.05));
  CHECK_FALSE(h.trace.empty());
  const Eigen::VectorXd y = 17.0 * x;
  CHECK(hill(y).alpha_hat == doctest::Approx(h.alpha_hat).epsilon(1e-10));
  CHECK(hill(x, 500).k == 500);
  const Eigen::VectorXd neg = -x;  // |x| is used
  CHECK(hill(neg).alpha_hat == doctest::Approx(h.alpha_hat).epsilon(1e-12));
}

TEST_CASE("Kolmogorov distribution") {
  CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.0494).epsilon(0.01));
  CHECK(kolmogorov_survival(0.0) == 1.0);
  CHECK(kolmogorov_survival(10.0) < 1e-80);
}

TEST_CASE("one-sample p-values are uniform under the null") {
  std::vector<double> ps;
  for (std::uint64_t seed = 1; seed <= 400; ++seed) ps.push_back(ks_one_sample(NoiseSource(seed).draw(2000), normal_cdf).p_value);
  const Eigen::Map<Eigen::VectorXd> pv(ps.data(), Eigen::Index(ps.size()));
  const auto meta = ks_one_sample(pv, [](double u) { return std::clamp(u, 0.0, 1.0); });
  CHECK(meta.p_value > 0.01);
  const auto below = std::count_if(ps.begin(), ps.end(), [](double p) { return p < 0.05; });
  CHECK(below >= 8);
  CHECK(below <= 36);
}

TEST_CASE("KS reporting convention and sensitivity") {
  const Eigen::VectorXd x = NoiseSource(2).draw(5000);
  const auto r = ks_one_sample(x, normal_cdf);
  CHECK(r.p_star == doctest::Approx(1.0 - r.p_value).epsilon(1e-15));
  CHECK(r.n_effective == 5000.0);
  const Eigen::VectorXd shifted = x.array() + 0.2;
  CHECK(ks_one_sample(shifted, normal_cdf).p_value < 1e-6);
}

TEST_CASE("KS is invariant under monotone transforms") {
  const Eigen::VectorXd x = NoiseSource(5).draw(3000);
  const Eigen::VectorXd e = x.array().exp();
  const auto a = ks_one_sample(x, normal_cdf);
  const auto b = ks_one_sample(e, [](double y) { return normal_cdf(std::log(y)); });
  CHECK(b.D == doctest::Approx(a.D).epsilon(1e-12));
  const Eigen::VectorXd y = NoiseSource(6).draw(2000);
  const Eigen::VectorXd ey = y.array().exp();
  CHECK(ks_two_sample(e, ey).D == doctest::Approx(ks_two_sample(x, y).D).epsilon(1e-15));
}

TEST_CASE("two-sample extremes") {
  const Eigen::VectorXd x = NoiseSource(5).draw(1000);
  const auto same = ks_two_sample(x, x);
  CHECK(same.D == 0.0);
  CHECK(same.p_value == doctest::Approx(1.0));
  const Eigen::VectorXd far = x.array() + 100.0;
  const auto apart = ks_two_sample(x, far);
  CHECK(apart.D == 1.0);
  CHECK(apart.p_value < 1e-50);
  CHECK(ks_two_sample(x, NoiseSource(6).draw(700)).n_effective == doctest::Approx(1000.0 * 700.0 / 1700.0));
}

TEST_CASE("symmetrised KL of two Gaussians") {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(20001, -12.0, 12.0);
  auto pdf = [](double m) {
    return [m](double x) { return std::exp(-0.5 * (x - m) * (x - m)) / std::sqrt(2.0 * M_PI); };
  };
  const Eigen::VectorXd p = grid.unaryExpr(pdf(0.0));
  const Eigen::VectorXd q = grid.unaryExpr(pdf(0.1));
  const auto kl = symmetrized_kl(grid, p, q);
  CHECK(kl.value == doctest::Approx(0.005).epsilon(1e-6));
  CHECK(symmetrized_kl(grid, q, p).value == doctest::Approx(kl.value).epsilon(1e-14));
  CHECK(symmetrized_kl(grid, p, p).value == doctest::Approx(0.0));
  CHECK_FALSE(kl.mass_loss_warning);
}

}
