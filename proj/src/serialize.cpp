#include "tmarch/serialize.hpp"

#include <charconv>
#include <cmath>

#include "tmarch/errors.hpp"
#include "tmarch/memory_model.hpp"

namespace tmarch {

std::string format_double(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

void write_simulation_csv(const SimulationResult& r, std::ostream& out) {
  const bool has_v = r.v.size() == r.z.size();
  const bool has_regime = r.regime.size() == static_cast<std::size_t>(r.z.size());
  out << "t,z,sigma,v,regime\n";
  for (Eigen::Index t = 0; t < r.z.size(); ++t) {
    out << t << ',' << format_double(r.z[t]) << ',' << format_double(r.sigma[t]) << ',';
    if (has_v && std::isfinite(r.v[t])) out << format_double(r.v[t]);
    out << ',';
    if (has_regime) out << (r.regime[static_cast<std::size_t>(t)] ? 1 : 0);
    out << '\n';
  }
}

nlohmann::json simulation_to_json(const SimulationResult& r) {
  return {{"model", r.model},
          {"spec", r.spec},
          {"seed", r.seed},
          {"n", r.size()},
          {"warmup", r.warmup},
          {"metadata", r.metadata}};
}

SimulationResult replay_simulation(const nlohmann::json& j) {
  try {
    const std::string model = j.at("model").get<std::string>();
    const auto n = j.at("n").get<std::size_t>();
    const auto seed = j.at("seed").get<std::uint64_t>();
    const auto warmup = j.at("warmup").get<std::size_t>();
    if (model == "arch") return simulate_arch(arch_spec_from_json(j.at("spec")), n, warmup, NoiseSource(seed));
    if (model == "garch") return simulate_garch(garch_spec_from_json(j.at("spec")), n, warmup, NoiseSource(seed));
    if (model == "memory") {
      MemoryModelSpec spec = memory_spec_from_json(j.at("spec"));
      spec.warmup = warmup;
      return simulate_memory_model(spec, n, NoiseSource(seed));
    }
    throw ConfigError("replay: unknown model '" + model + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("replay: malformed document: ") + e.what());
  }
}

nlohmann::json to_json(const MomentSummary& m) {
  return {{"mean", m.mean}, {"variance", m.variance}, {"kurtosis", m.kurtosis}, {"count", m.count}};
}

nlohmann::json to_json(const DfaResult& d) {
  return {{"H", d.H},
          {"H_stderr", d.H_stderr},
          {"fit_r", d.fit_r},
          {"fit_range", {d.fit_range.first, d.fit_range.second}},
          {"ells", d.ells},
          {"F", std::vector<double>(d.F.data(), d.F.data() + d.F.size())}};
}

nlohmann::json to_json(const HillResult& h) {
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& [k, a] : h.trace) trace.push_back({k, a});
  return {{"k", h.k}, {"alpha", h.alpha_hat}, {"trace", trace}};
}

nlohmann::json to_json(const KsResult& k) {
  return {{"D", k.D}, {"p_value", k.p_value}, {"p_star", k.p_star}, {"n_effective", k.n_effective}};
}

void write_two_column_csv(std::ostream& out, std::string_view x_name, std::string_view y_name,
                          const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw DomainError("write_two_column_csv: column lengths differ");
  out << x_name << ',' << y_name << '\n';
  for (Eigen::Index i = 0; i < x.size(); ++i) out << format_double(x[i]) << ',' << format_double(y[i]) << '\n';
}

void write_dfa_csv(const DfaResult& d, std::ostream& out) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(d.ells.size()));
  for (std::size_t i = 0; i < d.ells.size(); ++i) x[static_cast<Eigen::Index>(i)] = std::log10(static_cast<double>(d.ells[i]));
  write_two_column_csv(out, "log10_ell", "log10_F", x, d.F.array().log10().matrix());
}

}  // namespace tmarch
