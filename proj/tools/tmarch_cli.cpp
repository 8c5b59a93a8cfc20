// Command-line front end: simulate, analyse, fit, ingest, run experiments.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tmarch/errors.hpp"
#include "tmarch/experiment.hpp"
#include "tmarch/gq.hpp"
#include "tmarch/gumbel.hpp"
#include "tmarch/ingest.hpp"
#include "tmarch/memory_model.hpp"
#include "tmarch/serialize.hpp"
#include "tmarch/stats.hpp"

namespace fs = std::filesystem;
using namespace tmarch;

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

Eigen::VectorXd read_column(const std::string& path, const std::string& column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  const auto rows = read_csv(in);
  if (rows.empty()) throw ConfigError(path + ": empty file");
  std::size_t idx = rows[0].size();
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    if (rows[0][i] == column) idx = i;
  }
  if (idx == rows[0].size()) throw ConfigError(path + ": no column '" + column + "'");
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size() - 1));
  Eigen::Index k = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() <= idx || rows[r][idx].empty()) continue;  // blank v/regime fields
    try {
      out[k++] = std::stod(rows[r][idx]);
    } catch (const std::exception&) {
      throw DataError(path + ": bad number at row " + std::to_string(r + 1));
    }
  }
  out.conservativeResize(k);
  return out;
}

// Bad model parameters from the command line are configuration errors.
template <class F>
void as_config_error(F&& f) {
  try {
    f();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
}

void write_json(const nlohmann::json& j, const std::string& out) {
  if (out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream f(out);
    if (!f) throw ConfigError("cannot write " + out);
    f << j.dump(2) << '\n';
  }
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) v.push_back(std::stod(item));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Threshold-memory ARCH simulation and analysis"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate a series; writes <out>.csv and <out>.json");
  std::string model = "memory", b_list = "0.5", c_list = "", kernel = "sum_to_impact", recall = "all_lags";
  std::string sim_out = "series";
  double a = 1.0, phi = 1.0;
  std::size_t window = 5, n = 400000;
  std::uint64_t seed = 1;
  std::optional<double> tau;
  sim->add_option("--model", model, "memory | arch | garch")->check(CLI::IsMember({"memory", "arch", "garch"}));
  sim->add_option("--a", a, "baseline variance");
  sim->add_option("--b", b_list, "impact (memory) or comma list of ARCH coefficients");
  sim->add_option("--c", c_list, "comma list of GARCH variance coefficients");
  sim->add_option("--W", window, "window length");
  sim->add_option("--phi", phi, "threshold in units of a/(1-b)");
  sim->add_option("--tau", tau, "kernel decay time (default W)");
  sim->add_option("--kernel", kernel)->check(CLI::IsMember({"sum_to_impact", "raw"}));
  sim->add_option("--recall", recall)->check(CLI::IsMember({"gated", "all_lags"}));
  sim->add_option("--n", n, "recorded length");
  sim->add_option("--seed", seed);
  sim->add_option("--out", sim_out, "output path prefix");

  // estimators
  std::string input, column = "z", est_out;
  auto* dfa_cmd = app.add_subcommand("dfa", "Hurst exponent of |column| by DFA");
  int order = 1;
  std::string dfa_csv;
  bool no_abs = false;
  dfa_cmd->add_option("input", input)->required();
  dfa_cmd->add_option("--column", column);
  dfa_cmd->add_option("--order", order);
  dfa_cmd->add_flag("--raw", no_abs, "analyse the column itself rather than its magnitude");
  dfa_cmd->add_option("--out", est_out, "JSON output file");
  dfa_cmd->add_option("--curve", dfa_csv, "log10 ell, log10 F csv");

  auto* hill_cmd = app.add_subcommand("hill", "Hill tail exponent");
  std::optional<std::size_t> hill_k;
  hill_cmd->add_option("input", input)->required();
  hill_cmd->add_option("--column", column);
  hill_cmd->add_option("--k", hill_k);
  hill_cmd->add_option("--out", est_out);

  auto* fit_cmd = app.add_subcommand("fit", "Maximum-likelihood fit of the q-family, or type-2 Gumbel with --gumbel");
  bool nu1 = false, gumbel = false;
  std::optional<double> cut;
  fit_cmd->add_option("input", input)->required();
  fit_cmd->add_option("--column", column);
  fit_cmd->add_flag("--nu1", nu1, "fix nu = 1");
  fit_cmd->add_flag("--gumbel", gumbel, "fit p(sigma) of the column (normalised by its mean)");
  fit_cmd->add_option("--cut", cut, "Gumbel fit upper cut (default: automatic crossover)");
  fit_cmd->add_option("--out", est_out);

  auto* ks_cmd = app.add_subcommand("ks", "Kolmogorov-Smirnov test");
  std::string against = "gauss", other_column;
  ks_cmd->add_option("input", input)->required();
  ks_cmd->add_option("--column", column);
  ks_cmd->add_option("--against", against, "gauss | fit | path of a second csv (two-sample, both standardised)");
  ks_cmd->add_option("--other-column", other_column, "column of the second csv (default: same)");
  ks_cmd->add_option("--out", est_out);

  auto* ingest_cmd = app.add_subcommand("ingest", "Price csv to log-returns csv (t,r)");
  PriceCsvOptions pco;
  std::string from, to, ingest_out = "returns.csv";
  bool standardize_flag = false;
  ingest_cmd->add_option("input", input)->required();
  ingest_cmd->add_option("--date-column", pco.date_column);
  ingest_cmd->add_option("--price-column", pco.price_column);
  ingest_cmd->add_option("--from", from, "first date, yyyy-mm-dd");
  ingest_cmd->add_option("--to", to, "last date, yyyy-mm-dd");
  ingest_cmd->add_flag("--standardize", standardize_flag);
  ingest_cmd->add_option("--out", ingest_out);

  auto* exp_cmd = app.add_subcommand("experiment", "Run a preset, an INI config or the config embedded in a report");
  std::string target, exp_out, data_csv, seeds;
  std::optional<std::size_t> exp_n, workers;
  exp_cmd->add_option("target", target)->required();
  exp_cmd->add_option("--seed", seeds, "comma list overriding the seed list");
  exp_cmd->add_option("--n", exp_n);
  exp_cmd->add_option("--out", exp_out, "output directory");
  exp_cmd->add_option("--workers", workers, "default: TMARCH_WORKERS or all cores");
  exp_cmd->add_option("--data", data_csv, "price csv for presets with a data comparison");

  app.add_subcommand("presets", "List experiment presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (sim->parsed()) {
      SimulationResult r;
      const auto bs = parse_list(b_list);
      if (model == "memory") {
        MemoryModelSpec s;
        s.a = a;
        if (bs.size() != 1) throw ConfigError("--b takes one value for the memory model");
        s.b = bs[0];
        s.window = window;
        s.tau = tau;
        s.phi_units = phi;
        s.kernel = kernel == "raw" ? KernelNormalization::kRaw : KernelNormalization::kSumToImpact;
        s.recall = recall == "gated" ? RecallNormalization::kGated : RecallNormalization::kAllLags;
        as_config_error([&] { s.validate(); });
        r = simulate_memory_model(s, n, NoiseSource(seed));
      } else if (model == "arch") {
        const ArchSpec s{a, bs};
        as_config_error([&] { s.validate(); });
        r = simulate_arch(s, n, std::nullopt, NoiseSource(seed));
      } else {
        const GarchSpec s{a, bs, c_list.empty() ? std::vector<double>{} : parse_list(c_list)};
        as_config_error([&] { s.validate(); });
        r = simulate_garch(s, n, std::nullopt, NoiseSource(seed));
      }
      std::ofstream csv(sim_out + ".csv");
      write_simulation_csv(r, csv);
      write_json(simulation_to_json(r), sim_out + ".json");
      std::cout << sim_out << ".csv, " << sim_out << ".json\n";
    } else if (dfa_cmd->parsed()) {
      Eigen::VectorXd x = read_column(input, column);
      if (!no_abs) x = x.cwiseAbs();
      DfaOptions o;
      o.order = order;
      const auto d = dfa(x, o);
      write_json(to_json(d), est_out);
      if (!dfa_csv.empty()) {
        std::ofstream f(dfa_csv);
        write_dfa_csv(d, f);
      }
    } else if (hill_cmd->parsed()) {
      write_json(to_json(hill(read_column(input, column), hill_k)), est_out);
    } else if (fit_cmd->parsed()) {
      const Eigen::VectorXd x = read_column(input, column);
      if (gumbel) {
        Gumbel2FitOptions o;
        o.cut = cut;
        auto j = to_json(fit_gumbel2(normalized_sigma(x), o));
        write_json(j, est_out);
      } else {
        GqFitOptions o;
        if (nu1) o.fix_nu = 1.0;
        write_json(to_json(fit_gq_mle(x, o)), est_out);
      }
    } else if (ks_cmd->parsed()) {
      const Eigen::VectorXd x = read_column(input, column);
      KsResult k;
      if (against == "gauss") {
        k = ks_one_sample(x, [](double v) { return 0.5 * std::erfc(-v / std::numbers::sqrt2); });
      } else if (against == "fit") {
        const auto f = fit_gq_mle(x);
        k = ks_one_sample(x, [&](double v) { return gq_cdf(f.params, v); });
      } else {
        const Eigen::VectorXd y = read_column(against, other_column.empty() ? column : other_column);
        k = ks_two_sample(standardize(ReturnSeries{x}).values, standardize(ReturnSeries{y}).values);
      }
      write_json(to_json(k), est_out);
    } else if (ingest_cmd->parsed()) {
      if (!from.empty()) pco.from = from;
      if (!to.empty()) pco.to = to;
      auto r = log_returns(load_price_csv(input, pco));
      if (standardize_flag) r = standardize(r);
      std::ofstream f(ingest_out);
      write_returns_csv(r, f);
      std::cout << r.values.size() << " returns -> " << ingest_out << '\n';
    } else if (exp_cmd->parsed()) {
      ExperimentConfig c;
      if (fs::exists(target)) {
        if (fs::path(target).extension() == ".json") {
          std::ifstream in(target);
          const auto j = nlohmann::json::parse(in);
          std::istringstream ini(j.at("config").get<std::string>());
          c = parse_config(ini);
        } else {
          c = load_config(target);
        }
      } else {
        c = preset_config(target);
      }
      if (!seeds.empty()) {
        c.seeds.clear();
        for (double s : parse_list(seeds)) c.seeds.push_back(static_cast<std::uint64_t>(s));
      }
      if (exp_n) c.n = *exp_n;
      if (!data_csv.empty()) {
        if (!c.data) c.data = DataSource{};
        c.data->csv = data_csv;
      }
      c.validate();
      const std::string dir = !exp_out.empty() ? exp_out : (!c.output_dir.empty() ? c.output_dir : "out/" + c.name);
      RunOptions ro;
      if (workers) ro.workers = *workers;
      ro.progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
      const auto report = run_experiment_to(c, dir, ro);
      if (report.cells.size() > 1) {
        try {
          const auto t = emit_table1({report});
          std::ofstream(fs::path(dir) / "table1.csv") << t.csv();
          std::ofstream(fs::path(dir) / "table1.txt") << t.text();
          std::cout << t.text();
        } catch (const InsufficientDataError&) {
          // not a full W x phi grid
        }
      }
      for (const auto& cell : report.cells) {
        std::cout << cell.label;
        for (const char* k : {"q", "q_nu1", "H", "beta", "zeta", "ks_pstar", "data_D"}) {
          if (cell.aggregates.count(k)) std::cout << "  " << k << "=" << cell.aggregates.at(k).median;
        }
        std::cout << '\n';
      }
      std::cout << "report: " << (fs::path(dir) / "report.json").string() << " (hash " << report.config_hash << ")\n";
      if (report.failures > 0) {
        std::cerr << report.failures << " job(s) failed\n";
        return kNumericalError;
      }
    } else {
      for (const auto& p : preset_names()) std::cout << p << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: bad number: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  }
  return 0;
}
