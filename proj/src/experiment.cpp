#include "tmarch/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <Eigen/Core>

#include "tmarch/errors.hpp"
#include "tmarch/gq.hpp"
#include "tmarch/gumbel.hpp"
#include "tmarch/serialize.hpp"
#include "tmarch/stats.hpp"

namespace tmarch {

namespace {

constexpr const char* kVersion = "1.0.0";

using Ptree = boost::property_tree::ptree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a number, got '" + s + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& s) {
  try {
    std::size_t pos = 0;
    if (!s.empty() && s[0] != '-') {
      const auto v = std::stoull(s, &pos);
      if (pos == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + s + "'");
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + s + "'");
}

std::vector<double> to_doubles(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(to_double(key, item));
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

template <class T>
std::string join_int(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

// Reads the keys of one section, rejecting anything not in `allowed`.
std::map<std::string, std::string> section(const Ptree& root, const std::string& name,
                                           const std::set<std::string>& allowed) {
  std::map<std::string, std::string> out;
  const auto child = root.get_child_optional(name);
  if (!child) return out;
  for (const auto& [key, value] : *child) {
    if (!allowed.count(key)) throw ConfigError("config: unknown key '" + key + "' in [" + name + "]");
    if (!value.empty()) throw ConfigError("config: nested value under '" + key + "'");
    out[key] = trim(value.data());
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: seed list is empty");
  if (n < 1) throw ConfigError("config: n must be >= 1");
  if (dfa_order < 0) throw ConfigError("config: dfa_order must be >= 0");
  const bool grid = !grid_windows.empty() || !grid_phis.empty();
  if (grid && !std::holds_alternative<MemoryModelSpec>(model)) {
    throw ConfigError("config: a [grid] needs the memory model");
  }
  if (analyses.ks && !analyses.gqfit && !analyses.gqfit_nu1) throw ConfigError("config: ks needs gqfit or gqfit_nu1");
  try {
    for (const auto& cell : cells()) std::visit([](const auto& s) { s.validate(); }, cell.model);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: invalid model: ") + e.what());
  }
}

std::vector<GridCell> ExperimentConfig::cells() const {
  if (grid_windows.empty() && grid_phis.empty()) {
    std::string label = "model";
    if (const auto* m = std::get_if<MemoryModelSpec>(&model)) {
      label = "W=" + std::to_string(m->window) + ",phi=" + format_double(m->phi_units);
    }
    return {{label, model}};
  }
  const auto& base = std::get<MemoryModelSpec>(model);
  const std::vector<std::size_t> ws = grid_windows.empty() ? std::vector<std::size_t>{base.window} : grid_windows;
  const std::vector<double> ps = grid_phis.empty() ? std::vector<double>{base.phi_units} : grid_phis;
  std::vector<GridCell> out;
  for (std::size_t w : ws) {
    for (double p : ps) {
      MemoryModelSpec s = base;
      s.window = w;
      s.phi_units = p;
      if (base.tau) s.tau = static_cast<double>(w) * (*base.tau / static_cast<double>(base.window));
      out.push_back({"W=" + std::to_string(w) + ",phi=" + format_double(p), s});
    }
  }
  return out;
}

ExperimentConfig parse_config(std::istream& in) {
  Ptree root;
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  static const std::set<std::string> sections{"experiment", "model", "grid", "analysis", "data"};
  for (const auto& [name, child] : root) {
    if (!sections.count(name)) throw ConfigError("config: unknown section [" + name + "]");
    if (child.empty()) throw ConfigError("config: key '" + name + "' outside a section");
  }

  ExperimentConfig c;
  for (const auto& [k, v] : section(root, "experiment", {"name", "n", "seeds", "output", "dfa_order"})) {
    if (k == "name") c.name = v;
    if (k == "n") c.n = to_uint(k, v);
    if (k == "output") c.output_dir = v;
    if (k == "dfa_order") c.dfa_order = static_cast<int>(to_uint(k, v));
    if (k == "seeds") {
      c.seeds.clear();
      for (const auto& s : split_list(v)) c.seeds.push_back(to_uint(k, s));
    }
  }

  const auto model = section(root, "model", {"type", "a", "b", "c", "W", "tau", "phi", "cutoff_mult", "warmup",
                                              "recall_cap", "kernel", "recall"});
  const std::string type = model.count("type") ? model.at("type") : "memory";
  const auto has = [&](const char* k) { return model.count(k) > 0; };
  const auto reject = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
      if (has(k)) throw ConfigError("config: key '" + std::string(k) + "' does not apply to model '" + type + "'");
    }
  };
  if (type == "memory") {
    reject({"c"});
    MemoryModelSpec s;
    if (has("a")) s.a = to_double("a", model.at("a"));
    if (has("b")) s.b = to_double("b", model.at("b"));
    if (has("W")) s.window = to_uint("W", model.at("W"));
    if (has("tau")) s.tau = to_double("tau", model.at("tau"));
    if (has("phi")) s.phi_units = to_double("phi", model.at("phi"));
    if (has("cutoff_mult")) s.cutoff_mult = to_uint("cutoff_mult", model.at("cutoff_mult"));
    if (has("warmup")) s.warmup = to_uint("warmup", model.at("warmup"));
    if (has("recall_cap")) s.recall_cap = to_uint("recall_cap", model.at("recall_cap"));
    if (has("kernel")) {
      const auto& k = model.at("kernel");
      if (k == "sum_to_impact") s.kernel = KernelNormalization::kSumToImpact;
      else if (k == "raw") s.kernel = KernelNormalization::kRaw;
      else throw ConfigError("config: kernel must be sum_to_impact or raw");
    }
    if (has("recall")) {
      const auto& r = model.at("recall");
      if (r == "gated") s.recall = RecallNormalization::kGated;
      else if (r == "all_lags") s.recall = RecallNormalization::kAllLags;
      else throw ConfigError("config: recall must be gated or all_lags");
    }
    c.model = s;
  } else if (type == "arch" || type == "garch") {
    reject({"W", "tau", "phi", "cutoff_mult", "recall_cap", "kernel", "recall"});
    if (type == "arch") {
      reject({"c"});
      ArchSpec s;
      if (has("a")) s.a = to_double("a", model.at("a"));
      if (has("b")) s.b = to_doubles("b", model.at("b"));
      c.model = s;
    } else {
      GarchSpec s;
      if (has("a")) s.a = to_double("a", model.at("a"));
      if (has("b")) s.b = to_doubles("b", model.at("b"));
      if (has("c")) s.c = to_doubles("c", model.at("c"));
      c.model = s;
    }
    if (has("warmup")) throw ConfigError("config: warmup for arch/garch is set by the order; key not supported");
  } else {
    throw ConfigError("config: unknown model type '" + type + "'");
  }

  for (const auto& [k, v] : section(root, "grid", {"W", "phi"})) {
    if (k == "W") {
      for (const auto& s : split_list(v)) c.grid_windows.push_back(to_uint(k, s));
    } else {
      c.grid_phis = to_doubles(k, v);
    }
  }

  for (const auto& [k, v] : section(root, "analysis",
                                    {"dfa", "hill", "gqfit", "gqfit_nu1", "gumbel", "ks", "ks_gauss", "acf"})) {
    const bool b = to_bool(k, v);
    if (k == "dfa") c.analyses.dfa = b;
    if (k == "hill") c.analyses.hill = b;
    if (k == "gqfit") c.analyses.gqfit = b;
    if (k == "gqfit_nu1") c.analyses.gqfit_nu1 = b;
    if (k == "gumbel") c.analyses.gumbel = b;
    if (k == "ks") c.analyses.ks = b;
    if (k == "ks_gauss") c.analyses.ks_gauss = b;
    if (k == "acf") c.analyses.acf = b;
  }

  const auto data = section(root, "data", {"csv", "date_column", "price_column", "from", "to"});
  if (!data.empty()) {
    DataSource d;
    for (const auto& [k, v] : data) {
      if (k == "csv") d.csv = v;
      if (k == "date_column") d.columns.date_column = v;
      if (k == "price_column") d.columns.price_column = v;
      if (k == "from") d.columns.from = v;
      if (k == "to") d.columns.to = v;
    }
    c.data = d;
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in);
}

std::string to_ini(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "[experiment]\nname = " << c.name << "\nn = " << c.n << "\nseeds = " << join_int(c.seeds)
    << "\ndfa_order = " << c.dfa_order << "\n";
  if (!c.output_dir.empty()) o << "output = " << c.output_dir << "\n";
  o << "\n[model]\n";
  if (const auto* m = std::get_if<MemoryModelSpec>(&c.model)) {
    o << "type = memory\na = " << format_double(m->a) << "\nb = " << format_double(m->b) << "\nW = " << m->window
      << "\n";
    if (m->tau) o << "tau = " << format_double(*m->tau) << "\n";
    o << "phi = " << format_double(m->phi_units) << "\ncutoff_mult = " << m->cutoff_mult << "\n";
    if (m->warmup) o << "warmup = " << *m->warmup << "\n";
    if (m->recall_cap) o << "recall_cap = " << *m->recall_cap << "\n";
    o << "kernel = " << (m->kernel == KernelNormalization::kRaw ? "raw" : "sum_to_impact") << "\n";
    o << "recall = " << (m->recall == RecallNormalization::kGated ? "gated" : "all_lags") << "\n";
  } else if (const auto* a = std::get_if<ArchSpec>(&c.model)) {
    o << "type = arch\na = " << format_double(a->a) << "\nb = " << join(a->b) << "\n";
  } else {
    const auto& g = std::get<GarchSpec>(c.model);
    o << "type = garch\na = " << format_double(g.a) << "\nb = " << join(g.b) << "\nc = " << join(g.c) << "\n";
  }
  if (!c.grid_windows.empty() || !c.grid_phis.empty()) {
    o << "\n[grid]\n";
    if (!c.grid_windows.empty()) o << "W = " << join_int(c.grid_windows) << "\n";
    if (!c.grid_phis.empty()) o << "phi = " << join(c.grid_phis) << "\n";
  }
  const auto& an = c.analyses;
  const auto tf = [](bool b) { return b ? "true" : "false"; };
  o << "\n[analysis]\ndfa = " << tf(an.dfa) << "\nhill = " << tf(an.hill) << "\ngqfit = " << tf(an.gqfit)
    << "\ngqfit_nu1 = " << tf(an.gqfit_nu1) << "\ngumbel = " << tf(an.gumbel) << "\nks = " << tf(an.ks)
    << "\nks_gauss = " << tf(an.ks_gauss) << "\nacf = " << tf(an.acf) << "\n";
  if (c.data) {
    o << "\n[data]\n";
    if (!c.data->csv.empty()) o << "csv = " << c.data->csv << "\n";
    o << "date_column = " << c.data->columns.date_column << "\nprice_column = " << c.data->columns.price_column
      << "\n";
    if (c.data->columns.from) o << "from = " << *c.data->columns.from << "\n";
    if (c.data->columns.to) o << "to = " << *c.data->columns.to << "\n";
  }
  return o.str();
}

std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : to_ini(c)) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

// ---------------------------------------------------------------------------
// Presets

namespace {

ExperimentConfig memory_preset(const std::string& name, double b, std::size_t w, double phi) {
  ExperimentConfig c;
  c.name = name;
  MemoryModelSpec s;
  s.b = b;
  s.window = w;
  s.phi_units = phi;
  c.model = s;
  return c;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"homoscedastic", "arch1",    "garch11",     "fig1_upper",  "fig1_middle",   "fig1_lower",
          "fig2_grid",     "fig3",     "fig4_upper",  "fig4_gumbel", "fig4_gumbel_b0998", "sp500",
          "sp500_caption"};
}

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  if (name == "homoscedastic") {
    c = memory_preset(name, 0.0, 5, 1.0);
    c.analyses = {};
    c.analyses.hill = c.analyses.gqfit = c.analyses.ks = false;
    c.analyses.ks_gauss = true;
  } else if (name == "arch1") {
    c.name = name;
    c.model = ArchSpec{1.0, {0.5}};
    c.analyses = {};
    c.analyses.dfa = c.analyses.hill = c.analyses.gqfit = c.analyses.ks = false;
    c.analyses.acf = true;
  } else if (name == "garch11") {
    c.name = name;
    c.model = GarchSpec{1.0, {0.1}, {0.8}};
    c.analyses = {};
    c.analyses.dfa = c.analyses.hill = c.analyses.gqfit = c.analyses.ks = false;
    c.analyses.acf = true;
  } else if (name == "fig1_upper") {
    c = memory_preset(name, 0.5, 5, 0.1);
  } else if (name == "fig1_middle") {
    c = memory_preset(name, 0.5, 5, 5.0);
  } else if (name == "fig1_lower") {
    c = memory_preset(name, 0.5, 75, 2.0);
  } else if (name == "fig2_grid") {
    c = memory_preset(name, 0.998, 10, 0.25);
    c.grid_windows = {10, 25, 75, 125};
    c.grid_phis = {0.25, 0.5, 0.6, 0.75, 1.25, 2.5, 5.0};
    c.analyses.hill = false;
  } else if (name == "fig3") {
    c = memory_preset(name, 0.998, 75, 0.25);
    c.analyses.gqfit_nu1 = true;
  } else if (name == "fig4_upper") {
    c = memory_preset(name, 0.9998, 75, 0.25);
    c.analyses.gqfit_nu1 = true;
  } else if (name == "fig4_gumbel") {
    c = memory_preset(name, 0.9998, 25, 2.5);
    c.analyses.gumbel = true;
  } else if (name == "fig4_gumbel_b0998") {
    c = memory_preset(name, 0.998, 25, 2.5);
    c.analyses.gumbel = true;
  } else if (name == "sp500" || name == "sp500_caption") {
    c = memory_preset(name, name == "sp500" ? 0.9998 : 0.998, 22, 1.125);
    DataSource d;
    d.columns.from = "1950-01-03";
    d.columns.to = "2010-04-12";
    c.data = d;
  } else {
    std::string known;
    for (const auto& p : preset_names()) known += " " + p;
    throw ConfigError("unknown preset '" + name + "'; known:" + known);
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Running

Eigen::VectorXd normalized_sigma(const Eigen::Ref<const Eigen::VectorXd>& sigma) {
  if (sigma.size() == 0) throw InsufficientDataError("normalized_sigma: empty series");
  const double m = sigma.mean();
  if (!(m > 0.0)) throw DomainError("normalized_sigma: mean must be > 0");
  return sigma / m;
}

std::size_t default_workers() {
  if (const char* env = std::getenv("TMARCH_WORKERS")) {
    try {
      const auto v = std::stoul(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct Curves {
  Histogram z_hist;
  Eigen::VectorXd z_fit;
  DfaResult dfa;
  LogDensity sigma;
  bool has_fit = false;
  bool has_dfa = false;
  bool has_sigma = false;
};

struct Prepared {
  std::optional<ReturnSeries> data;  // standardized returns
};

SimulationResult simulate(const ModelSpec& model, std::size_t n, std::uint64_t seed) {
  return std::visit(
      [&](const auto& s) -> SimulationResult {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ArchSpec>) return simulate_arch(s, n, std::nullopt, NoiseSource(seed));
        else if constexpr (std::is_same_v<T, GarchSpec>) return simulate_garch(s, n, std::nullopt, NoiseSource(seed));
        else return simulate_memory_model(s, n, NoiseSource(seed));
      },
      model);
}

void record_fit(std::map<std::string, double>& m, const GqFit& f, const std::string& suffix) {
  m["q_prime" + suffix] = f.params.q_prime;
  m["nu" + suffix] = f.params.nu;
  m["B" + suffix] = f.params.B;
  m["q" + suffix] = f.q_tail;
  m["chi2_per_bin" + suffix] = f.chi2_per_bin;
  m["r2" + suffix] = f.r2;
  m["loglik" + suffix] = f.loglik;
}

void record_ks(std::map<std::string, double>& m, const KsResult& k, const std::string& prefix) {
  m[prefix + "_D"] = k.D;
  m[prefix + "_p"] = k.p_value;
  m[prefix + "_pstar"] = k.p_star;
}

// Runs `f`, appending "name: what" to `errors` on failure.
template <class F>
void guarded(std::string& errors, const char* name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    if (!errors.empty()) errors += "; ";
    errors += std::string(name) + ": " + e.what();
  }
}

std::map<std::string, double> analyze_series(const Eigen::VectorXd& z, const AnalysisToggles& an, int dfa_order,
                                             std::string& errors, Curves* curves) {
  std::map<std::string, double> m;
  guarded(errors, "moments", [&] {
    const auto mo = moments(z);
    m["variance"] = mo.variance;
    m["kurtosis"] = mo.kurtosis;
  });
  if (an.dfa) {
    guarded(errors, "dfa", [&] {
      DfaOptions o;
      o.order = dfa_order;
      const auto d = dfa(z.cwiseAbs(), o);
      m["H"] = d.H;
      m["H_stderr"] = d.H_stderr;
      m["dfa_r"] = d.fit_r;
      if (curves) {
        curves->dfa = d;
        curves->has_dfa = true;
      }
    });
  }
  if (an.hill) guarded(errors, "hill", [&] { m["hill_alpha"] = hill(z).alpha_hat; });
  std::optional<GqFit> fit;
  if (an.gqfit) {
    guarded(errors, "gqfit", [&] {
      fit = fit_gq_mle(z);
      record_fit(m, *fit, "");
      m["hill_crosscheck"] = fit->hill_crosscheck;
    });
  }
  if (an.gqfit_nu1) {
    guarded(errors, "gqfit_nu1", [&] {
      GqFitOptions o;
      o.fix_nu = 1.0;
      const auto f1 = fit_gq_mle(z, o);
      record_fit(m, f1, "_nu1");
      if (!an.gqfit) fit = f1;
    });
  }
  if (an.ks && fit) {
    guarded(errors, "ks", [&] {
      Eigen::VectorXd sorted = z;
      std::sort(sorted.begin(), sorted.end());
      const Eigen::VectorXd cdf = gq_cdf(fit->params, sorted.array()).matrix();
      record_ks(m, ks_one_sample_sorted(sorted, cdf), "ks");
    });
  }
  if (an.ks_gauss) {
    guarded(errors, "ks_gauss", [&] {
      const auto phi = [](double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); };
      record_ks(m, ks_one_sample(z, phi), "gauss");
    });
  }
  if (an.acf) {
    guarded(errors, "acf", [&] { m["acf_time"] = fit_exp_time(acf(z.array().square().matrix(), 60)); });
  }
  if (curves && fit) {
    guarded(errors, "curves", [&] {
      curves->z_hist = make_histogram(z);
      curves->z_fit.resize(curves->z_hist.centers.size());
      for (Eigen::Index i = 0; i < curves->z_fit.size(); ++i) {
        curves->z_fit[i] = gq_pdf(fit->params, curves->z_hist.centers[i]);
      }
      curves->has_fit = true;
    });
  }
  return m;
}

SeedResult run_job(const GridCell& cell, std::uint64_t seed, const ExperimentConfig& c, const Prepared& prep,
                   Curves* curves) {
  SeedResult out;
  out.seed = seed;
  SimulationResult r;
  try {
    r = simulate(cell.model, c.n, seed);
  } catch (const std::exception& e) {
    out.error = std::string("simulate: ") + e.what();
    return out;
  }
  out.metrics = analyze_series(r.z, c.analyses, c.dfa_order, out.error, curves);
  if (r.model == "memory") {
    const double n = static_cast<double>(r.size());
    out.metrics["memory_fraction"] = r.metadata.at("memory_steps").get<double>() / n;
    out.metrics["fallback_steps"] = r.metadata.at("fallback_steps").get<double>();
  }
  if (c.analyses.acf) out.metrics["mean_sigma2"] = r.sigma.array().square().mean();
  if (c.analyses.gumbel) {
    guarded(out.error, "gumbel", [&] {
      const Eigen::VectorXd s = normalized_sigma(r.sigma);
      const auto g = fit_gumbel2(s);
      out.metrics["beta"] = g.params.beta;
      out.metrics["zeta"] = g.params.zeta;
      out.metrics["beta_stderr"] = g.beta_stderr;
      out.metrics["zeta_stderr"] = g.zeta_stderr;
      out.metrics["gumbel_cut"] = std::isfinite(g.cut) ? g.cut : std::numeric_limits<double>::quiet_NaN();
      out.metrics["gumbel_slope_beyond_cut"] = g.slope_beyond_cut;
      out.metrics["tail_exponent_predicted"] = predict_tail_from_sigma(g.params).exponent;
      if (curves) {
        curves->sigma = log_binned_density(s, 60);
        curves->has_sigma = true;
      }
    });
  }
  if (prep.data) {
    guarded(out.error, "ks_data", [&] {
      ReturnSeries rs;
      rs.values = r.z;
      const auto zs = standardize(rs);
      record_ks(out.metrics, ks_two_sample(zs.values, prep.data->values), "data");
    });
  }
  // Drop NaN so aggregates and JSON stay clean.
  for (auto it = out.metrics.begin(); it != out.metrics.end();) {
    it = std::isfinite(it->second) ? std::next(it) : out.metrics.erase(it);
  }
  return out;
}

Aggregate aggregate(std::vector<double> v) {
  Aggregate a;
  a.count = v.size();
  if (v.empty()) return a;
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  a.median = k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
  a.min = v.front();
  a.max = v.back();
  if (k > 1) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(k);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    a.stddev = std::sqrt(ss / static_cast<double>(k - 1));
  }
  return a;
}

nlohmann::json spec_json(const ModelSpec& m) {
  return std::visit([](const auto& s) { return to_json(s); }, m);
}

std::string model_name(const ModelSpec& m) {
  if (std::holds_alternative<ArchSpec>(m)) return "arch";
  if (std::holds_alternative<GarchSpec>(m)) return "garch";
  return "memory";
}

ExperimentReport run_impl(const ExperimentConfig& config, const RunOptions& options, std::vector<Curves>* curves) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  report.config_hash = config_hash(config);

  Prepared prep;
  if (config.data) {
    if (config.data->csv.empty()) {
      if (options.progress) options.progress("no price csv given; data comparison skipped");
    } else {
      const auto prices = load_price_csv(config.data->csv, config.data->columns);
      const auto returns = log_returns(prices);
      DataReport dr;
      dr.source = config.data->csv;
      dr.returns = static_cast<std::size_t>(returns.values.size());
      const auto std_returns = standardize(returns);
      std::string errors;
      AnalysisToggles an = config.analyses;
      an.ks_gauss = an.acf = false;
      dr.metrics = analyze_series(std_returns.values, an, config.dfa_order, errors, nullptr);
      if (!errors.empty()) throw FitFailure("data analysis: " + errors);
      report.data = dr;
      prep.data = std_returns;
    }
  }

  const auto cells = config.cells();
  struct Job {
    std::size_t cell;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    for (std::size_t si = 0; si < config.seeds.size(); ++si) jobs.push_back({ci, si});
  }
  std::vector<SeedResult> results(jobs.size());
  if (curves) curves->assign(cells.size(), Curves{});

  std::atomic<std::size_t> next{0};
  std::mutex progress_mutex;
  const auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto& job = jobs[j];
      Curves* cv = (curves && job.seed == 0) ? &(*curves)[job.cell] : nullptr;
      results[j] = run_job(cells[job.cell], config.seeds[job.seed], config, prep, cv);
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        options.progress(cells[job.cell].label + " seed " + std::to_string(config.seeds[job.seed]) +
                         (results[j].error.empty() ? "" : " FAILED: " + results[j].error));
      }
    }
  };
  const std::size_t nw = std::min(options.workers ? options.workers : default_workers(), jobs.size());
  if (nw <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < nw; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    CellReport cr;
    cr.label = cells[ci].label;
    cr.model = model_name(cells[ci].model);
    cr.spec = spec_json(cells[ci].model);
    std::map<std::string, std::vector<double>> values;
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      SeedResult& r = results[ci * config.seeds.size() + si];
      if (!r.error.empty()) ++report.failures;
      for (const auto& [k, v] : r.metrics) values[k].push_back(v);
      cr.seeds.push_back(std::move(r));
    }
    for (auto& [k, v] : values) cr.aggregates[k] = aggregate(std::move(v));
    report.cells.push_back(std::move(cr));
  }
  return report;
}

void write_curves(const std::vector<Curves>& curves, const ExperimentReport& report, const std::filesystem::path& dir) {
  for (std::size_t i = 0; i < curves.size(); ++i) {
    std::string stem = report.cells[i].label;
    std::replace(stem.begin(), stem.end(), ',', '_');
    std::replace(stem.begin(), stem.end(), '=', '-');
    const auto& c = curves[i];
    if (c.has_fit) {
      std::ofstream f(dir / (stem + "_density.csv"));
      f << "z,empirical,fit\n";
      for (Eigen::Index k = 0; k < c.z_hist.centers.size(); ++k) {
        f << format_double(c.z_hist.centers[k]) << ',' << format_double(c.z_hist.density[k]) << ','
          << format_double(c.z_fit[k]) << '\n';
      }
    }
    if (c.has_dfa) {
      std::ofstream f(dir / (stem + "_dfa.csv"));
      write_dfa_csv(c.dfa, f);
    }
    if (c.has_sigma) {
      std::ofstream f(dir / (stem + "_sigma.csv"));
      write_two_column_csv(f, "sigma", "density", c.sigma.centers, c.sigma.density);
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  return run_impl(config, options, nullptr);
}

ExperimentReport run_experiment_to(const ExperimentConfig& config, const std::filesystem::path& dir,
                                   const RunOptions& options) {
  std::vector<Curves> curves;
  auto report = run_impl(config, options, &curves);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.json") << to_json(report).dump(2) << '\n';
  write_curves(curves, report, dir);
  return report;
}

double CellReport::median(const std::string& metric) const {
  const auto it = aggregates.find(metric);
  if (it == aggregates.end() || it->second.count == 0) {
    throw InsufficientDataError("cell " + label + ": no values for '" + metric + "'");
  }
  return it->second.median;
}

const CellReport& ExperimentReport::cell(const std::string& label) const {
  for (const auto& c : cells) {
    if (c.label == label) return c;
  }
  throw InsufficientDataError("report: no cell '" + label + "'");
}

nlohmann::json to_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["name"] = r.config.name;
  j["config_hash"] = r.config_hash;
  j["config"] = to_ini(r.config);
  j["versions"] = {{"tmarch", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["failures"] = r.failures;
  j["cells"] = nlohmann::json::array();
  for (const auto& c : r.cells) {
    nlohmann::json cj;
    cj["label"] = c.label;
    cj["model"] = c.model;
    cj["spec"] = c.spec;
    cj["aggregates"] = nlohmann::json::object();
    for (const auto& [k, a] : c.aggregates) {
      cj["aggregates"][k] = {{"median", a.median}, {"min", a.min}, {"max", a.max}, {"stddev", a.stddev},
                             {"count", a.count}};
    }
    cj["seeds"] = nlohmann::json::array();
    for (const auto& s : c.seeds) {
      nlohmann::json sj{{"seed", s.seed}, {"metrics", s.metrics}};
      if (!s.error.empty()) sj["error"] = s.error;
      cj["seeds"].push_back(sj);
    }
    j["cells"].push_back(cj);
  }
  if (r.data) {
    j["data"] = {{"source", r.data->source}, {"returns", r.data->returns}, {"metrics", r.data->metrics}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Table 1

std::string Table1::csv() const {
  std::ostringstream o;
  o << "W,phi,P_star\n";
  for (const auto& r : rows) o << r.W << ',' << format_double(r.phi) << ',' << std::fixed << std::setprecision(4) << r.p_star << std::defaultfloat << '\n';
  return o.str();
}

std::string Table1::text() const {
  std::vector<std::size_t> ws;
  for (const auto& r : rows) {
    if (std::find(ws.begin(), ws.end(), r.W) == ws.end()) ws.push_back(r.W);
  }
  const std::size_t half = (ws.size() + 1) / 2;
  const auto block = [&](std::size_t from, std::size_t to) {
    std::vector<std::string> lines;
    for (std::size_t wi = from; wi < to; ++wi) {
      bool first = true;
      for (const auto& r : rows) {
        if (r.W != ws[wi]) continue;
        std::ostringstream l;
        l << std::left << std::setw(5) << (first ? std::to_string(r.W) : "") << std::setw(7) << format_double(r.phi)
          << std::fixed << std::setprecision(4) << r.p_star;
        lines.push_back(l.str());
        first = false;
      }
    }
    return lines;
  };
  const auto left = block(0, half);
  const auto right = block(half, ws.size());
  std::ostringstream o;
  const std::string head = "W    phi    P*_KS ";
  o << head << "    " << (right.empty() ? "" : head) << '\n';
  for (std::size_t i = 0; i < std::max(left.size(), right.size()); ++i) {
    std::string l = i < left.size() ? left[i] : "";
    l.resize(head.size(), ' ');
    o << l << "    " << (i < right.size() ? right[i] : "") << '\n';
  }
  std::string s = o.str();
  // strip trailing blanks per line
  std::string out;
  std::istringstream in(s);
  for (std::string line; std::getline(in, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    out += line + '\n';
  }
  return out;
}

Table1 emit_table1(const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) throw InsufficientDataError("table1: empty report set");
  Table1 t;
  for (const auto& rep : reports) {
    for (const auto& c : rep.cells) {
      if (c.model != "memory" || !c.aggregates.count("ks_pstar") || c.aggregates.at("ks_pstar").count == 0) continue;
      t.rows.push_back({c.spec.at("W").get<std::size_t>(), c.spec.at("phi").get<double>(), c.median("ks_pstar")});
    }
  }
  const auto grid = preset_config("fig2_grid");
  std::vector<std::string> missing;
  for (std::size_t w : grid.grid_windows) {
    for (double p : grid.grid_phis) {
      const bool found = std::any_of(t.rows.begin(), t.rows.end(), [&](const auto& r) { return r.W == w && r.phi == p; });
      if (!found) missing.push_back("W=" + std::to_string(w) + ",phi=" + format_double(p));
    }
  }
  if (!missing.empty()) {
    std::string msg = "table1: missing cells:";
    for (const auto& m : missing) msg += " " + m;
    throw InsufficientDataError(msg);
  }
  std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
    return a.W != b.W ? a.W < b.W : a.phi < b.phi;
  });
  return t;
}

}  // namespace tmarch
