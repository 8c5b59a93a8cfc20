#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tmarch/ingest.hpp"
#include "tmarch/memory_model.hpp"
#include "tmarch/process_models.hpp"

namespace tmarch {

using ModelSpec = std::variant<ArchSpec, GarchSpec, MemoryModelSpec>;

struct AnalysisToggles {
  bool dfa = true;
  bool hill = true;
  bool gqfit = true;      // nu free
  bool gqfit_nu1 = false; // nu fixed at 1
  bool gumbel = false;
  bool ks = true;         // z against the fitted density
  bool ks_gauss = false;  // z against N(0, 1)
  bool acf = false;       // z^2 autocorrelation time, mean sigma^2
};

struct DataSource {
  std::string csv;  // empty: supplied at run time or skipped
  PriceCsvOptions columns;
};

struct GridCell {
  std::string label;
  ModelSpec model;
};

/// One model (optionally swept over a W x phi grid for the memory model),
/// a seed list and the analyses to run on every series.
struct ExperimentConfig {
  std::string name = "custom";
  ModelSpec model = MemoryModelSpec{};
  std::vector<std::size_t> grid_windows;
  std::vector<double> grid_phis;
  std::size_t n = 400000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  AnalysisToggles analyses;
  std::optional<DataSource> data;
  std::string output_dir;
  int dfa_order = 1;

  /// Throws ConfigError.
  void validate() const;
  /// Grid expansion; a single cell when no grid is set.
  std::vector<GridCell> cells() const;
};

/// Flat INI with sections [experiment], [model], [grid], [analysis], [data].
/// Unknown sections or keys are errors.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical INI text; parse_config(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& c);
/// FNV-1a 64 of to_ini, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset_config(const std::string& name);

struct Aggregate {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
  std::string error;  // empty on success
};

struct CellReport {
  std::string label;
  nlohmann::json spec;
  std::string model;
  std::vector<SeedResult> seeds;
  std::map<std::string, Aggregate> aggregates;

  /// Median of a metric; throws InsufficientDataError when absent.
  double median(const std::string& metric) const;
};

struct DataReport {
  std::string source;
  std::size_t returns = 0;
  std::map<std::string, double> metrics;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string config_hash;
  std::vector<CellReport> cells;
  std::optional<DataReport> data;
  std::size_t failures = 0;

  const CellReport& cell(const std::string& label) const;
};

struct RunOptions {
  /// 0 means TMARCH_WORKERS, else the hardware concurrency.
  std::size_t workers = 0;
  std::function<void(const std::string&)> progress;
  /// Keep one series per cell (first seed) for plot files.
  bool keep_curves = false;
};

/// Runs every (cell, seed) job; analysis failures are recorded per seed and
/// counted in `failures`, not thrown.
ExperimentReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Same, writing report.json and plot CSVs under `dir`.
ExperimentReport run_experiment_to(const ExperimentConfig& config, const std::filesystem::path& dir,
                                   const RunOptions& options = {});

std::size_t default_workers();

nlohmann::json to_json(const ExperimentReport& r);

/// Normalised instantaneous volatility used for p(sigma): sigma / mean(sigma).
Eigen::VectorXd normalized_sigma(const Eigen::Ref<const Eigen::VectorXd>& sigma);

struct Table1 {
  struct Row {
    std::size_t W = 0;
    double phi = 0.0;
    double p_star = 0.0;
  };
  std::vector<Row> rows;  // sorted by (W, phi)

  std::string csv() const;
  /// Two side-by-side blocks, W halves left and right.
  std::string text() const;
};

/// P*_KS per (W, phi) from memory-model cells that ran the `ks` analysis.
/// Throws InsufficientDataError for an empty set and for missing cells of the
/// standard grid, naming each one.
Table1 emit_table1(const std::vector<ExperimentReport>& reports);

}  // namespace tmarch
