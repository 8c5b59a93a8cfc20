#pragma once

#include <ostream>
#include <string>
#include <string_view>

#include <Eigen/Dense>
#include <json.hpp>

#include "tmarch/process_models.hpp"
#include "tmarch/stats.hpp"

namespace tmarch {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double x);

/// `t,z,sigma,v,regime`; v and regime are empty for classical models and
/// for memory-model steps before the first full window.
void write_simulation_csv(const SimulationResult& r, std::ostream& out);

/// Model, spec, seed, length, warmup and metadata: everything needed to
/// regenerate the series, but not the series itself.
nlohmann::json simulation_to_json(const SimulationResult& r);

/// Re-runs the simulation described by simulation_to_json output.
SimulationResult replay_simulation(const nlohmann::json& j);

nlohmann::json to_json(const MomentSummary& m);
nlohmann::json to_json(const DfaResult& d);
nlohmann::json to_json(const HillResult& h);
nlohmann::json to_json(const KsResult& k);

void write_two_column_csv(std::ostream& out, std::string_view x_name, std::string_view y_name,
                          const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// log10 ell, log10 F.
void write_dfa_csv(const DfaResult& d, std::ostream& out);

}  // namespace tmarch
