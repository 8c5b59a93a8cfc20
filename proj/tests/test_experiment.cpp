#include <filesystem>
#include <sstream>
#include <string>

#include <doctest.h>

#include "tmarch/errors.hpp"
#include "tmarch/experiment.hpp"
#include "tmarch/memory_model.hpp"
#include "tmarch/serialize.hpp"

using namespace tmarch;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

ExperimentConfig small(const std::string& preset, std::size_t n = 20000) {
  auto c = preset_config(preset);
  c.n = n;
  c.seeds = {1, 2, 3};
  return c;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("config parsing") {
  const auto c = parse(
      "[experiment]\nname = demo\nn = 1000\nseeds = 3, 4\n"
      "[model]\ntype = memory\nb = 0.998\nW = 25\nphi = 2.5\nrecall = gated\n"
      "[grid]\nW = 10, 25\nphi = 0.5, 1\n"
      "[analysis]\nhill = false\ngumbel = true\n");
  CHECK(c.name == "demo");
  CHECK(c.n == 1000);
  CHECK(c.seeds == std::vector<std::uint64_t>{3, 4});
  const auto& m = std::get<MemoryModelSpec>(c.model);
  CHECK(m.window == 25);
  CHECK(m.recall == RecallNormalization::kGated);
  CHECK_FALSE(c.analyses.hill);
  CHECK(c.analyses.gumbel);
  const auto cells = c.cells();
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].label == "W=10,phi=0.5");
  CHECK(std::get<MemoryModelSpec>(cells[3].model).window == 25);
  CHECK(std::get<MemoryModelSpec>(cells[3].model).phi_units == 1.0);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse("[model]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[extra]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nb = lots\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\ntype = arch\nW = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\nb = 1.5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[experiment]\nseeds =\n"), ConfigError);
  CHECK_THROWS_AS(parse("[model]\ntype = arch\nb = 0.5\n[grid]\nW = 3\n"), ConfigError);
  CHECK_THROWS_AS(preset_config("nope"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), ConfigError);
}

TEST_CASE("canonical text round-trips and the hash is stable") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto c = preset_config(name);
    const auto text = to_ini(c);
    CHECK(to_ini(parse(text)) == text);
    CHECK(config_hash(parse(text)) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
  }
  auto a = preset_config("fig1_upper");
  auto b = a;
  b.n += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("runs are deterministic and independent of the worker count") {
  const auto c = small("fig1_middle", 5000);
  RunOptions one;
  one.workers = 1;
  RunOptions three;
  three.workers = 3;
  const auto a = to_json(run_experiment(c, one)).dump();
  const auto b = to_json(run_experiment(c, three)).dump();
  CHECK(a == b);
  const auto r = run_experiment(c, one);
  CHECK(r.failures == 0);
  const auto& cell = r.cells.at(0);
  CHECK(cell.seeds.size() == 3);
  CHECK(cell.aggregates.at("q").count == 3);
  CHECK(cell.median("H") > 0.3);
  CHECK_THROWS_AS(cell.median("nonexistent"), InsufficientDataError);
  CHECK_THROWS_AS(r.cell("nope"), InsufficientDataError);
}

TEST_CASE("classical presets report memory times") {
  const auto r = run_experiment(small("garch11", 100000));
  CHECK(r.failures == 0);
  CHECK(r.cells.at(0).median("acf_time") > 4.0);
  CHECK(r.cells.at(0).median("mean_sigma2") == doctest::Approx(10.0).epsilon(0.15));
}

TEST_CASE("report directory") {
  const auto dir = std::filesystem::temp_directory_path() / "tmarch_exp_test";
  std::filesystem::remove_all(dir);
  auto c = small("fig4_gumbel", 50000);
  c.seeds = {1};
  const auto r = run_experiment_to(c, dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  bool dens = false;
  for (const auto& e : std::filesystem::directory_iterator(dir)) dens |= e.path().string().find("_sigma.csv") != std::string::npos;
  CHECK(dens);
  CHECK(r.cells.at(0).median("zeta") > 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("simulation metadata replays to the same series") {
  MemoryModelSpec s;
  s.b = 0.9;
  s.window = 5;
  s.phi_units = 1.0;
  const auto r = simulate_memory_model(s, 5000, NoiseSource(12));
  const auto j = nlohmann::json::parse(simulation_to_json(r).dump());
  const auto back = replay_simulation(j);
  CHECK((back.z.array() == r.z.array()).all());
  const auto g = simulate_garch({1.0, {0.1}, {0.8}}, 1000, std::nullopt, NoiseSource(3));
  CHECK((replay_simulation(simulation_to_json(g)).sigma.array() == g.sigma.array()).all());
  CHECK_THROWS_AS(replay_simulation(nlohmann::json{{"model", "what"}}), ConfigError);
}

TEST_CASE("simulation csv layout") {
  const auto a = simulate_arch({1.0, {0.5}}, 3, std::nullopt, NoiseSource(1));
  std::ostringstream o;
  write_simulation_csv(a, o);
  const auto text = o.str();
  CHECK(text.rfind("t,z,sigma,v,regime\n0,", 0) == 0);
  CHECK(text.find(",,\n") != std::string::npos);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("normalized sigma has unit mean") {
  Eigen::VectorXd s(4);
  s << 1, 2, 3, 6;
  CHECK(normalized_sigma(s).mean() == doctest::Approx(1.0));
  CHECK_THROWS_AS(normalized_sigma(Eigen::VectorXd()), InsufficientDataError);
}

TEST_CASE("table 1 assembly") {
  CHECK_THROWS_AS(emit_table1({}), InsufficientDataError);
  auto c = preset_config("fig2_grid");
  c.n = 2000;
  c.seeds = {1};
  c.analyses.dfa = false;
  c.analyses.hill = false;
  c.grid_windows = {10};
  const auto partial = run_experiment(c);
  try {
    emit_table1({partial});
    FAIL("expected missing cells");
  } catch (const InsufficientDataError& e) {
    CHECK(std::string(e.what()).find("W=125,phi=5") != std::string::npos);
  }
  c.grid_windows = {25, 75, 125};
  const auto rest = run_experiment(c);
  const auto t = emit_table1({partial, rest});
  CHECK(t.rows.size() == 28);
  CHECK(t.rows.front().W == 10);
  CHECK(t.rows.back().phi == 5.0);
  for (const auto& row : t.rows) CHECK((row.p_star >= 0.0 && row.p_star <= 1.0));
  CHECK(t.csv().rfind("W,phi,P_star\n", 0) == 0);
  CHECK_FALSE(t.text().empty());
}

}
