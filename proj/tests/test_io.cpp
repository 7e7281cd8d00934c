#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pmsim/io/config.hpp"
#include "pmsim/io/csv.hpp"
#include "pmsim/rng.hpp"
#include "reference/fixtures.hpp"
#include "reference/temp_dir.hpp"

#include <filesystem>
#include <fstream>

using namespace pmsim;
using pmsim::testfix::TempDir;
using Json = pmsim::io::Json;
namespace fs = std::filesystem;

TEST_CASE("format_double round-trips bit-exactly") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.uniform() - 0.5) * std::pow(10.0, rng.uniform(-18, 18));
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK(io::parse_double(io::format_double(0.0)) == 0.0);
  CHECK(io::parse_double(io::format_double(1e-300)) == 1e-300);
}

TEST_CASE("parse_config: defaults resolve and derive") {
  const io::AppConfig cfg = io::parse_config(Json::object());
  CHECK(cfg.plant.mass_kg == 10.0);
  CHECK(cfg.plant.coil_pitch_m == 0.04);
  CHECK(cfg.pos_loop.bandwidth_hz == 150.0);
  CHECK(cfg.pos_loop.integrator_corner_hz == 15.0);
  CHECK(cfg.comm_loop.bandwidth_hz.x() == doctest::Approx(1.5));
  CHECK(cfg.comm_loop.sensitivity_n_per_m ==
        doctest::Approx(1.0 * (kTwoPi / 0.04) * 10.0 * 9.81));
  CHECK(cfg.comm_loop.clamp_m == doctest::Approx(0.01));
  CHECK(cfg.gd.positions_m.size() == 36);
  CHECK(cfg.gd.perturbation_m.x() == doctest::Approx(0.04 / 50.0));
  CHECK(cfg.gp_init_x.period_m == doctest::Approx(0.04));
  CHECK(!cfg.hash_hex.empty());
}

TEST_CASE("parse_config: unknown keys are named in the error") {
  Json doc;
  doc["plant"]["mass_kgg"] = 5.0;
  try {
    io::parse_config(doc);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("mass_kgg") != std::string::npos);
  }
}

TEST_CASE("parse_config: invalid values are rejected") {
  Json doc;
  doc["plant"]["mass_kg"] = -1.0;
  CHECK_THROWS_AS(io::parse_config(doc), ConfigError);
  Json doc2;
  doc2["scenario"]["mode"] = "warp";
  CHECK_THROWS_AS(io::parse_config(doc2), ConfigError);
}

TEST_CASE("load_config: syntax errors carry line numbers") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.json"));
    out << "{\n  \"plant\": {\n  \"mass_kg\": oops\n}\n}\n";
  }
  try {
    io::load_config(tmp.file("bad.json"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("config hash changes with any parameter") {
  Json doc;
  const io::AppConfig a = io::parse_config(doc);
  doc["plant"]["mass_kg"] = 12.0;
  const io::AppConfig b = io::parse_config(doc);
  CHECK(a.hash_hex != b.hash_hex);
  const io::AppConfig c = io::parse_config(Json::object());
  CHECK(a.hash_hex == c.hash_hex);
}

TEST_CASE("field serialization round-trips losslessly") {
  const auto field = testfix::acceptance_field(1234);
  const Json j = io::field_to_json(field);
  const auto back = io::field_from_json(j, 0.04);
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec2 q(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    CHECK(field.eval(q) == back.eval(q));  // bitwise equality
  }
  CHECK(io::field_to_json(back).dump() == j.dump());
}

TEST_CASE("randomized field spec resolves to explicit parameters") {
  Json doc;
  doc["field"]["random"]["seed"] = 77;
  const io::AppConfig cfg = io::parse_config(doc);
  // resolved config stores the drawn values, not the random spec
  CHECK(cfg.resolved["field"].contains("harmonics"));
  CHECK_FALSE(cfg.resolved["field"].contains("random"));
  const auto back = io::field_from_json(cfg.resolved["field"], 0.04);
  CHECK(back.eval({0.01, 0.02}) == cfg.field.eval({0.01, 0.02}));
}

TEST_CASE("sim log CSV round-trips bit-exactly") {
  TempDir tmp;
  sim::ScenarioConfig sc =
      testfix::default_scenario(testfix::acceptance_field(), sim::Mode::dynamic);
  sc.lead_in_s = 0.05;
  sc.duration_s = 0.0;
  sc.profile.stroke_m = 0.02;
  sc.config_hash = "cafe";
  const sim::SimLog log = sim::run_scenario(sc);

  Json manifest;
  manifest["dt_s"] = log.dt_s;
  manifest["cruise_start_s"] = log.cruise_start_s;
  manifest["cruise_end_s"] = log.cruise_end_s;
  manifest["scan_axis"] = log.scan_axis;
  manifest["diverged"] = log.diverged;
  manifest["mode"] = log.mode;
  manifest["config_hash"] = log.config_hash;
  const std::string path = tmp.file("log.csv");
  io::write_sim_log(path, log, manifest);

  const sim::SimLog back = io::read_sim_log(path);
  REQUIRE(back.rows.size() == log.rows.size());
  CHECK(back.cruise_start_s == log.cruise_start_s);
  CHECK(back.mode == log.mode);
  for (std::size_t i = 0; i < log.rows.size(); i += 37) {
    CHECK(back.rows[i].t_s == log.rows[i].t_s);
    CHECK(back.rows[i].q == log.rows[i].q);
    CHECK(back.rows[i].e_pos == log.rows[i].e_pos);
    CHECK(back.rows[i].f_m == log.rows[i].f_m);
    CHECK(back.rows[i].eta_fb == log.rows[i].eta_fb);
  }
}

TEST_CASE("eta dataset CSV round-trips") {
  TempDir tmp;
  sim::EtaDataset ds;
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    sim::EtaPoint p;
    p.index = i;
    p.position_m = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    p.eta_star_m = {rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
    p.ok = (i % 7) != 3;
    ds.points.push_back(p);
  }
  const std::string path = tmp.file("ds.csv");
  Json manifest;
  manifest["command"] = "collect";
  io::write_eta_dataset(path, ds, manifest);
  Json m2;
  const sim::EtaDataset back = io::read_eta_dataset(path, &m2);
  CHECK(m2["command"] == "collect");
  REQUIRE(back.points.size() == ds.points.size());
  for (std::size_t i = 0; i < ds.points.size(); ++i) {
    CHECK(back.points[i].position_m == ds.points[i].position_m);
    CHECK(back.points[i].eta_star_m == ds.points[i].eta_star_m);
    CHECK(back.points[i].ok == ds.points[i].ok);
  }
  CHECK(back.positions(true).size() == back.points.size() - 3);
}

TEST_CASE("feedforward model file round-trips predictions") {
  TempDir tmp;
  Rng rng(6);
  std::vector<Vec2> w(25);
  std::vector<Vec2> etas(25);
  for (int i = 0; i < 25; ++i) {
    w[i] = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)};
    etas[i] = {rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
  }
  gp::KernelParams p;
  p.signal_var_m2 = 1e-6;
  p.rbf_x_m2 = 2e-3;
  p.rbf_y_m2 = 2e-3;
  p.periodic_x = 1.0;
  p.periodic_y = 1.0;
  p.noise_var_m2 = 1e-10;
  p.period_m = 0.04;
  const gp::FeedforwardModel ff = gp::make_feedforward(w, etas, p, p);
  const std::string path = tmp.file("model.json");
  io::save_feedforward(path, ff, Json::object());
  const gp::FeedforwardModel back = io::load_feedforward(path);
  for (int i = 0; i < 50; ++i) {
    const Vec2 q(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
    CHECK((ff.eval(q) - back.eval(q)).cwiseAbs().maxCoeff() < 1e-15);
  }
  CHECK(back.hull_lo == ff.hull_lo);
  CHECK(back.hull_hi == ff.hull_hi);
}

TEST_CASE("gd trace CSV carries per-position norms") {
  TempDir tmp;
  cal::GdTrace trace;
  cal::GdIteration it;
  it.k = 1;
  it.eta_m = {1e-4, -2e-4};
  it.objective_n = 3.5;
  it.force_norms_n = {1.0, 1.5, 1.0};
  it.step_m_per_n = 1e-7;
  it.perturbation_m = {8e-4, 8e-4};
  it.accepted = true;
  it.measurements = 9;
  trace.iterations.push_back(it);
  const std::string path = tmp.file("trace.csv");
  io::write_gd_trace(path, trace, Json::object());
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);  // manifest
  std::getline(in, line);  // header
  CHECK(line.find("f_norm_2_n") != std::string::npos);
  std::getline(in, line);
  CHECK(line.find("1e-07") != std::string::npos);
}
