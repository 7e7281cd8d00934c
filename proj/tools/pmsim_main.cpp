// pmsim: desk-scale commutation pipeline for a simulated moving-magnet
// planar stage. Subcommands cover the full workflow: static calibration,
// grid collection of settled frame corrections, GP fitting, scenario
// simulation and metric reports.

#include "pmsim/calibrate.hpp"
#include "pmsim/hash.hpp"
#include "pmsim/io/config.hpp"
#include "pmsim/io/csv.hpp"
#include "pmsim/metrics.hpp"
#include "pmsim/rng.hpp"
#include "pmsim/sim.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using pmsim::Vec2;
using pmsim::Vec3;
using Json = pmsim::io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoDescent = 2;
constexpr int kExitBfrFloor = 3;
constexpr int kExitDivergence = 4;

int resolve_workers(int flag_value, int config_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("PMSIM_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  if (config_value > 0) return config_value;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

Json base_manifest(const std::string& command, const std::string& config_path,
                   const pmsim::io::AppConfig& cfg) {
  Json m;
  m["tool"] = "pmsim";
  m["version"] = pmsim::io::kToolVersion;
  m["command"] = command;
  m["config"] = config_path;
  m["config_hash"] = cfg.hash_hex;
  m["seed"] = cfg.seed;
  return m;
}

void prepare_out_dir(const std::string& out_dir, const Json& manifest) {
  fs::create_directories(out_dir);
  pmsim::io::write_json_file((fs::path(out_dir) / "manifest.json").string(),
                             manifest);
}

pmsim::cal::ForceProbe make_probe(const pmsim::io::AppConfig& cfg) {
  const pmsim::sim::HoldConfig hold = cfg.hold_config();
  const double t_settle = cfg.t_settle_s;
  const double t_avg = cfg.t_avg_s;
  return [hold, t_settle, t_avg](const Vec2& q, const Vec2& eta) {
    return pmsim::sim::measure_steady_state_force(hold, q, eta, t_settle,
                                                  t_avg);
  };
}

int cmd_calibrate(const std::string& config_path, const std::string& out_dir,
                  bool dry_run) {
  const pmsim::io::AppConfig cfg = pmsim::io::load_config(config_path);
  if (dry_run) {
    std::cout << cfg.resolved.dump(2) << '\n';
    return kExitOk;
  }
  Json manifest = base_manifest("calibrate", config_path, cfg);
  manifest["params"] = cfg.resolved;
  prepare_out_dir(out_dir, manifest);

  pmsim::cal::GdResult result;
  try {
    result = pmsim::cal::gd_calibrate(cfg.gd, make_probe(cfg));
  } catch (const pmsim::NoDescent& e) {
    std::cerr << "pmsim calibrate: " << e.what() << '\n';
    return kExitNoDescent;
  }

  pmsim::io::write_gd_trace((fs::path(out_dir) / "trace.csv").string(),
                            result.trace, manifest);
  Json eta_json;
  eta_json["manifest"] = manifest;
  eta_json["eta_star_m"] =
      Json::array({result.eta_star_m.x(), result.eta_star_m.y()});
  eta_json["converged"] = result.trace.converged;
  eta_json["stop_reason"] = result.trace.stop_reason;
  eta_json["iterations"] = result.trace.iterations.size();
  eta_json["measurements"] = result.trace.total_measurements;
  pmsim::io::write_json_file((fs::path(out_dir) / "eta_star.json").string(),
                             eta_json);
  std::cout << "calibrated eta* = [" << pmsim::io::format_double(result.eta_star_m.x())
            << ", " << pmsim::io::format_double(result.eta_star_m.y()) << "] m in "
            << result.trace.iterations.size() << " iterations ("
            << result.trace.stop_reason << ")\n";
  return kExitOk;
}

int cmd_collect(const std::string& config_path, const std::string& out_dir,
                int workers_flag, int random_points, bool dry_run) {
  const pmsim::io::AppConfig cfg = pmsim::io::load_config(config_path);
  if (dry_run) {
    std::cout << cfg.resolved.dump(2) << '\n';
    return kExitOk;
  }
  std::vector<Vec2> grid;
  if (random_points > 0) {
    pmsim::Rng rng(cfg.seed ^ 0x5eedf00dull);
    grid.reserve(static_cast<std::size_t>(random_points));
    for (int i = 0; i < random_points; ++i) {
      grid.emplace_back(
          cfg.collect_center_m.x() +
              cfg.collect_span_m.x() * (rng.uniform() - 0.5),
          cfg.collect_center_m.y() +
              cfg.collect_span_m.y() * (rng.uniform() - 0.5));
    }
  } else {
    grid = pmsim::sim::uniform_grid(cfg.collect_center_m, cfg.collect_span_m,
                                    cfg.collect_nx, cfg.collect_ny);
  }
  const int workers = resolve_workers(workers_flag, cfg.workers);

  Json manifest = base_manifest("collect", config_path, cfg);
  manifest["points"] = grid.size();
  manifest["random_points"] = random_points;
  manifest["params"] = cfg.resolved;
  prepare_out_dir(out_dir, manifest);

  const pmsim::sim::EtaDataset dataset =
      pmsim::sim::collect_eta_grid(cfg.collect_config(), grid, workers);
  pmsim::io::write_eta_dataset((fs::path(out_dir) / "dataset.csv").string(),
                               dataset, manifest);
  std::size_t failed = 0;
  for (const auto& p : dataset.points) failed += p.ok ? 0 : 1;
  std::cout << "collected " << dataset.points.size() << " points ("
            << failed << " flagged)\n";
  return kExitOk;
}

struct AxisFit {
  pmsim::gp::KernelParams params;
  double bfr_train = 0.0;
  double bfr_validation = -1.0;  // <0 = n/a
};

int cmd_fit_gp(const std::string& dataset_path, const std::string& out_dir,
               double split, int budget, double bfr_floor,
               std::uint64_t seed) {
  Json dataset_manifest;
  const pmsim::sim::EtaDataset dataset =
      pmsim::io::read_eta_dataset(dataset_path, &dataset_manifest);
  const std::vector<Vec2> inputs = dataset.positions(true);
  const std::vector<Vec2> etas = dataset.eta_values(true);
  if (inputs.size() < 10) {
    throw pmsim::ConfigError("fit-gp: dataset needs at least 10 usable rows");
  }
  if (!(split > 0.0 && split <= 1.0)) {
    throw pmsim::ConfigError("fit-gp: split must be in (0, 1]");
  }

  double period = 0.04;
  if (dataset_manifest.is_object() && dataset_manifest.contains("params")) {
    period = dataset_manifest["params"]["plant"].value("coil_pitch_m", 0.04);
  }

  // deterministic shuffled split
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  pmsim::Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.next_u64() % i;
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = std::max<std::size_t>(
      2, static_cast<std::size_t>(split * static_cast<double>(order.size())));

  std::vector<Vec2> w_train, w_val;
  std::vector<double> tx_train, ty_train, tx_val, ty_val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto k = order[i];
    if (i < n_train) {
      w_train.push_back(inputs[k]);
      tx_train.push_back(etas[k].x());
      ty_train.push_back(etas[k].y());
    } else {
      w_val.push_back(inputs[k]);
      tx_val.push_back(etas[k].x());
      ty_val.push_back(etas[k].y());
    }
  }

  auto fit_axis = [&](const std::vector<double>& targets_train,
                      const std::vector<double>& targets_val,
                      std::uint64_t tune_seed) {
    double mean = 0.0;
    for (double t : targets_train) mean += t;
    mean /= static_cast<double>(targets_train.size());
    double var = 0.0;
    for (double t : targets_train) var += (t - mean) * (t - mean);
    var /= static_cast<double>(targets_train.size());
    var = std::max(var, 1e-14);

    pmsim::gp::KernelParams init;
    init.period_m = period;
    init.signal_var_m2 = var;
    init.rbf_x_m2 = 2e-3;
    init.rbf_y_m2 = 2e-3;
    init.periodic_x = 0.5;
    init.periodic_y = 0.5;
    init.noise_var_m2 = std::max(1e-4 * var, 1e-14);

    AxisFit out;
    out.params = budget > 0
                     ? pmsim::gp::tune_hyperparams(w_train, targets_train, init,
                                                   budget, tune_seed)
                     : init;
    const pmsim::gp::GpModel model =
        pmsim::gp::GpModel::fit(w_train, targets_train, out.params);
    out.bfr_train =
        pmsim::gp::bfr_percent(targets_train, model.predict_mean(w_train));
    if (!w_val.empty()) {
      out.bfr_validation =
          pmsim::gp::bfr_percent(targets_val, model.predict_mean(w_val));
    }
    return out;
  };

  const AxisFit fit_x = fit_axis(tx_train, tx_val, seed * 2 + 1);
  const AxisFit fit_y = fit_axis(ty_train, ty_val, seed * 2 + 2);

  // shipped model = the train-split fit, so the validation BFR describes it
  const pmsim::gp::FeedforwardModel ff =
      pmsim::gp::make_feedforward(w_train, [&] {
        std::vector<Vec2> t(w_train.size());
        for (std::size_t i = 0; i < w_train.size(); ++i) {
          t[i] = {tx_train[i], ty_train[i]};
        }
        return t;
      }(), fit_x.params, fit_y.params);

  Json manifest;
  manifest["tool"] = "pmsim";
  manifest["version"] = pmsim::io::kToolVersion;
  manifest["command"] = "fit-gp";
  manifest["dataset"] = dataset_path;
  manifest["dataset_manifest"] = dataset_manifest;
  manifest["split"] = split;
  manifest["tune_budget"] = budget;
  manifest["seed"] = seed;
  prepare_out_dir(out_dir, manifest);

  pmsim::io::save_feedforward((fs::path(out_dir) / "model.json").string(), ff,
                              manifest);

  auto fmt_bfr = [](double v) {
    if (v < 0.0) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  std::cout << "BFR [%]        Training data set   Validation data set\n"
            << "x axis         " << fmt_bfr(fit_x.bfr_train)
            << "               " << fmt_bfr(fit_x.bfr_validation) << '\n'
            << "y axis         " << fmt_bfr(fit_y.bfr_train)
            << "               " << fmt_bfr(fit_y.bfr_validation) << '\n';

  Json report;
  report["manifest"] = manifest;
  report["train_points"] = w_train.size();
  report["validation_points"] = w_val.size();
  report["bfr_train_pct"] =
      Json::array({fit_x.bfr_train, fit_y.bfr_train});
  if (!w_val.empty()) {
    report["bfr_validation_pct"] =
        Json::array({fit_x.bfr_validation, fit_y.bfr_validation});
  } else {
    report["bfr_validation_pct"] = "n/a";
  }
  pmsim::io::write_json_file((fs::path(out_dir) / "bfr_report.json").string(),
                             report);

  if (!w_val.empty() && (fit_x.bfr_validation < bfr_floor ||
                         fit_y.bfr_validation < bfr_floor)) {
    std::cerr << "pmsim fit-gp: validation BFR below configured floor of "
              << bfr_floor << "%\n";
    return kExitBfrFloor;
  }
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir,
                 const std::string& mode_override,
                 const std::string& model_path, const std::string& eta_path,
                 bool dry_run) {
  pmsim::io::AppConfig cfg = pmsim::io::load_config(config_path);
  if (!mode_override.empty()) {
    cfg.mode = pmsim::sim::parse_mode(mode_override);
    cfg.resolved["scenario"]["mode"] = pmsim::sim::mode_name(cfg.mode);
    cfg.hash_hex = pmsim::hex64(pmsim::fnv1a64(cfg.resolved.dump()));
  }
  if (!eta_path.empty()) {
    const Json ej = pmsim::io::read_json_file(eta_path);
    const auto eta = ej.at("eta_star_m").get<std::vector<double>>();
    if (eta.size() != 2) throw pmsim::ConfigError("eta file: expected 2 entries");
    cfg.eta_initial_m = {eta[0], eta[1]};
    cfg.resolved["scenario"]["eta_initial_m"] = ej.at("eta_star_m");
    cfg.hash_hex = pmsim::hex64(pmsim::fnv1a64(cfg.resolved.dump()));
  }
  if (dry_run) {
    std::cout << cfg.resolved.dump(2) << '\n';
    return kExitOk;
  }

  pmsim::gp::FeedforwardModel ff;
  const pmsim::gp::FeedforwardModel* ff_ptr = nullptr;
  if (cfg.mode == pmsim::sim::Mode::dynamic_ff) {
    if (model_path.empty()) {
      throw pmsim::ConfigError("simulate: mode dynamic+ff requires --model");
    }
    ff = pmsim::io::load_feedforward(model_path);
    ff_ptr = &ff;
  }

  Json manifest = base_manifest("simulate", config_path, cfg);
  manifest["mode"] = pmsim::sim::mode_name(cfg.mode);
  if (!model_path.empty()) manifest["model"] = model_path;
  if (!eta_path.empty()) manifest["eta_file"] = eta_path;
  manifest["params"] = cfg.resolved;
  prepare_out_dir(out_dir, manifest);

  const pmsim::sim::SimLog log = pmsim::sim::run_scenario(cfg.scenario_config(ff_ptr));

  Json log_manifest = manifest;
  log_manifest["dt_s"] = log.dt_s;
  log_manifest["cruise_start_s"] = log.cruise_start_s;
  log_manifest["cruise_end_s"] = log.cruise_end_s;
  log_manifest["scan_axis"] = log.scan_axis;
  log_manifest["diverged"] = log.diverged;
  pmsim::io::write_sim_log((fs::path(out_dir) / "simlog.csv").string(), log,
                           log_manifest);
  if (log.diverged) {
    std::cerr << "pmsim simulate: run diverged; partial log retained\n";
    return kExitDivergence;
  }
  std::cout << "simulated " << log.rows.size() << " samples, mode "
            << log.mode << '\n';
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& log_paths,
               const std::string& out_dir, double window_s) {
  Json manifest;
  manifest["tool"] = "pmsim";
  manifest["version"] = pmsim::io::kToolVersion;
  manifest["command"] = "report";
  manifest["logs"] = log_paths;
  manifest["ma_window_s"] = window_s;
  prepare_out_dir(out_dir, manifest);

  struct Entry {
    std::string path;
    std::string mode;
    double peak_ma = 0.0;
    double rms = 0.0;
  };
  std::vector<Entry> entries;
  for (const std::string& path : log_paths) {
    const pmsim::sim::SimLog log = pmsim::io::read_sim_log(path);
    pmsim::metrics::MaConfig ma_cfg;
    ma_cfg.window_s = window_s;
    ma_cfg.dt_s = log.dt_s;
    Entry e;
    e.path = path;
    e.mode = log.mode.empty() ? fs::path(path).stem().string() : log.mode;
    e.peak_ma = pmsim::metrics::peak_ma_error(log, log.scan_axis, ma_cfg);
    e.rms = pmsim::metrics::cruise_rms_error(log, log.scan_axis);
    entries.push_back(e);

    const auto series = pmsim::metrics::ma_filter(
        [&] {
          std::vector<double> v(log.rows.size());
          for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = log.rows[i].e_pos[log.scan_axis];
          }
          return v;
        }(),
        ma_cfg);
    std::string stem = "ma_" + e.mode;
    for (char& c : stem) {
      if (c == '+' || c == '/' || c == ' ') c = '_';
    }
    pmsim::io::write_ma_series((fs::path(out_dir) / (stem + ".csv")).string(),
                               series, log.dt_s, manifest);
  }

  Json report;
  report["manifest"] = manifest;
  Json runs = Json::array();
  const Entry* baseline = nullptr;
  for (const Entry& e : entries) {
    if (e.mode == "baseline") baseline = &e;
  }
  for (const Entry& e : entries) {
    Json r;
    r["log"] = e.path;
    r["mode"] = e.mode;
    r["peak_ma_m"] = e.peak_ma;
    r["cruise_rms_m"] = e.rms;
    if (baseline != nullptr && entries.size() > 1 && &e != baseline &&
        baseline->peak_ma > 0.0) {
      r["reduction_vs_baseline_pct"] =
          100.0 * (1.0 - e.peak_ma / baseline->peak_ma);
    }
    runs.push_back(r);
  }
  report["runs"] = runs;
  pmsim::io::write_json_file((fs::path(out_dir) / "report.json").string(),
                             report);

  for (const Entry& e : entries) {
    std::cout << e.mode << ": peak MA = " << pmsim::io::format_double(e.peak_ma)
              << " m, cruise rms = " << pmsim::io::format_double(e.rms) << " m";
    if (baseline != nullptr && entries.size() > 1 && &e != baseline &&
        baseline->peak_ma > 0.0) {
      std::cout << ", reduction vs baseline = "
                << pmsim::io::format_double(
                       100.0 * (1.0 - e.peak_ma / baseline->peak_ma))
                << " %";
    }
    std::cout << '\n';
  }
  return kExitOk;
}

int cmd_profile(const std::string& config_path, const std::string& out_dir) {
  const pmsim::io::AppConfig cfg = pmsim::io::load_config(config_path);
  Json manifest = base_manifest("profile", config_path, cfg);
  manifest["params"] = cfg.resolved;
  prepare_out_dir(out_dir, manifest);
  const pmsim::traj::Profile profile = pmsim::traj::plan_fourth_order(cfg.profile);
  pmsim::io::write_profile_csv((fs::path(out_dir) / "profile.csv").string(),
                               profile, manifest);
  std::cout << "profile: duration " << pmsim::io::format_double(profile.duration_s)
            << " s, cruise [" << pmsim::io::format_double(profile.cruise_start_s)
            << ", " << pmsim::io::format_double(profile.cruise_end_s) << "] s\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"planar-stage commutation simulation pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_dir, dataset_path, mode_override, model_path,
      eta_path;
  std::vector<std::string> log_paths;
  bool dry_run = false;
  int workers = 0;
  int random_points = 0;
  double split = 0.8;
  int budget = 3;
  double bfr_floor = 0.0;
  std::uint64_t seed = 7;
  double window_s = 0.0144;

  auto* calibrate = app.add_subcommand(
      "calibrate", "gradient-descent static frame calibration");
  calibrate->add_option("config", config_path)->required();
  calibrate->add_option("--out", out_dir)->default_val("runs/calibrate");
  calibrate->add_flag("--dry-run", dry_run);

  auto* collect = app.add_subcommand(
      "collect", "collect settled frame corrections over a position grid");
  collect->add_option("config", config_path)->required();
  collect->add_option("--out", out_dir)->default_val("runs/collect");
  collect->add_option("--workers", workers);
  collect->add_option("--random-points", random_points,
                      "sample this many random positions instead of the grid");
  collect->add_flag("--dry-run", dry_run);

  auto* fit = app.add_subcommand("fit-gp",
                                 "fit the per-axis GP feedforward model");
  fit->add_option("dataset", dataset_path)->required();
  fit->add_option("--out", out_dir)->default_val("runs/fit-gp");
  fit->add_option("--split", split, "training fraction (1.0 = no validation)");
  fit->add_option("--budget", budget, "hyperparameter tuning restarts");
  fit->add_option("--bfr-floor", bfr_floor, "minimum validation BFR percent");
  fit->add_option("--seed", seed);

  auto* simulate = app.add_subcommand("simulate", "run one scan scenario");
  simulate->add_option("config", config_path)->required();
  simulate->add_option("--out", out_dir)->default_val("runs/simulate");
  simulate->add_option("--mode", mode_override,
                       "baseline | static-calibrated | dynamic | dynamic+ff");
  simulate->add_option("--model", model_path, "GP model file for dynamic+ff");
  simulate->add_option("--eta", eta_path,
                       "eta_star.json from calibrate (sets the static eta)");
  simulate->add_flag("--dry-run", dry_run);

  auto* report = app.add_subcommand(
      "report", "moving-average error report over one or more logs");
  report->add_option("logs", log_paths)->required()->expected(-1);
  report->add_option("--out", out_dir)->default_val("runs/report");
  report->add_option("--window", window_s, "MA window in seconds");

  auto* profile = app.add_subcommand("profile", "export the scan profile CSV");
  profile->add_option("config", config_path)->required();
  profile->add_option("--out", out_dir)->default_val("runs/profile");

  CLI11_PARSE(app, argc, argv);

  try {
    if (calibrate->parsed()) return cmd_calibrate(config_path, out_dir, dry_run);
    if (collect->parsed()) {
      return cmd_collect(config_path, out_dir, workers, random_points, dry_run);
    }
    if (fit->parsed()) {
      return cmd_fit_gp(dataset_path, out_dir, split, budget, bfr_floor, seed);
    }
    if (simulate->parsed()) {
      return cmd_simulate(config_path, out_dir, mode_override, model_path,
                          eta_path, dry_run);
    }
    if (report->parsed()) return cmd_report(log_paths, out_dir, window_s);
    if (profile->parsed()) return cmd_profile(config_path, out_dir);
  } catch (const pmsim::ConfigError& e) {
    std::cerr << "pmsim: config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pmsim::NumericalDivergence& e) {
    std::cerr << "pmsim: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const pmsim::NoDescent& e) {
    std::cerr << "pmsim: " << e.what() << '\n';
    return kExitNoDescent;
  } catch (const std::exception& e) {
    std::cerr << "pmsim: error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
