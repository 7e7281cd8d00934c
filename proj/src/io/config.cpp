#include "pmsim/io/config.hpp"

#include "pmsim/hash.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pmsim::io {

namespace {

// Strict section reader: every key must be consumed, leftovers are errors.
// Holds its document by value so callers may pass temporaries.
class Section {
 public:
  Section(Json j, std::string path) : j_(std::move(j)), path_(std::move(path)) {
    if (j_.is_null()) j_ = Json::object();
    if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
  }

  bool has(const std::string& key) {
    return j_.contains(key) && !j_.at(key).is_null();
  }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(path_ + "." + key + " is required");
    return read<T>(key);
  }

  Json sub(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : Json();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (!seen_.count(key)) {
        throw ConfigError("unknown key " + path_ + "." + key);
      }
    }
  }

 private:
  template <typename T>
  T read(const std::string& key) {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  Json j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec2 get_vec2(Section& s, const std::string& key, const Vec2& fallback) {
  const auto v = s.get<std::vector<double>>(
      key, {fallback.x(), fallback.y()});
  if (v.size() != 2) throw ConfigError(key + " must have 2 entries");
  return {v[0], v[1]};
}

Vec3 get_vec3(Section& s, const std::string& key, const Vec3& fallback) {
  const auto v = s.get<std::vector<double>>(
      key, {fallback.x(), fallback.y(), fallback.z()});
  if (v.size() != 3) throw ConfigError(key + " must have 3 entries");
  return {v[0], v[1], v[2]};
}

Json vec2_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
Json vec3_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

gp::KernelParams parse_kernel(const Json& j, const std::string& path,
                              const gp::KernelParams& fallback) {
  if (j.is_null()) return fallback;
  Section s(j, path);
  gp::KernelParams p = fallback;
  p.signal_var_m2 = s.get<double>("signal_var_m2", p.signal_var_m2);
  p.rbf_x_m2 = s.get<double>("rbf_x_m2", p.rbf_x_m2);
  p.rbf_y_m2 = s.get<double>("rbf_y_m2", p.rbf_y_m2);
  p.periodic_x = s.get<double>("periodic_x", p.periodic_x);
  p.periodic_y = s.get<double>("periodic_y", p.periodic_y);
  p.noise_var_m2 = s.get<double>("noise_var_m2", p.noise_var_m2);
  s.finish();
  return p;
}

Json kernel_json(const gp::KernelParams& p) {
  Json j;
  j["signal_var_m2"] = p.signal_var_m2;
  j["rbf_x_m2"] = p.rbf_x_m2;
  j["rbf_y_m2"] = p.rbf_y_m2;
  j["periodic_x"] = p.periodic_x;
  j["periodic_y"] = p.periodic_y;
  j["noise_var_m2"] = p.noise_var_m2;
  j["period_m"] = p.period_m;
  return j;
}

}  // namespace

Json field_to_json(const plant::MismatchField& field) {
  Json j;
  j["workspace_half_m"] = vec2_json(field.workspace_half_m());
  j["offset_m"] = vec2_json(field.offset_m());
  Json harmonics = Json::array();
  for (const auto& h : field.harmonics()) {
    Json hj;
    hj["amplitude_m"] = vec2_json(h.amplitude_m);
    hj["pitch_m"] = h.pitch_m;
    hj["phase_rad"] = vec2_json(h.phase_rad);
    harmonics.push_back(hj);
  }
  j["harmonics"] = harmonics;
  Json bumps = Json::array();
  for (const auto& b : field.bumps()) {
    Json bj;
    bj["center_m"] = vec2_json(b.center_m);
    bj["width_m"] = b.width_m;
    bj["height_m"] = vec2_json(b.height_m);
    bumps.push_back(bj);
  }
  j["bumps"] = bumps;
  j["seed"] = field.seed();
  return j;
}

plant::MismatchField field_from_json(const Json& j, double coil_pitch_m) {
  if (j.is_null()) return plant::MismatchField();
  Section s(j, "field");

  const Vec2 workspace = get_vec2(s, "workspace_half_m", {0.1, 0.1});

  if (s.has("random")) {
    Section r(s.sub("random"), "field.random");
    plant::RandomFieldSpec spec;
    spec.seed = r.get<std::uint64_t>("seed", spec.seed);
    spec.offset_max_m = get_vec2(r, "offset_max_m", spec.offset_max_m);
    spec.harmonic_pitches_m = r.get<std::vector<double>>(
        "harmonic_pitches_m", spec.harmonic_pitches_m);
    spec.harmonic_amp_min_m =
        r.get<double>("harmonic_amp_min_m", spec.harmonic_amp_min_m);
    spec.harmonic_amp_max_m =
        r.get<double>("harmonic_amp_max_m", spec.harmonic_amp_max_m);
    spec.num_bumps = r.get<int>("num_bumps", spec.num_bumps);
    spec.bump_width_min_m =
        r.get<double>("bump_width_min_m", spec.bump_width_min_m);
    spec.bump_width_max_m =
        r.get<double>("bump_width_max_m", spec.bump_width_max_m);
    spec.bump_height_max_m =
        r.get<double>("bump_height_max_m", spec.bump_height_max_m);
    r.finish();
    s.finish();
    return plant::MismatchField::randomized(spec, workspace, coil_pitch_m);
  }

  const Vec2 offset = get_vec2(s, "offset_m", Vec2::Zero());
  std::vector<plant::Harmonic> harmonics;
  if (s.has("harmonics")) {
    for (const auto& hj : s.sub("harmonics")) {
      Section hs(hj, "field.harmonics[]");
      plant::Harmonic h;
      h.amplitude_m = get_vec2(hs, "amplitude_m", Vec2::Zero());
      h.pitch_m = hs.require<double>("pitch_m");
      h.phase_rad = get_vec2(hs, "phase_rad", Vec2::Zero());
      hs.finish();
      harmonics.push_back(h);
    }
  } else {
    s.sub("harmonics");
  }
  std::vector<plant::Bump> bumps;
  if (s.has("bumps")) {
    for (const auto& bj : s.sub("bumps")) {
      Section bs(bj, "field.bumps[]");
      plant::Bump b;
      b.center_m = get_vec2(bs, "center_m", Vec2::Zero());
      b.width_m = bs.require<double>("width_m");
      b.height_m = get_vec2(bs, "height_m", Vec2::Zero());
      bs.finish();
      bumps.push_back(b);
    }
  } else {
    s.sub("bumps");
  }
  const auto seed = s.get<std::uint64_t>("seed", 0);
  s.finish();
  return plant::MismatchField::make(offset, std::move(harmonics),
                                    std::move(bumps), workspace, coil_pitch_m,
                                    seed);
}

AppConfig parse_config(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("config root must be an object");
  AppConfig cfg;
  Section root(doc, "config");

  {
    Section s(root.sub("plant"), "plant");
    cfg.plant.mass_kg = s.get<double>("mass_kg", 10.0);
    cfg.plant.damping_ns_per_m = get_vec3(s, "damping_ns_per_m", Vec3::Zero());
    cfg.plant.stiffness_n_per_m =
        get_vec3(s, "stiffness_n_per_m", Vec3::Zero());
    cfg.plant.gravity_m_s2 = s.get<double>("gravity_m_s2", 9.81);
    cfg.plant.coil_pitch_m = s.get<double>("coil_pitch_m", 0.04);
    cfg.plant.cross_coupling = s.get<double>("cross_coupling", 1.0);
    cfg.plant.dt_s = s.get<double>("dt_s", 1e-4);
    s.finish();
    cfg.plant.validate();
  }
  const double pitch = cfg.plant.coil_pitch_m;

  cfg.field = field_from_json(root.sub("field"), pitch);

  {
    Section s(root.sub("position_loop"), "position_loop");
    cfg.pos_loop.bandwidth_hz = s.get<double>("bandwidth_hz", 150.0);
    cfg.pos_loop.integrator_corner_hz = s.get<double>(
        "integrator_corner_hz", cfg.pos_loop.bandwidth_hz / 10.0);
    cfg.pos_loop.lead_span = s.get<double>("lead_span", 3.0);
    cfg.pos_loop.mass_kg = cfg.plant.mass_kg;
    cfg.pos_loop.gravity_m_s2 = cfg.plant.gravity_m_s2;
    cfg.pos_loop.dt_s = cfg.plant.dt_s;
    s.finish();
    cfg.pos_loop.validate();
  }

  {
    Section s(root.sub("commutation_loop"), "commutation_loop");
    const double default_bw = cfg.pos_loop.bandwidth_hz / 100.0;
    cfg.comm_loop.bandwidth_hz =
        get_vec2(s, "bandwidth_hz", {default_bw, default_bw});
    const double nominal = control::CommutationLoopParams::nominal_sensitivity(
        cfg.plant.cross_coupling, pitch, cfg.plant.mass_kg,
        cfg.plant.gravity_m_s2);
    cfg.comm_loop.sensitivity_n_per_m =
        s.get<double>("sensitivity_n_per_m", nominal);
    cfg.comm_loop.sign = get_vec2(s, "sign", {-1.0, -1.0});
    cfg.comm_loop.dt_s = cfg.plant.dt_s;
    cfg.comm_loop.clamp_m = pitch / 4.0;
    s.finish();
    cfg.comm_loop.validate();
  }

  {
    Section s(root.sub("profile"), "profile");
    cfg.profile.stroke_m = s.get<double>("stroke_m", 0.05);
    cfg.profile.v_max_m_s = s.get<double>("v_max_m_s", 0.1);
    cfg.profile.a_max_m_s2 = s.get<double>("a_max_m_s2", 5.0);
    cfg.profile.j_max_m_s3 = s.get<double>("j_max_m_s3", 500.0);
    cfg.profile.s_max_m_s4 = s.get<double>("s_max_m_s4", 5.0e4);
    cfg.profile.dt_s = cfg.plant.dt_s;
    const std::string axis = s.get<std::string>("axis", "y");
    if (axis == "x") {
      cfg.profile.axis = 0;
    } else if (axis == "y") {
      cfg.profile.axis = 1;
    } else {
      throw ConfigError("profile.axis must be \"x\" or \"y\"");
    }
    s.finish();
    cfg.profile.validate();
  }

  {
    Section s(root.sub("scenario"), "scenario");
    cfg.mode = sim::parse_mode(s.get<std::string>("mode", "baseline"));
    cfg.x_setpoint_m = s.get<double>("x_setpoint_m", 0.0);
    cfg.eta_initial_m = get_vec2(s, "eta_initial_m", Vec2::Zero());
    cfg.lead_in_s = s.get<double>("lead_in_s", 1.0);
    cfg.tail_s = s.get<double>("tail_s", 0.1);
    cfg.duration_s = s.get<double>("duration_s", 0.0);
    cfg.seed = s.get<std::uint64_t>("seed", 1);
    cfg.noise_std_m = s.get<double>("noise_std_m", 0.0);
    s.finish();
  }

  {
    Section s(root.sub("collect"), "collect");
    const auto grid = s.get<std::vector<int>>("grid", {24, 24});
    if (grid.size() != 2 || grid[0] < 1 || grid[1] < 1) {
      throw ConfigError("collect.grid must be two positive counts");
    }
    cfg.collect_nx = grid[0];
    cfg.collect_ny = grid[1];
    cfg.collect_center_m = get_vec2(s, "center_m", Vec2::Zero());
    cfg.collect_span_m = get_vec2(s, "span_m", {0.2, 0.2});
    cfg.t_hold_s = s.get<double>("t_hold_s", 0.0);
    cfg.workers = s.get<int>("workers", 0);
    s.finish();
  }

  {
    Section s(root.sub("calibrate"), "calibrate");
    const auto grid = s.get<std::vector<int>>("grid", {6, 6});
    if (grid.size() != 2 || grid[0] < 1 || grid[1] < 1) {
      throw ConfigError("calibrate.grid must be two positive counts");
    }
    cfg.cal_nx = grid[0];
    cfg.cal_ny = grid[1];
    cfg.cal_center_m = get_vec2(s, "center_m", Vec2::Zero());
    cfg.cal_span_m = get_vec2(s, "span_m", {0.18, 0.18});
    cfg.gd.eta0_m = get_vec2(s, "eta0_m", Vec2::Zero());
    cfg.gd.initial_step_m_per_n = s.get<double>("initial_step_m_per_n", 0.0);
    cfg.gd.step_cap_m = s.get<double>("step_cap_m", pitch / 20.0);
    const double xi = pitch / 50.0;
    cfg.gd.perturbation_m = get_vec2(s, "perturbation_m", {xi, xi});
    cfg.gd.min_perturbation_m =
        s.get<double>("min_perturbation_m", pitch / 2000.0);
    cfg.gd.max_iterations = s.get<int>("max_iterations", 50);
    cfg.gd.step_tolerance_m = s.get<double>("step_tolerance_m", pitch / 2000.0);
    cfg.gd.objective_floor_n = s.get<double>("objective_floor_n", 1e-6);
    cfg.gd.backtrack = s.get<double>("backtrack", 0.5);
    cfg.gd.growth = s.get<double>("growth", 1.5);
    cfg.t_settle_s =
        s.get<double>("t_settle_s", 20.0 / cfg.pos_loop.bandwidth_hz);
    cfg.t_avg_s = s.get<double>("t_avg_s", 10.0 / cfg.pos_loop.bandwidth_hz);
    s.finish();
    cfg.gd.positions_m = sim::uniform_grid(cfg.cal_center_m, cfg.cal_span_m,
                                           cfg.cal_nx, cfg.cal_ny);
    cfg.gd.validate();
  }

  {
    Section s(root.sub("gp"), "gp");
    const double period = s.get<double>("period_m", pitch);
    cfg.tune_budget = s.get<int>("tune_budget", 3);
    cfg.split = s.get<double>("split", 0.8);
    cfg.bfr_floor_pct = s.get<double>("bfr_floor_pct", 0.0);
    cfg.gp_seed = s.get<std::uint64_t>("seed", 7);
    gp::KernelParams fallback;
    fallback.period_m = period;
    cfg.gp_init_given = s.has("init_x") || s.has("init_y");
    cfg.gp_init_x = parse_kernel(s.sub("init_x"), "gp.init_x", fallback);
    cfg.gp_init_y = parse_kernel(s.sub("init_y"), "gp.init_y", fallback);
    s.finish();
    if (!(cfg.split > 0.0 && cfg.split <= 1.0)) {
      throw ConfigError("gp.split must be in (0, 1]");
    }
    if (cfg.tune_budget < 0) throw ConfigError("gp.tune_budget must be >= 0");
  }

  // materialize the resolved document
  Json r;
  r["plant"] = {{"mass_kg", cfg.plant.mass_kg},
                {"damping_ns_per_m", vec3_json(cfg.plant.damping_ns_per_m)},
                {"stiffness_n_per_m", vec3_json(cfg.plant.stiffness_n_per_m)},
                {"gravity_m_s2", cfg.plant.gravity_m_s2},
                {"coil_pitch_m", cfg.plant.coil_pitch_m},
                {"cross_coupling", cfg.plant.cross_coupling},
                {"dt_s", cfg.plant.dt_s}};
  r["field"] = field_to_json(cfg.field);
  r["position_loop"] = {
      {"bandwidth_hz", cfg.pos_loop.bandwidth_hz},
      {"integrator_corner_hz", cfg.pos_loop.integrator_corner_hz},
      {"lead_span", cfg.pos_loop.lead_span},
      {"proportional_gain_n_per_m", cfg.pos_loop.proportional_gain()}};
  r["commutation_loop"] = {
      {"bandwidth_hz", vec2_json(cfg.comm_loop.bandwidth_hz)},
      {"sensitivity_n_per_m", cfg.comm_loop.sensitivity_n_per_m},
      {"sign", vec2_json(cfg.comm_loop.sign)},
      {"clamp_m", cfg.comm_loop.clamp_m}};
  r["profile"] = {{"stroke_m", cfg.profile.stroke_m},
                  {"v_max_m_s", cfg.profile.v_max_m_s},
                  {"a_max_m_s2", cfg.profile.a_max_m_s2},
                  {"j_max_m_s3", cfg.profile.j_max_m_s3},
                  {"s_max_m_s4", cfg.profile.s_max_m_s4},
                  {"axis", cfg.profile.axis == 0 ? "x" : "y"}};
  r["scenario"] = {{"mode", sim::mode_name(cfg.mode)},
                   {"x_setpoint_m", cfg.x_setpoint_m},
                   {"eta_initial_m", vec2_json(cfg.eta_initial_m)},
                   {"lead_in_s", cfg.lead_in_s},
                   {"tail_s", cfg.tail_s},
                   {"duration_s", cfg.duration_s},
                   {"seed", cfg.seed},
                   {"noise_std_m", cfg.noise_std_m}};
  r["collect"] = {{"grid", Json::array({cfg.collect_nx, cfg.collect_ny})},
                  {"center_m", vec2_json(cfg.collect_center_m)},
                  {"span_m", vec2_json(cfg.collect_span_m)},
                  {"t_hold_s", cfg.t_hold_s},
                  {"workers", cfg.workers}};
  r["calibrate"] = {{"grid", Json::array({cfg.cal_nx, cfg.cal_ny})},
                    {"center_m", vec2_json(cfg.cal_center_m)},
                    {"span_m", vec2_json(cfg.cal_span_m)},
                    {"eta0_m", vec2_json(cfg.gd.eta0_m)},
                    {"initial_step_m_per_n", cfg.gd.initial_step_m_per_n},
                    {"step_cap_m", cfg.gd.step_cap_m},
                    {"perturbation_m", vec2_json(cfg.gd.perturbation_m)},
                    {"min_perturbation_m", cfg.gd.min_perturbation_m},
                    {"max_iterations", cfg.gd.max_iterations},
                    {"step_tolerance_m", cfg.gd.step_tolerance_m},
                    {"objective_floor_n", cfg.gd.objective_floor_n},
                    {"backtrack", cfg.gd.backtrack},
                    {"growth", cfg.gd.growth},
                    {"t_settle_s", cfg.t_settle_s},
                    {"t_avg_s", cfg.t_avg_s}};
  r["gp"] = {{"period_m", cfg.gp_init_x.period_m},
             {"tune_budget", cfg.tune_budget},
             {"split", cfg.split},
             {"bfr_floor_pct", cfg.bfr_floor_pct},
             {"seed", cfg.gp_seed},
             {"init_x", kernel_json(cfg.gp_init_x)},
             {"init_y", kernel_json(cfg.gp_init_y)}};
  cfg.resolved = std::move(r);
  cfg.hash_hex = hex64(fnv1a64(cfg.resolved.dump()));
  return cfg;
}

AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw ConfigError("config parse error in " + path + " at line " +
                      std::to_string(line) + ": " + e.what());
  }
  return parse_config(doc);
}

sim::ScenarioConfig AppConfig::scenario_config(
    const gp::FeedforwardModel* ff) const {
  sim::ScenarioConfig sc;
  sc.mode = mode;
  sc.plant = plant;
  sc.field = field;
  sc.pos_loop = pos_loop;
  sc.comm_loop = comm_loop;
  sc.profile = profile;
  sc.x_setpoint_m = x_setpoint_m;
  sc.eta_initial_m = eta_initial_m;
  sc.lead_in_s = lead_in_s;
  sc.tail_s = tail_s;
  sc.duration_s = duration_s;
  sc.seed = seed;
  sc.noise_std_m = noise_std_m;
  sc.feedforward = ff;
  sc.config_hash = hash_hex;
  sc.header_json = resolved.dump();
  return sc;
}

sim::CollectConfig AppConfig::collect_config() const {
  sim::CollectConfig cc;
  cc.plant = plant;
  cc.field = field;
  cc.pos_loop = pos_loop;
  cc.comm_loop = comm_loop;
  cc.eta_initial_m = eta_initial_m;
  cc.t_hold_s = t_hold_s;
  cc.seed = seed;
  cc.noise_std_m = noise_std_m;
  return cc;
}

sim::HoldConfig AppConfig::hold_config() const {
  return {plant, field, pos_loop};
}

}  // namespace pmsim::io
