#include "pmsim/io/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace pmsim::io {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc()) {
    throw ConfigError("csv: cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  return out;
}

struct CsvFile {
  Json manifest;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  CsvFile file;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      file.manifest = Json::parse(line.substr(1));
      continue;
    }
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (!have_header) {
      file.header = std::move(cells);
      have_header = true;
    } else {
      file.rows.push_back(std::move(cells));
    }
  }
  return file;
}

void write_manifest_line(std::ofstream& out, const Json& manifest) {
  out << '#' << manifest.dump() << '\n';
}

}  // namespace

void write_sim_log(const std::string& path, const sim::SimLog& log,
                   const Json& manifest) {
  auto out = open_out(path);
  write_manifest_line(out, manifest);
  out << "t_s,r_x_m,r_y_m,r_z_m,q_x_m,q_y_m,q_z_m,e_x_m,e_y_m,e_z_m,"
         "fc_x_n,fc_y_n,fc_z_n,ff_x_n,ff_y_n,ff_z_n,fm_x_n,fm_y_n,fm_z_n,"
         "eta_fb_x_m,eta_fb_y_m,eta_ff_x_m,eta_ff_y_m,saturated,ff_out_of_hull\n";
  for (const auto& row : log.rows) {
    out << format_double(row.t_s);
    const Vec3* v3s[] = {&row.r, &row.q, &row.e_pos, &row.f_c, &row.f_ff,
                         &row.f_m};
    for (const Vec3* v : v3s) {
      for (int i = 0; i < 3; ++i) out << ',' << format_double((*v)[i]);
    }
    for (int i = 0; i < 2; ++i) out << ',' << format_double(row.eta_fb[i]);
    for (int i = 0; i < 2; ++i) out << ',' << format_double(row.eta_ff[i]);
    out << ',' << int(row.saturated) << ',' << int(row.ff_out_of_hull) << '\n';
  }
}

sim::SimLog read_sim_log(const std::string& path, Json* manifest_out) {
  const CsvFile file = read_csv(path);
  sim::SimLog log;
  if (file.manifest.is_object()) {
    const Json& m = file.manifest;
    log.dt_s = m.value("dt_s", 1e-4);
    log.cruise_start_s = m.value("cruise_start_s", 0.0);
    log.cruise_end_s = m.value("cruise_end_s", 0.0);
    log.scan_axis = m.value("scan_axis", 1);
    log.diverged = m.value("diverged", false);
    log.mode = m.value("mode", std::string());
    log.config_hash = m.value("config_hash", std::string());
  }
  if (manifest_out) *manifest_out = file.manifest;
  for (const auto& cells : file.rows) {
    if (cells.size() != 25) throw ConfigError("sim log: malformed row");
    sim::LogRow row;
    std::size_t c = 0;
    row.t_s = parse_double(cells[c++]);
    Vec3* v3s[] = {&row.r, &row.q, &row.e_pos, &row.f_c, &row.f_ff, &row.f_m};
    for (Vec3* v : v3s) {
      for (int i = 0; i < 3; ++i) (*v)[i] = parse_double(cells[c++]);
    }
    for (int i = 0; i < 2; ++i) row.eta_fb[i] = parse_double(cells[c++]);
    for (int i = 0; i < 2; ++i) row.eta_ff[i] = parse_double(cells[c++]);
    row.saturated = static_cast<std::uint8_t>(parse_double(cells[c++]));
    row.ff_out_of_hull = static_cast<std::uint8_t>(parse_double(cells[c++]));
    log.rows.push_back(row);
  }
  return log;
}

void write_eta_dataset(const std::string& path, const sim::EtaDataset& dataset,
                       const Json& manifest) {
  auto out = open_out(path);
  write_manifest_line(out, manifest);
  out << "index,x_m,y_m,eta_x_m,eta_y_m,ok\n";
  for (const auto& p : dataset.points) {
    out << p.index << ',' << format_double(p.position_m.x()) << ','
        << format_double(p.position_m.y()) << ','
        << format_double(p.eta_star_m.x()) << ','
        << format_double(p.eta_star_m.y()) << ',' << int(p.ok) << '\n';
  }
}

sim::EtaDataset read_eta_dataset(const std::string& path, Json* manifest_out) {
  const CsvFile file = read_csv(path);
  if (manifest_out) *manifest_out = file.manifest;
  sim::EtaDataset dataset;
  for (const auto& cells : file.rows) {
    if (cells.size() != 6) throw ConfigError("eta dataset: malformed row");
    sim::EtaPoint p;
    p.index = static_cast<int>(parse_double(cells[0]));
    p.position_m = {parse_double(cells[1]), parse_double(cells[2])};
    p.eta_star_m = {parse_double(cells[3]), parse_double(cells[4])};
    p.ok = parse_double(cells[5]) != 0.0;
    dataset.points.push_back(p);
  }
  return dataset;
}

void write_gd_trace(const std::string& path, const cal::GdTrace& trace,
                    const Json& manifest) {
  auto out = open_out(path);
  write_manifest_line(out, manifest);
  std::size_t n_pos = 0;
  for (const auto& it : trace.iterations) {
    n_pos = std::max(n_pos, it.force_norms_n.size());
  }
  out << "k,eta_x_m,eta_y_m,objective_n,step_m_per_n,xi_x_m,xi_y_m,accepted,"
         "measurements";
  for (std::size_t i = 0; i < n_pos; ++i) out << ",f_norm_" << i << "_n";
  out << '\n';
  for (const auto& it : trace.iterations) {
    out << it.k << ',' << format_double(it.eta_m.x()) << ','
        << format_double(it.eta_m.y()) << ',' << format_double(it.objective_n)
        << ',' << format_double(it.step_m_per_n) << ','
        << format_double(it.perturbation_m.x()) << ','
        << format_double(it.perturbation_m.y()) << ',' << int(it.accepted)
        << ',' << it.measurements;
    for (std::size_t i = 0; i < n_pos; ++i) {
      out << ','
          << (i < it.force_norms_n.size() ? format_double(it.force_norms_n[i])
                                          : std::string());
    }
    out << '\n';
  }
}

void write_profile_csv(const std::string& path, const traj::Profile& profile,
                       const Json& manifest) {
  auto out = open_out(path);
  write_manifest_line(out, manifest);
  out << "t_s,pos_m,vel_m_s,acc_m_s2,jerk_m_s3,snap_m_s4\n";
  for (std::size_t i = 0; i < profile.t_s.size(); ++i) {
    out << format_double(profile.t_s[i]) << ','
        << format_double(profile.pos_m[i]) << ','
        << format_double(profile.vel_m_s[i]) << ','
        << format_double(profile.acc_m_s2[i]) << ','
        << format_double(profile.jerk_m_s3[i]) << ','
        << format_double(profile.snap_m_s4[i]) << '\n';
  }
}

void write_ma_series(const std::string& path, const metrics::MaSeries& series,
                     double dt_s, const Json& manifest) {
  auto out = open_out(path);
  write_manifest_line(out, manifest);
  out << "t_s,ma_m\n";
  for (std::size_t k = 0; k < series.value.size(); ++k) {
    const double t = static_cast<double>(series.first_index + k) * dt_s;
    out << format_double(t) << ',' << format_double(series.value[k]) << '\n';
  }
}

void write_json_file(const std::string& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path);
  return Json::parse(in);
}

namespace {

Json axis_to_json(const gp::GpModel& model) {
  const gp::KernelParams& p = model.params();
  Json j;
  j["hyperparams"] = {{"signal_var_m2", p.signal_var_m2},
                      {"rbf_x_m2", p.rbf_x_m2},
                      {"rbf_y_m2", p.rbf_y_m2},
                      {"periodic_x", p.periodic_x},
                      {"periodic_y", p.periodic_y},
                      {"noise_var_m2", p.noise_var_m2},
                      {"period_m", p.period_m}};
  j["train_x_m"] = model.input_x();
  j["train_y_m"] = model.input_y();
  j["targets_m"] = model.targets();
  return j;
}

gp::GpModel axis_from_json(const Json& j) {
  const Json& h = j.at("hyperparams");
  gp::KernelParams p;
  p.signal_var_m2 = h.at("signal_var_m2").get<double>();
  p.rbf_x_m2 = h.at("rbf_x_m2").get<double>();
  p.rbf_y_m2 = h.at("rbf_y_m2").get<double>();
  p.periodic_x = h.at("periodic_x").get<double>();
  p.periodic_y = h.at("periodic_y").get<double>();
  p.noise_var_m2 = h.at("noise_var_m2").get<double>();
  p.period_m = h.at("period_m").get<double>();
  const auto xs = j.at("train_x_m").get<std::vector<double>>();
  const auto ys = j.at("train_y_m").get<std::vector<double>>();
  const auto targets = j.at("targets_m").get<std::vector<double>>();
  if (xs.size() != ys.size() || xs.size() != targets.size()) {
    throw ConfigError("gp model file: inconsistent array lengths");
  }
  std::vector<Vec2> inputs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) inputs[i] = {xs[i], ys[i]};
  return gp::GpModel::fit(inputs, targets, p);
}

}  // namespace

void save_feedforward(const std::string& path, const gp::FeedforwardModel& ff,
                      const Json& manifest) {
  Json j;
  j["format"] = "pmsim-gp-model";
  j["version"] = 1;
  j["manifest"] = manifest;
  j["hull_lo_m"] = Json::array({ff.hull_lo.x(), ff.hull_lo.y()});
  j["hull_hi_m"] = Json::array({ff.hull_hi.x(), ff.hull_hi.y()});
  j["axes"] = {{"x", axis_to_json(ff.axis_x)}, {"y", axis_to_json(ff.axis_y)}};
  write_json_file(path, j);
}

gp::FeedforwardModel load_feedforward(const std::string& path,
                                      Json* manifest_out) {
  const Json j = read_json_file(path);
  if (j.value("format", std::string()) != "pmsim-gp-model") {
    throw ConfigError("not a pmsim GP model file: " + path);
  }
  if (j.value("version", 0) != 1) {
    throw ConfigError("unsupported model file version in " + path);
  }
  if (manifest_out && j.contains("manifest")) *manifest_out = j.at("manifest");
  gp::FeedforwardModel ff;
  ff.axis_x = axis_from_json(j.at("axes").at("x"));
  ff.axis_y = axis_from_json(j.at("axes").at("y"));
  const auto lo = j.at("hull_lo_m").get<std::vector<double>>();
  const auto hi = j.at("hull_hi_m").get<std::vector<double>>();
  if (lo.size() != 2 || hi.size() != 2) {
    throw ConfigError("gp model file: malformed hull");
  }
  ff.hull_lo = {lo[0], lo[1]};
  ff.hull_hi = {hi[0], hi[1]};
  return ff;
}

}  // namespace pmsim::io
