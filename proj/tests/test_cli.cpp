#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pmsim/io/csv.hpp"
#include "reference/temp_dir.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using pmsim::testfix::TempDir;
using Json = nlohmann::ordered_json;

namespace {

std::string pmsim_bin() {
  const char* bin = std::getenv("PMSIM_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "PMSIM_BIN must point at the pmsim binary");
  return bin;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const TempDir& tmp, const std::string& args,
                  const std::string& env_prefix = "") {
  const std::string out_file = tmp.file("stdout.txt");
  const std::string err_file = tmp.file("stderr.txt");
  const std::string cmd = env_prefix + pmsim_bin() + " " + args + " >" +
                          out_file + " 2>" + err_file;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_config(const std::string& path, const Json& extra = Json::object()) {
  Json doc;
  doc["field"]["random"]["seed"] = 42;
  doc["scenario"]["lead_in_s"] = 0.2;
  doc["collect"]["grid"] = {5, 5};
  doc["collect"]["span_m"] = {0.16, 0.16};
  doc["calibrate"]["grid"] = {2, 2};
  doc["calibrate"]["max_iterations"] = 10;
  doc.update(extra, true);
  std::ofstream out(path);
  out << doc.dump(2);
}

}  // namespace

TEST_CASE("cli: dry-run prints the resolved config") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const auto r = run_cli(tmp, "simulate " + tmp.file("config.json") +
                                  " --dry-run --out " + tmp.file("never"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"coil_pitch_m\"") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(tmp.file("never")));
}

TEST_CASE("cli: malformed config names the offending key, exit 1") {
  TempDir tmp;
  {
    std::ofstream out(tmp.file("bad.json"));
    out << R"({"plant": {"mass_kgs": 10}})";
  }
  const auto r = run_cli(tmp, "simulate " + tmp.file("bad.json") + " --out " +
                                  tmp.file("o"));
  CHECK(r.exit_code == 1);
  CHECK(r.err.find("mass_kgs") != std::string::npos);
}

TEST_CASE("cli: unknown mode rejected") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const auto r = run_cli(tmp, "simulate " + tmp.file("config.json") +
                                  " --mode warp --out " + tmp.file("o"));
  CHECK(r.exit_code == 1);
}

TEST_CASE("cli: profile export produces the CSV") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const auto r = run_cli(tmp, "profile " + tmp.file("config.json") +
                                  " --out " + tmp.file("prof"));
  CHECK(r.exit_code == 0);
  const std::string csv = slurp_file(tmp.file("prof") + "/profile.csv");
  CHECK(csv.rfind("#{", 0) == 0);
  CHECK(csv.find("t_s,pos_m,vel_m_s,acc_m_s2,jerk_m_s3,snap_m_s4") !=
        std::string::npos);
}

TEST_CASE("cli: simulate is byte-identical across reruns") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const std::string base =
      "simulate " + tmp.file("config.json") + " --mode baseline --out ";
  CHECK(run_cli(tmp, base + tmp.file("a")).exit_code == 0);
  CHECK(run_cli(tmp, base + tmp.file("b")).exit_code == 0);
  CHECK(slurp_file(tmp.file("a") + "/simlog.csv") ==
        slurp_file(tmp.file("b") + "/simlog.csv"));
  CHECK(slurp_file(tmp.file("a") + "/manifest.json") ==
        slurp_file(tmp.file("b") + "/manifest.json"));
}

TEST_CASE("cli: collect output independent of worker count") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const std::string cfg = tmp.file("config.json");
  CHECK(run_cli(tmp, "collect " + cfg + " --workers 1 --out " + tmp.file("w1"))
            .exit_code == 0);
  CHECK(run_cli(tmp, "collect " + cfg + " --workers 8 --out " + tmp.file("w8"))
            .exit_code == 0);
  CHECK(run_cli(tmp, "collect " + cfg + " --out " + tmp.file("we"),
                "PMSIM_WORKERS=3 ")
            .exit_code == 0);
  const std::string w1 = slurp_file(tmp.file("w1") + "/dataset.csv");
  CHECK(w1 == slurp_file(tmp.file("w8") + "/dataset.csv"));
  CHECK(w1 == slurp_file(tmp.file("we") + "/dataset.csv"));
  // 5x5 grid
  CHECK(std::count(w1.begin(), w1.end(), '\n') == 25 + 2);
}

TEST_CASE("cli: fit-gp trains, validates and honors the BFR floor") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  REQUIRE(run_cli(tmp, "collect " + tmp.file("config.json") + " --workers 4" +
                           " --out " + tmp.file("ds"))
              .exit_code == 0);
  const std::string dataset = tmp.file("ds") + "/dataset.csv";

  SUBCASE("normal fit reports both BFR columns") {
    const auto r = run_cli(tmp, "fit-gp " + dataset + " --split 0.8" +
                                    " --budget 1 --out " + tmp.file("fit"));
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("Training data set") != std::string::npos);
    const Json report =
        Json::parse(slurp_file(tmp.file("fit") + "/bfr_report.json"));
    CHECK(report["bfr_train_pct"].size() == 2);
    CHECK(report["bfr_validation_pct"].size() == 2);
    CHECK(std::filesystem::exists(tmp.file("fit") + "/model.json"));
  }

  SUBCASE("split 1.0 reports n/a validation") {
    const auto r = run_cli(tmp, "fit-gp " + dataset + " --split 1.0" +
                                    " --budget 0 --bfr-floor 99 --out " +
                                    tmp.file("fit1"));
    CHECK(r.exit_code == 0);  // no validation set, floor cannot trip
    const Json report =
        Json::parse(slurp_file(tmp.file("fit1") + "/bfr_report.json"));
    CHECK(report["bfr_validation_pct"] == "n/a");
    CHECK(r.out.find("n/a") != std::string::npos);
  }

  SUBCASE("shuffled targets destroy validation BFR, exit 3") {
    // permute the eta columns against the position columns
    auto ds = pmsim::io::read_eta_dataset(dataset);
    std::vector<pmsim::Vec2> etas;
    for (const auto& p : ds.points) etas.push_back(p.eta_star_m);
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
      ds.points[i].eta_star_m = etas[(i + 7) % etas.size()];
    }
    pmsim::io::write_eta_dataset(tmp.file("shuffled.csv"), ds, Json::object());
    const auto r =
        run_cli(tmp, "fit-gp " + tmp.file("shuffled.csv") +
                         " --split 0.8 --budget 1 --bfr-floor 50 --out " +
                         tmp.file("fit_bad"));
    CHECK(r.exit_code == 3);
  }

  SUBCASE("tiny dataset rejected") {
    auto ds = pmsim::io::read_eta_dataset(dataset);
    ds.points.resize(5);
    pmsim::io::write_eta_dataset(tmp.file("tiny.csv"), ds, Json::object());
    const auto r = run_cli(tmp, "fit-gp " + tmp.file("tiny.csv") + " --out " +
                                    tmp.file("fit_tiny"));
    CHECK(r.exit_code == 1);
  }
}

TEST_CASE("cli: calibrate writes a monotone trace and eta_star") {
  TempDir tmp;
  Json extra;
  extra["field"] = {{"offset_m", {3e-4, -2e-4}}};
  write_config(tmp.file("config.json"), extra);
  const auto r = run_cli(tmp, "calibrate " + tmp.file("config.json") +
                                  " --out " + tmp.file("cal"));
  CHECK(r.exit_code == 0);
  const Json eta = Json::parse(slurp_file(tmp.file("cal") + "/eta_star.json"));
  CHECK(eta["eta_star_m"].size() == 2);
  const double ex = eta["eta_star_m"][0].get<double>();
  const double ey = eta["eta_star_m"][1].get<double>();
  CHECK(std::abs(ex - 3e-4) < 0.05 * 3e-4 + 1e-6);
  CHECK(std::abs(ey + 2e-4) < 0.05 * 2e-4 + 1e-6);

  // accepted-iteration objectives decrease down the trace
  std::ifstream in(tmp.file("cal") + "/trace.csv");
  std::string line;
  std::getline(in, line);  // manifest
  std::getline(in, line);  // header
  double last = 1e300;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    REQUIRE(cells.size() >= 9);
    if (cells[7] == "1") {
      const double j = pmsim::io::parse_double(cells[3]);
      CHECK(j <= last + 1e-12);
      last = j;
    }
  }
}

TEST_CASE("cli: report computes reductions only with a baseline pair") {
  TempDir tmp;
  write_config(tmp.file("config.json"));
  const std::string cfg = tmp.file("config.json");
  REQUIRE(run_cli(tmp, "simulate " + cfg + " --mode baseline --out " +
                           tmp.file("rb"))
              .exit_code == 0);
  REQUIRE(run_cli(tmp, "simulate " + cfg + " --mode dynamic --out " +
                           tmp.file("rd"))
              .exit_code == 0);

  SUBCASE("single log omits the reduction field") {
    const auto r = run_cli(tmp, "report " + tmp.file("rb") + "/simlog.csv" +
                                    " --out " + tmp.file("rep1"));
    CHECK(r.exit_code == 0);
    const Json rep = Json::parse(slurp_file(tmp.file("rep1") + "/report.json"));
    REQUIRE(rep["runs"].size() == 1);
    CHECK_FALSE(rep["runs"][0].contains("reduction_vs_baseline_pct"));
  }

  SUBCASE("baseline + dynamic reports a reduction and is rerun-stable") {
    const std::string args = "report " + tmp.file("rb") + "/simlog.csv " +
                             tmp.file("rd") + "/simlog.csv --out ";
    CHECK(run_cli(tmp, args + tmp.file("rep2")).exit_code == 0);
    CHECK(run_cli(tmp, args + tmp.file("rep3")).exit_code == 0);
    const std::string a = slurp_file(tmp.file("rep2") + "/report.json");
    CHECK(a == slurp_file(tmp.file("rep3") + "/report.json"));
    const Json rep = Json::parse(a);
    REQUIRE(rep["runs"].size() == 2);
    bool found = false;
    for (const auto& run : rep["runs"]) {
      if (run["mode"] == "dynamic") {
        CHECK(run.contains("reduction_vs_baseline_pct"));
        found = true;
      }
    }
    CHECK(found);
    // MA traces are emitted per mode
    CHECK(std::filesystem::exists(tmp.file("rep2") + "/ma_baseline.csv"));
    CHECK(std::filesystem::exists(tmp.file("rep2") + "/ma_dynamic.csv"));
  }
}
