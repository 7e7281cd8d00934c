#pragma once

#include "pmsim/calibrate.hpp"
#include "pmsim/common.hpp"
#include "pmsim/gp.hpp"
#include "pmsim/metrics.hpp"
#include "pmsim/sim.hpp"
#include "pmsim/trajectory.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pmsim::io {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Shortest round-trip decimal form (to_chars); parsing it back recovers
/// the identical bits.
std::string format_double(double v);
double parse_double(std::string_view text);

// CSV dialect: '#'-prefixed JSON manifest line, then a header row, then
// comma-separated records with '.' decimals.

void write_sim_log(const std::string& path, const sim::SimLog& log,
                   const Json& manifest);
sim::SimLog read_sim_log(const std::string& path, Json* manifest_out = nullptr);

void write_eta_dataset(const std::string& path, const sim::EtaDataset& dataset,
                       const Json& manifest);
sim::EtaDataset read_eta_dataset(const std::string& path,
                                 Json* manifest_out = nullptr);

void write_gd_trace(const std::string& path, const cal::GdTrace& trace,
                    const Json& manifest);

void write_profile_csv(const std::string& path, const traj::Profile& profile,
                       const Json& manifest);

void write_ma_series(const std::string& path, const metrics::MaSeries& series,
                     double dt_s, const Json& manifest);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

/// Model file: hyperparameters plus training data per axis; the factorization
/// is recomputed when loading.
void save_feedforward(const std::string& path, const gp::FeedforwardModel& ff,
                      const Json& manifest);
gp::FeedforwardModel load_feedforward(const std::string& path,
                                      Json* manifest_out = nullptr);

}  // namespace pmsim::io
