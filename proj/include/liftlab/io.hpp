#pragma once

#include "liftlab/divergence.hpp"
#include "liftlab/flow_poincare.hpp"
#include "liftlab/lift_check.hpp"
#include "liftlab/simulate.hpp"
#include "liftlab/spectral.hpp"

#include <json.hpp>

#include <string>

namespace liftlab {

inline constexpr const char* kCodeVersion = "liftlab-1.0.0";

// temp file in the same directory, then rename
void atomic_write(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// FNV-1a 64 over the compact dump of the JSON value (keys sorted), as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

// Shortest round-trip decimal form.
std::string fmt_num(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  void add(std::vector<std::string> row);
};
// Appends config_hash and code_version columns to every row.
std::string render_csv(const CsvTable& t, const std::string& hash);

nlohmann::json to_json(const OperatorMatrix& op);
nlohmann::json to_json(const SpectralData& sd, int max_modes = 50);
nlohmann::json to_json(const LiftReport& r);
nlohmann::json to_json(const AssumptionConstants& c);
nlohmann::json to_json(const FlowReport& r);

CsvTable trajectory_table(const Trajectory& tr);

// Binary event log, little-endian:
//   magic "LLEV", u32 version (1), u32 d, u64 count,
//   then per record f64 t, f64 x[d], f64 v[d], u8 kind.
std::string encode_event_log(const Trajectory& tr);
Trajectory decode_event_log(const std::string& bytes);

}  // namespace liftlab
