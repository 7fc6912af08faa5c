#pragma once

// File formats and run plumbing: trajectory CSV, parameter/report JSON,
// fail-closed run configs, and the manifest that ties artifacts of one
// run together. JSON holds parameters and reports (human-diffable),
// CSV holds time series.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "ncrsm/em.hpp"
#include "ncrsm/model.hpp"
#include "ncrsm/simulator.hpp"

namespace ncrsm {

using Json = nlohmann::json;

// 64-bit FNV-1a of a file's bytes, as a hex string. Throws ValidationError
// if the file cannot be read.
std::string file_hash(const std::string& path);

// ---------------------------------------------------------------------------
// Trajectory CSV.
//
// Header: t,y_1..y_<ny> and, when the trajectory carries ground truth,
// xc_1..xc_<nxc>,xa_1..xa_<nxa>,sc,sa. Values use 17 significant digits so
// doubles survive a round-trip. Lines starting with '#' are metadata
// comments; writers emit "# manifest=<path>" when given one. Boundary
// states are not part of the CSV.

void write_trajectory(const std::string& path, const Trajectory& traj,
                      const std::string& manifest_ref = "");

// Parse errors carry "path:line:column". Missing truth columns simply leave
// the truth fields empty.
Trajectory read_trajectory(const std::string& path);

// ---------------------------------------------------------------------------
// Parameter JSON. Matrices are {"rows","cols","data"} with row-major nested
// data arrays; vectors are plain arrays. save(load(f)) is byte-identical
// for files produced by save_params.

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& what);

Json params_to_json(const ModelParams& params,
                    const std::string& manifest_ref = "");
ModelParams params_from_json(const Json& j);

// A loaded params document keeps the manifest reference it was saved with,
// so load followed by save reproduces the file byte for byte.
struct ParamsFile {
  ModelParams params;
  std::string manifest_ref;
};

void save_params(const std::string& path, const ModelParams& params,
                 const std::string& manifest_ref = "");
ParamsFile load_params(const std::string& path);

// Ground-truth sidecar written by the simulator: the generating parameters
// plus the boundary states and seed.
struct TruthFile {
  ModelParams params;
  Vector x_c0;
  Vector x_aT1;
  std::uint64_t seed = 0;
  std::string manifest_ref;
};

void save_truth(const std::string& path, const TruthFile& truth);
TruthFile load_truth(const std::string& path);

// Identification report (one-way; estimated parameters live in their own
// params JSON).
Json em_report_to_json(const EmReport& report,
                       const std::string& manifest_ref = "");
void save_em_report(const std::string& path, const EmReport& report,
                    const std::string& manifest_ref = "");

// ---------------------------------------------------------------------------
// Run configs. Parsing is fail-closed: unknown keys anywhere in the
// document are a ValidationError.

struct SimulateConfig {
  std::uint64_t seed = 0;
  int T = 0;
  ModelParams params;
  Vector x_c0;   // defaults to zeros when absent
  Vector x_aT1;  // defaults to zeros when absent
  bool write_truth = true;
};

struct IdentifyConfig {
  EmConfig em;
  Vector x_c0;   // defaults to zeros when absent
  Vector x_aT1;  // defaults to zeros when absent
};

SimulateConfig load_simulate_config(const std::string& path);
IdentifyConfig load_identify_config(const std::string& path, const Dims& dims);

// ---------------------------------------------------------------------------
// Run manifest: one JSON per CLI run recording what produced the artifacts.

struct RunManifest {
  std::string tool_version;
  std::string command;
  Json config_echo;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a hex
  double wall_clock_seconds = 0.0;
  std::string stop_reason;
  std::vector<std::string> artifacts;
};

extern const char* const kToolVersion;

void save_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace ncrsm
