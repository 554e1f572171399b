#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rtdnas/decode.hpp"
#include "rtdnas/latency.hpp"
#include "rtdnas/loss.hpp"
#include "rtdnas/relaxation.hpp"
#include "rtdnas/search.hpp"
#include "rtdnas/supernet.hpp"

namespace rtdnas::cli {

// One row of a measured latency table: "<op id> <scale> <latency ms>".
struct ProfileRow {
  std::string op_id;
  int scale = 0;
  double latency_ms = 0.0;
};

// Parses whitespace- or comma-separated rows; '#' starts a comment.
std::vector<ProfileRow> parse_profile_table(const std::string& text, const std::string& origin);

struct TargetEntry {
  std::string cell;
  int tensor = 1;
  int source = 0;
  std::string op;
  double value = 0.0;
};

struct SurrogateSpec {
  std::optional<SurrogateGenerator> generator;
  std::vector<TargetEntry> targets;  // used when no generator is given
  double sharpness = 1.0;
};

struct RunConfig {
  std::filesystem::path source;
  SkeletonConfig skeleton;
  std::vector<ProfileRow> profile;
  SurrogateSpec surrogate;
  double pipeline_overlap = 1.0;
  LossConfig loss;
  OptimizerConfig optimizer;
  GaConfig ga;
  OuterLoopConfig outer;
  double path_gain = kDefaultPathGain;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 42;
};

// Loads a JSON config, resolving {"include": "file"} nodes relative to the
// including file. Throws ConfigError naming the offending key, or IoError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

class IoError : public Error {
 public:
  using Error::Error;
};

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Everything derived from a RunConfig.
struct Experiment {
  SupernetTopology topology;
  SurrogateModel surrogate;
  LatencyModel latency;
};

Experiment build_experiment(const RunConfig& cfg);

}  // namespace rtdnas::cli
