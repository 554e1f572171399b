#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"
#include "rtdnas/decode.hpp"
#include "rtdnas/pareto.hpp"
#include "rtdnas/random.hpp"
#include "rtdnas/search.hpp"

namespace rtdnas::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kInfeasible = 2, kIoError = 3 };

inline constexpr const char* kParamsFormat = "rtdnas.arch_params/1";

std::string hex_hash(std::uint64_t h);
std::string format_fixed(double v, int digits = 6);

// Arch-param document: format tag, topology hash, coefficients in layout order.
std::string params_to_json(const SupernetTopology& topology, const ArchParams& params);
// Throws ConfigError when the document belongs to a different topology.
ArchParams params_from_json(const SupernetTopology& topology, const nlohmann::json& doc);

std::string search_log_text(const SearchReport& report);

struct SearchOutcome {
  SearchReport report;
  bool feasible = true;
};

// Writes search_log.txt, arch_params.json and search_summary.json into
// cfg.out_dir. The report is returned even when the constraints fail.
SearchOutcome cmd_search(const RunConfig& cfg);

// One decoded network per n_l. Writes decoded_<method>_nl<N>.json per entry
// and points_<method>.csv with one ParetoPoint row per entry.
std::vector<DecodedNetwork> cmd_decode(const RunConfig& cfg, const std::filesystem::path& params_file,
                                       const std::vector<std::size_t>& n_l, const std::string& method);

// Single-path architecture: uniform transitions from the input, then one
// uniform (j, o) per tensor for each cell on the path.
DecodedNetwork sample_architecture(const DecodeContext& ctx, Rng& rng);

// Writes samples.csv.
std::vector<ParetoPoint> cmd_sample_random(const RunConfig& cfg, std::size_t n_samples);

std::string points_csv(const std::vector<ParetoPoint>& points);
// Parses a points CSV; malformed rows raise ConfigError with origin:line.
std::vector<ParetoPoint> parse_points_csv(const std::string& text, const std::string& origin);

struct ParetoReport {
  std::vector<ParetoPoint> points;
  std::vector<std::size_t> frontier;
};

// Writes pareto_frontier.csv and pareto_plot.csv into out_dir.
ParetoReport cmd_pareto(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
                        const ValidRegion& region = {});

int run_cli(int argc, char** argv);

}  // namespace rtdnas::cli
