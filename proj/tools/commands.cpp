#include "commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace rtdnas::cli {

using nlohmann::json;

std::string hex_hash(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace {

std::string format_sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

json path_json(const SupernetTopology& topology, const Path& p) {
  json cells = json::array();
  for (std::size_t c : p.cells) cells.push_back(topology.cell(c).id());
  return json{{"cells", cells}, {"log_weight", p.weight}, {"latency_ms", p.latency_ms}};
}

json network_json(const SupernetTopology& topology, const DecodedNetwork& net, std::size_t n_l) {
  json doc;
  doc["method"] = net.method;
  doc["n_l"] = n_l;
  doc["topology_hash"] = hex_hash(topology.hash());
  json paths = json::array();
  for (const auto& p : net.paths) paths.push_back(path_json(topology, p));
  doc["paths"] = paths;
  json cells = json::array();
  for (std::size_t c : net.used_cells()) {
    json edges = json::array();
    const auto& sel = net.selections[c];
    for (std::size_t t = 0; t < sel.size(); ++t) {
      edges.push_back(json{{"i", t + 1}, {"j", sel[t].source}, {"op", topology.ops()[sel[t].op].id}});
    }
    cells.push_back(json{{"cell", topology.cell(c).id()}, {"edges", edges}});
  }
  doc["cells"] = cells;
  doc["latency_ms"] = net.latency_ms;
  doc["throughput_fps"] = net.throughput_fps;
  doc["score"] = net.score;
  doc["feasible"] = net.feasible;
  return doc;
}

ParetoPoint to_point(std::string id, const DecodedNetwork& net, std::string source) {
  return ParetoPoint{std::move(id), net.score, net.latency_ms, net.throughput_fps, std::move(source)};
}

DecodeContext make_context(const RunConfig& cfg, const Experiment& ex) {
  return DecodeContext{ex.topology, ex.surrogate, ex.latency, cfg.loss.latency_ub_ms, cfg.path_gain};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where, const char* column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(where + ": malformed " + column + " '" + s + "'");
}

}  // namespace

std::string params_to_json(const SupernetTopology& topology, const ArchParams& params) {
  json coeffs = json::array();
  for (std::size_t k = 0; k < params.size(); ++k) {
    coeffs.push_back(json{{"key", param_key(topology, k)}, {"value", params[k]}});
  }
  json doc;
  doc["format"] = kParamsFormat;
  doc["topology_hash"] = hex_hash(topology.hash());
  doc["coefficients"] = coeffs;
  return doc.dump(1) + "\n";
}

ArchParams params_from_json(const SupernetTopology& topology, const json& doc) {
  if (!doc.is_object() || doc.value("format", "") != kParamsFormat) {
    throw ConfigError("arch params: missing or unknown format tag");
  }
  const std::string hash = doc.value("topology_hash", "");
  if (hash != hex_hash(topology.hash())) {
    throw ConfigError("arch params: topology hash " + hash + " does not match the config (" +
                      hex_hash(topology.hash()) + "); the params are stale");
  }
  const json& coeffs = doc.at("coefficients");
  if (!coeffs.is_array() || coeffs.size() != topology.param_count()) {
    throw ConfigError("arch params: expected " + std::to_string(topology.param_count()) + " coefficients");
  }
  std::vector<double> values;
  values.reserve(coeffs.size());
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    const json& e = coeffs[k];
    if (!e.is_object() || e.value("key", "") != param_key(topology, k) || !e.contains("value") ||
        !e.at("value").is_number()) {
      throw ConfigError("arch params: coefficient " + std::to_string(k) + " is malformed or out of order");
    }
    values.push_back(e.at("value").get<double>());
  }
  return ArchParams(topology, std::move(values));
}

std::string search_log_text(const SearchReport& report) {
  std::ostringstream out;
  for (const auto& e : report.epochs) {
    out << "outer=" << e.outer_iteration << " epoch=" << e.epoch << " lr=" << format_sci(e.learning_rate)
        << " latency_ub_ms=" << format_fixed(e.latency_ub_ms) << " L_a=" << format_sci(e.terms.accuracy)
        << " L_t=" << format_sci(e.terms.latency_ms) << " penalty=" << format_sci(e.terms.penalty)
        << " total=" << format_sci(e.terms.total) << " clamped=" << (e.terms.clamped ? 1 : 0) << "\n";
  }
  for (std::size_t i = 0; i < report.outer.size(); ++i) {
    const auto& o = report.outer[i];
    out << "outer=" << i << " latency_ub_ms=" << format_fixed(o.latency_ub_ms)
        << " decoded_latency_ms=" << format_fixed(o.decoded_latency_ms)
        << " throughput_fps=" << format_fixed(o.throughput_fps) << " satisfied=" << (o.satisfied ? 1 : 0) << "\n";
  }
  return out.str();
}

SearchOutcome cmd_search(const RunConfig& cfg) {
  const Experiment ex = build_experiment(cfg);
  const std::uint64_t seed = mix_seed(cfg.seed, "search");
  SearchOutcome outcome;
  try {
    outcome.report = constrained_search(ex.topology, ex.surrogate, ex.latency, cfg.loss, cfg.optimizer, cfg.outer, seed);
  } catch (const InfeasibleSearch& e) {
    outcome.report = e.report();
    outcome.feasible = false;
  }
  const SearchReport& r = outcome.report;

  write_text_file(cfg.out_dir / "search_log.txt", search_log_text(r));
  write_text_file(cfg.out_dir / "arch_params.json", params_to_json(ex.topology, r.final_params));

  json summary;
  summary["seed"] = cfg.seed;
  summary["topology_hash"] = hex_hash(ex.topology.hash());
  summary["cells"] = ex.topology.n_cells();
  summary["paths"] = ex.topology.path_count();
  summary["parameters"] = ex.topology.param_count();
  summary["feasible"] = outcome.feasible;
  summary["clamp_events"] = r.clamp_events;
  summary["latency_ub_ms"] = cfg.loss.latency_ub_ms;
  summary["throughput_min_fps"] = cfg.outer.throughput_min_fps;
  json epochs = json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back(json{{"outer", e.outer_iteration},
                          {"epoch", e.epoch},
                          {"latency_ub_ms", e.latency_ub_ms},
                          {"accuracy_loss", e.terms.accuracy},
                          {"latency_ms", e.terms.latency_ms},
                          {"penalty", e.terms.penalty},
                          {"total", e.terms.total}});
  }
  summary["epochs"] = epochs;
  json outer = json::array();
  for (const auto& o : r.outer) {
    outer.push_back(json{{"latency_ub_ms", o.latency_ub_ms},
                         {"decoded_latency_ms", o.decoded_latency_ms},
                         {"throughput_fps", o.throughput_fps},
                         {"satisfied", o.satisfied}});
  }
  summary["outer_iterations"] = outer;
  if (!r.epochs.empty()) {
    const auto& last = r.epochs.back().terms;
    summary["final"] = json{{"accuracy_loss", last.accuracy},
                            {"latency_ms", last.latency_ms},
                            {"penalty", last.penalty},
                            {"total", last.total}};
  }
  write_text_file(cfg.out_dir / "search_summary.json", summary.dump(1) + "\n");
  return outcome;
}

std::vector<DecodedNetwork> cmd_decode(const RunConfig& cfg, const std::filesystem::path& params_file,
                                       const std::vector<std::size_t>& n_l, const std::string& method) {
  if (method != "greedy" && method != "ga") throw ConfigError("decode method must be 'greedy' or 'ga'");
  if (n_l.empty()) throw ConfigError("decode needs at least one n_l");
  const Experiment ex = build_experiment(cfg);
  const ArchParams params = params_from_json(ex.topology, read_json_file(params_file));
  const DecodeContext ctx = make_context(cfg, ex);
  cfg.ga.validate();

  std::vector<DecodedNetwork> nets;
  std::vector<ParetoPoint> points;
  for (std::size_t n : n_l) {
    if (n == 0) throw ConfigError("n_l must be >= 1");
    DecodedNetwork net = method == "greedy" ? decode_greedy(ctx, params, n)
                                            : decode_ga(ctx, params, n, cfg.ga, mix_seed(cfg.seed, "ga"));
    const std::string id = method + "_nl" + std::to_string(n);
    write_text_file(cfg.out_dir / ("decoded_" + id + ".json"), network_json(ex.topology, net, n).dump(1) + "\n");
    points.push_back(to_point(id, net, method));
    nets.push_back(std::move(net));
  }
  write_text_file(cfg.out_dir / ("points_" + method + ".csv"), points_csv(points));
  return nets;
}

DecodedNetwork sample_architecture(const DecodeContext& ctx, Rng& rng) {
  const auto& topo = ctx.topology;
  Path path;
  NodeId node = topo.input_node();
  while (true) {
    const auto out = topo.out_edges(node);
    node = topo.edges()[out[rng.index(out.size())]].to;
    if (node == topo.output_node()) break;
    path.cells.push_back(SupernetTopology::node_cell(node));
  }
  std::vector<CellSelection> selections(topo.n_cells());
  for (std::size_t c = 0; c < topo.n_cells(); ++c) {
    selections[c].assign(static_cast<std::size_t>(topo.n_tensors()), EdgeChoice{0, 0});
  }
  for (std::size_t c : path.cells) {
    for (int i = 1; i <= topo.n_tensors(); ++i) {
      const std::size_t pick = rng.index(static_cast<std::size_t>(i) * topo.n_ops());
      selections[c][i - 1] = EdgeChoice{static_cast<int>(pick / topo.n_ops()), pick % topo.n_ops()};
    }
  }
  path.latency_ms = path_latency(topo, path.cells, selections, ctx.latency_model);
  return evaluate_network(ctx, "random", {std::move(path)}, std::move(selections));
}

std::vector<ParetoPoint> cmd_sample_random(const RunConfig& cfg, std::size_t n_samples) {
  if (n_samples == 0) throw ConfigError("sample count must be >= 1");
  const Experiment ex = build_experiment(cfg);
  const DecodeContext ctx = make_context(cfg, ex);
  Rng rng = Rng::stream(cfg.seed, "sampling");
  std::vector<ParetoPoint> points;
  points.reserve(n_samples);
  char id[32];
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::snprintf(id, sizeof id, "random_%05zu", s);
    points.push_back(to_point(id, sample_architecture(ctx, rng), "random"));
  }
  write_text_file(cfg.out_dir / "samples.csv", points_csv(points));
  return points;
}

std::string points_csv(const std::vector<ParetoPoint>& points) {
  std::string out = "id,score,latency_ms,throughput_fps,source\n";
  for (const auto& p : points) {
    out += p.id + "," + format_fixed(p.score) + "," + format_fixed(p.latency_ms) + "," +
           format_fixed(p.throughput_fps) + "," + p.source + "\n";
  }
  return out;
}

std::vector<ParetoPoint> parse_points_csv(const std::string& text, const std::string& origin) {
  std::vector<ParetoPoint> points;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (line_no == 1 && line.rfind("id,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw ConfigError(where + ": expected 5 fields, got " + std::to_string(f.size()));
    ParetoPoint p;
    p.id = f[0];
    p.score = parse_double(f[1], where, "score");
    p.latency_ms = parse_double(f[2], where, "latency_ms");
    p.throughput_fps = parse_double(f[3], where, "throughput_fps");
    p.source = f[4];
    if (p.id.empty()) throw ConfigError(where + ": empty id");
    if (!(p.latency_ms > 0.0)) throw ConfigError(where + ": latency_ms must be > 0");
    points.push_back(std::move(p));
  }
  return points;
}

ParetoReport cmd_pareto(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out_dir,
                        const ValidRegion& region) {
  if (inputs.empty()) throw ConfigError("pareto needs at least one input file");
  ParetoReport rep;
  for (const auto& file : inputs) {
    auto pts = parse_points_csv(read_text_file(file), file.string());
    rep.points.insert(rep.points.end(), pts.begin(), pts.end());
  }
  rep.frontier = pareto_frontier(rep.points);

  std::vector<ParetoPoint> valid;
  std::vector<std::size_t> valid_index;
  for (std::size_t k = 0; k < rep.points.size(); ++k) {
    if (region.contains(rep.points[k])) {
      valid.push_back(rep.points[k]);
      valid_index.push_back(k);
    }
  }
  std::vector<char> on_front(rep.points.size(), 0), on_valid_front(rep.points.size(), 0);
  for (std::size_t k : rep.frontier) on_front[k] = 1;
  for (std::size_t k : pareto_frontier(valid)) on_valid_front[valid_index[k]] = 1;

  std::string front = "id,score,latency_ms,throughput_fps,source,in_valid_region\n";
  for (std::size_t k : rep.frontier) {
    const auto& p = rep.points[k];
    front += p.id + "," + format_fixed(p.score) + "," + format_fixed(p.latency_ms) + "," +
             format_fixed(p.throughput_fps) + "," + p.source + "," + (region.contains(p) ? "1" : "0") + "\n";
  }
  std::string plot = "id,score,latency_ms,throughput_fps,source,in_valid_region,on_frontier,on_valid_frontier\n";
  for (std::size_t k = 0; k < rep.points.size(); ++k) {
    const auto& p = rep.points[k];
    plot += p.id + "," + format_fixed(p.score) + "," + format_fixed(p.latency_ms) + "," +
            format_fixed(p.throughput_fps) + "," + p.source + "," + (region.contains(p) ? "1" : "0") + "," +
            (on_front[k] ? "1" : "0") + "," + (on_valid_front[k] ? "1" : "0") + "\n";
  }
  write_text_file(out_dir / "pareto_frontier.csv", front);
  write_text_file(out_dir / "pareto_plot.csv", plot);
  return rep;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Latency-constrained differentiable architecture search"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();
    cmd->add_option("--seed", seed, "Global seed (overrides the config)");
    cmd->add_option("--out", out_dir, "Output directory (overrides the config)");
  };

  auto* search = app.add_subcommand("search", "Run the constrained search and write arch params");
  add_common(search);

  auto* decode = app.add_subcommand("decode", "Decode a multi-path network from arch params");
  add_common(decode);
  std::string params_path;
  std::vector<std::size_t> n_l{1};
  std::string method = "greedy";
  decode->add_option("--params", params_path, "arch_params.json from search")->required();
  decode->add_option("--nl", n_l, "Number of paths (several values allowed)")->expected(1, -1);
  decode->add_option("--method", method, "greedy or ga")->check(CLI::IsMember({"greedy", "ga"}));

  auto* sample = app.add_subcommand("sample", "Evaluate uniformly sampled architectures");
  add_common(sample);
  std::size_t n_samples = 1000;
  sample->add_option("--n", n_samples, "Number of samples")->check(CLI::PositiveNumber);

  auto* pareto = app.add_subcommand("pareto", "Pareto frontier of point files");
  std::vector<std::string> inputs;
  std::string pareto_out = ".";
  pareto->add_option("files", inputs, "Point CSV files")->required();
  pareto->add_option("--out", pareto_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (pareto->parsed()) {
      std::vector<std::filesystem::path> files(inputs.begin(), inputs.end());
      const auto rep = cmd_pareto(files, pareto_out);
      std::cout << "frontier: " << rep.frontier.size() << " of " << rep.points.size() << " points\n";
      return kOk;
    }
    RunConfig cfg = load_run_config(config_path);
    if (app.get_subcommands().front()->count("--seed") > 0) cfg.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (search->parsed()) {
      const auto outcome = cmd_search(cfg);
      const auto& outer = outcome.report.outer;
      if (!outer.empty()) {
        std::cout << "latency_ms=" << format_fixed(outer.back().decoded_latency_ms)
                  << " throughput_fps=" << format_fixed(outer.back().throughput_fps) << "\n";
      }
      if (!outcome.feasible) {
        std::cerr << "error: throughput >= " << format_fixed(cfg.outer.throughput_min_fps, 1)
                  << " FPS not reached within " << cfg.outer.max_iterations << " outer iterations\n";
        return kInfeasible;
      }
      return kOk;
    }
    if (decode->parsed()) {
      for (const auto& net : cmd_decode(cfg, params_path, n_l, method)) {
        std::cout << net.method << " paths=" << net.paths.size() << " latency_ms=" << format_fixed(net.latency_ms)
                  << " throughput_fps=" << format_fixed(net.throughput_fps) << " score=" << format_fixed(net.score)
                  << " feasible=" << (net.feasible ? 1 : 0) << "\n";
      }
      return kOk;
    }
    if (sample->parsed()) {
      const auto pts = cmd_sample_random(cfg, n_samples);
      std::cout << "wrote " << pts.size() << " samples\n";
      return kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const InfeasibleConstraint& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace rtdnas::cli
