#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>

namespace rtdnas::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw ConfigError("config key '" + key + "': " + why);
}

void check_object(const json& j, const std::string& path) {
  if (!j.is_object()) bad_key(path.empty() ? "<root>" : path, "expected an object");
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; })) {
      bad_key(join(path, it.key()), "unknown key");
    }
  }
}

double get_number(const json& obj, const std::string& path, const char* key, double def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number()) bad_key(join(path, key), "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad_key(join(path, key), "must be finite");
  return x;
}

long long get_int(const json& obj, const std::string& path, const char* key, long long def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) bad_key(join(path, key), "expected an integer");
  return v.get<long long>();
}

std::string get_string(const json& obj, const std::string& path, const char* key, const std::string& def) {
  if (!obj.contains(key)) return def;
  const json& v = obj.at(key);
  if (!v.is_string()) bad_key(join(path, key), "expected a string");
  return v.get<std::string>();
}

long long require_positive(long long v, const std::string& key) {
  if (v < 1) bad_key(key, "must be >= 1");
  return v;
}

// Replaces every {"include": "file"} node by the parsed contents of the file
// (JSON, or a profile table for *.txt/*.tsv/*.csv, kept as a string).
json resolve_includes(const json& j, const std::filesystem::path& base_dir, int depth) {
  if (depth > 16) throw ConfigError("config includes nest too deeply");
  if (j.is_object()) {
    if (j.size() == 1 && j.contains("include")) {
      if (!j.at("include").is_string()) throw ConfigError("config key 'include': expected a file name");
      const std::filesystem::path file = base_dir / j.at("include").get<std::string>();
      const auto ext = file.extension().string();
      if (ext == ".txt" || ext == ".tsv" || ext == ".csv") {
        return json{{"table", read_text_file(file)}, {"origin", file.string()}};
      }
      return resolve_includes(read_json_file(file), file.parent_path(), depth + 1);
    }
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = resolve_includes(it.value(), base_dir, depth);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(resolve_includes(e, base_dir, depth));
    return out;
  }
  return j;
}

OperationSpec parse_op(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"id", "kind", "quality", "latency_ms"});
  OperationSpec op;
  op.id = get_string(j, path, "id", "");
  if (op.id.empty()) bad_key(join(path, "id"), "required");
  op.kind = get_string(j, path, "kind", op.id);
  op.quality = get_number(j, path, "quality", 0.0);
  if (!j.contains("latency_ms") || !j.at("latency_ms").is_array()) {
    bad_key(join(path, "latency_ms"), "expected one latency per scale");
  }
  for (const auto& v : j.at("latency_ms")) {
    if (!v.is_number()) bad_key(join(path, "latency_ms"), "expected numbers");
    op.latency_per_scale.push_back(v.get<double>());
  }
  return op;
}

SkeletonConfig parse_skeleton(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"layers", "scales", "tensors_per_cell", "input_scale", "cell_types",
                       "scaling_latency_ms", "ops"});
  SkeletonConfig s;
  s.n_layers = static_cast<int>(require_positive(get_int(j, path, "layers", s.n_layers), join(path, "layers")));
  s.n_scales = static_cast<int>(require_positive(get_int(j, path, "scales", s.n_scales), join(path, "scales")));
  s.n_tensors = static_cast<int>(
      require_positive(get_int(j, path, "tensors_per_cell", s.n_tensors), join(path, "tensors_per_cell")));
  s.input_scale = static_cast<int>(get_int(j, path, "input_scale", 0));
  if (j.contains("cell_types")) {
    const auto key = join(path, "cell_types");
    if (!j.at("cell_types").is_array()) bad_key(key, "expected a list");
    s.cell_types.clear();
    for (const auto& t : j.at("cell_types")) {
      if (!t.is_string()) bad_key(key, "expected cell type names");
      try {
        s.cell_types.push_back(cell_type_from_string(t.get<std::string>()));
      } catch (const ConfigError& e) {
        bad_key(key, e.what());
      }
    }
  }
  if (j.contains("scaling_latency_ms")) {
    const auto key = join(path, "scaling_latency_ms");
    const json& sl = j.at("scaling_latency_ms");
    check_object(sl, key);
    check_keys(sl, key, {"expanding", "non_scaling", "contracting"});
    for (CellType t : {CellType::expanding, CellType::non_scaling, CellType::contracting}) {
      s.scaling_latency[static_cast<int>(t)] = get_number(sl, key, to_string(t), 0.0);
    }
  }
  const auto ops_key = join(path, "ops");
  if (!j.contains("ops") || !j.at("ops").is_array() || j.at("ops").empty()) {
    bad_key(ops_key, "expected a non-empty list of operations (inline or via include)");
  }
  for (std::size_t k = 0; k < j.at("ops").size(); ++k) {
    s.ops.push_back(parse_op(j.at("ops")[k], ops_key + "[" + std::to_string(k) + "]"));
  }
  return s;
}

SurrogateSpec parse_surrogate(const json& j, const std::string& path) {
  check_object(j, path);
  check_keys(j, path, {"seed", "sharpness", "quality_weight", "noise", "temperature", "targets"});
  SurrogateSpec spec;
  spec.sharpness = get_number(j, path, "sharpness", 1.0);
  if (!(spec.sharpness > 0.0)) bad_key(join(path, "sharpness"), "must be > 0");
  if (j.contains("targets")) {
    const auto key = join(path, "targets");
    if (!j.at("targets").is_array()) bad_key(key, "expected a list of target entries");
    for (std::size_t k = 0; k < j.at("targets").size(); ++k) {
      const auto ekey = key + "[" + std::to_string(k) + "]";
      const json& e = j.at("targets")[k];
      check_object(e, ekey);
      check_keys(e, ekey, {"cell", "i", "j", "op", "value"});
      TargetEntry t;
      t.cell = get_string(e, ekey, "cell", "");
      t.tensor = static_cast<int>(get_int(e, ekey, "i", 1));
      t.source = static_cast<int>(get_int(e, ekey, "j", 0));
      t.op = get_string(e, ekey, "op", "");
      t.value = get_number(e, ekey, "value", 0.0);
      spec.targets.push_back(std::move(t));
    }
    return spec;
  }
  SurrogateGenerator gen;
  gen.sharpness = spec.sharpness;
  gen.seed = static_cast<std::uint64_t>(get_int(j, path, "seed", 1));
  gen.quality_weight = get_number(j, path, "quality_weight", gen.quality_weight);
  gen.noise = get_number(j, path, "noise", gen.noise);
  gen.temperature = get_number(j, path, "temperature", gen.temperature);
  if (!(gen.temperature > 0.0)) bad_key(join(path, "temperature"), "must be > 0");
  if (!(gen.noise >= 0.0)) bad_key(join(path, "noise"), "must be >= 0");
  spec.generator = gen;
  return spec;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<ProfileRow> parse_profile_table(const std::string& text, const std::string& origin) {
  std::vector<ProfileRow> rows;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    ProfileRow row;
    std::string scale_text, lat_text;
    if (!(fields >> row.op_id)) continue;
    if (row.op_id == "op" || row.op_id == "op_id") continue;  // header
    std::string extra;
    if (!(fields >> scale_text >> lat_text) || (fields >> extra)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected '<op> <scale> <latency_ms>'");
    }
    try {
      std::size_t used = 0;
      row.scale = std::stoi(scale_text, &used);
      if (used != scale_text.size()) throw std::invalid_argument("scale");
      row.latency_ms = std::stod(lat_text, &used);
      if (used != lat_text.size()) throw std::invalid_argument("latency");
    } catch (const std::exception&) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed number");
    }
    if (!std::isfinite(row.latency_ms) || row.latency_ms < 0.0) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": latency must be finite and >= 0");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

RunConfig parse_run_config(const json& raw, const std::filesystem::path& base_dir) {
  const json doc = resolve_includes(raw, base_dir, 0);
  check_object(doc, "");
  check_keys(doc, "", {"skeleton", "profile", "surrogate", "latency", "loss", "optimizer", "ga",
                       "constraints", "decode", "output_dir", "seed"});
  RunConfig cfg;
  if (!doc.contains("skeleton")) bad_key("skeleton", "required");
  cfg.skeleton = parse_skeleton(doc.at("skeleton"), "skeleton");

  if (doc.contains("profile")) {
    const json& p = doc.at("profile");
    if (p.is_string()) {
      const auto file = base_dir / p.get<std::string>();
      cfg.profile = parse_profile_table(read_text_file(file), file.string());
    } else if (p.is_object() && p.contains("table")) {
      cfg.profile = parse_profile_table(p.at("table").get<std::string>(), p.value("origin", "profile"));
    } else {
      bad_key("profile", "expected a profile table file name");
    }
  }

  cfg.surrogate = parse_surrogate(doc.value("surrogate", json::object()), "surrogate");

  if (doc.contains("latency")) {
    const json& l = doc.at("latency");
    check_object(l, "latency");
    check_keys(l, "latency", {"pipeline_overlap"});
    cfg.pipeline_overlap = get_number(l, "latency", "pipeline_overlap", 1.0);
    if (cfg.pipeline_overlap < 1.0) bad_key("latency.pipeline_overlap", "must be >= 1");
  }

  if (doc.contains("loss")) {
    const json& l = doc.at("loss");
    check_object(l, "loss");
    check_keys(l, "loss", {"lambda", "penalty_temp_ms"});
    cfg.loss.lambda = get_number(l, "loss", "lambda", cfg.loss.lambda);
    cfg.loss.penalty_temp_ms = get_number(l, "loss", "penalty_temp_ms", cfg.loss.penalty_temp_ms);
    if (cfg.loss.lambda < 0.0) bad_key("loss.lambda", "must be >= 0");
    if (!(cfg.loss.penalty_temp_ms > 0.0)) bad_key("loss.penalty_temp_ms", "must be > 0");
  }

  if (doc.contains("optimizer")) {
    const json& o = doc.at("optimizer");
    const std::string p = "optimizer";
    check_object(o, p);
    check_keys(o, p, {"momentum", "lr_start", "lr_end", "weight_decay", "epochs", "steps_per_epoch",
                      "lr_schedule", "grad_clip_norm", "init", "init_scale"});
    auto& opt = cfg.optimizer;
    opt.momentum = get_number(o, p, "momentum", opt.momentum);
    opt.lr_start = get_number(o, p, "lr_start", opt.lr_start);
    opt.lr_end = get_number(o, p, "lr_end", opt.lr_end);
    opt.weight_decay = get_number(o, p, "weight_decay", opt.weight_decay);
    opt.epochs = static_cast<int>(require_positive(get_int(o, p, "epochs", opt.epochs), "optimizer.epochs"));
    opt.steps_per_epoch = static_cast<int>(
        require_positive(get_int(o, p, "steps_per_epoch", opt.steps_per_epoch), "optimizer.steps_per_epoch"));
    opt.grad_clip_norm = get_number(o, p, "grad_clip_norm", opt.grad_clip_norm);
    if (opt.grad_clip_norm < 0.0) bad_key("optimizer.grad_clip_norm", "must be >= 0 (0 disables clipping)");
    const auto sched = get_string(o, p, "lr_schedule", "cosine");
    if (sched == "cosine") {
      opt.lr_schedule = LrSchedule::cosine;
    } else if (sched == "linear") {
      opt.lr_schedule = LrSchedule::linear;
    } else {
      bad_key("optimizer.lr_schedule", "expected 'cosine' or 'linear'");
    }
    const auto init = get_string(o, p, "init", "uniform_noise");
    if (init == "zeros") {
      opt.init.policy = InitPolicy::zeros;
    } else if (init == "uniform_noise") {
      opt.init.policy = InitPolicy::uniform_noise;
    } else {
      bad_key("optimizer.init", "expected 'zeros' or 'uniform_noise'");
    }
    opt.init.scale = get_number(o, p, "init_scale", opt.init.scale);
    if (!(opt.momentum >= 0.0 && opt.momentum < 1.0)) bad_key("optimizer.momentum", "must be in [0,1)");
    if (!(opt.lr_start > 0.0)) bad_key("optimizer.lr_start", "must be > 0");
    if (!(opt.lr_end > 0.0) || opt.lr_end > opt.lr_start) {
      bad_key("optimizer.lr_end", "must be > 0 and <= lr_start");
    }
    if (opt.weight_decay < 0.0) bad_key("optimizer.weight_decay", "must be >= 0");
  }

  if (doc.contains("ga")) {
    const json& g = doc.at("ga");
    check_object(g, "ga");
    check_keys(g, "ga", {"population", "generations", "pool", "crossover_rate", "mutation_rate", "elitism",
                         "path_gain"});
    auto& ga = cfg.ga;
    ga.population = static_cast<std::size_t>(get_int(g, "ga", "population", static_cast<long long>(ga.population)));
    ga.generations = static_cast<std::size_t>(get_int(g, "ga", "generations", static_cast<long long>(ga.generations)));
    ga.pool_capacity = static_cast<std::size_t>(
        require_positive(get_int(g, "ga", "pool", static_cast<long long>(ga.pool_capacity)), "ga.pool"));
    ga.crossover_rate = get_number(g, "ga", "crossover_rate", ga.crossover_rate);
    ga.mutation_rate = get_number(g, "ga", "mutation_rate", ga.mutation_rate);
    ga.elitism = static_cast<std::size_t>(get_int(g, "ga", "elitism", static_cast<long long>(ga.elitism)));
    cfg.path_gain = get_number(g, "ga", "path_gain", cfg.path_gain);
    if (ga.population < 2) bad_key("ga.population", "must be >= 2");
    if (ga.crossover_rate < 0.0 || ga.crossover_rate > 1.0) bad_key("ga.crossover_rate", "must be in [0,1]");
    if (ga.mutation_rate < 0.0 || ga.mutation_rate > 1.0) bad_key("ga.mutation_rate", "must be in [0,1]");
    if (ga.elitism > ga.population) bad_key("ga.elitism", "cannot exceed the population");
    if (!(cfg.path_gain > 0.0 && cfg.path_gain <= 1.0)) bad_key("ga.path_gain", "must be in (0,1]");
  }

  if (doc.contains("constraints")) {
    const json& c = doc.at("constraints");
    const std::string p = "constraints";
    check_object(c, p);
    check_keys(c, p, {"latency_ub_ms", "throughput_min_fps", "shrink_factor", "max_outer_iterations",
                      "decode_paths"});
    cfg.loss.latency_ub_ms = get_number(c, p, "latency_ub_ms", cfg.loss.latency_ub_ms);
    cfg.outer.throughput_min_fps = get_number(c, p, "throughput_min_fps", cfg.outer.throughput_min_fps);
    cfg.outer.shrink_factor = get_number(c, p, "shrink_factor", cfg.outer.shrink_factor);
    cfg.outer.max_iterations = static_cast<int>(
        require_positive(get_int(c, p, "max_outer_iterations", cfg.outer.max_iterations),
                         "constraints.max_outer_iterations"));
    cfg.outer.decode_paths = static_cast<std::size_t>(
        require_positive(get_int(c, p, "decode_paths", static_cast<long long>(cfg.outer.decode_paths)),
                         "constraints.decode_paths"));
    if (!(cfg.loss.latency_ub_ms > 0.0)) bad_key("constraints.latency_ub_ms", "must be > 0");
    if (!(cfg.outer.throughput_min_fps > 0.0)) bad_key("constraints.throughput_min_fps", "must be > 0");
    if (!(cfg.outer.shrink_factor > 0.0 && cfg.outer.shrink_factor < 1.0)) {
      bad_key("constraints.shrink_factor", "must be in (0,1)");
    }
  }

  cfg.out_dir = get_string(doc, "", "output_dir", cfg.out_dir.string());
  if (doc.contains("seed")) {
    if (!doc.at("seed").is_number_unsigned()) bad_key("seed", "expected a non-negative integer");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg = parse_run_config(read_json_file(path), path.parent_path());
  cfg.source = path;
  return cfg;
}

Experiment build_experiment(const RunConfig& cfg) {
  SkeletonConfig skeleton = cfg.skeleton;
  for (const auto& row : cfg.profile) {
    auto it = std::find_if(skeleton.ops.begin(), skeleton.ops.end(),
                           [&](const OperationSpec& op) { return op.id == row.op_id; });
    if (it == skeleton.ops.end()) throw ConfigError("profile table: unknown op '" + row.op_id + "'");
    if (row.scale < 0 || row.scale >= skeleton.n_scales) {
      throw ConfigError("profile table: scale " + std::to_string(row.scale) + " of '" + row.op_id +
                        "' is outside the skeleton");
    }
    if (static_cast<int>(it->latency_per_scale.size()) != skeleton.n_scales) {
      it->latency_per_scale.resize(skeleton.n_scales, 0.0);
    }
    it->latency_per_scale[row.scale] = row.latency_ms;
  }

  SupernetTopology topology = build_topology(skeleton);
  SurrogateModel surrogate;
  if (cfg.surrogate.generator) {
    surrogate = generate_surrogate(topology, *cfg.surrogate.generator);
  } else {
    if (cfg.surrogate.targets.empty()) throw ConfigError("config key 'surrogate': needs a seed or explicit targets");
    std::map<std::string, std::size_t> cell_index;
    for (std::size_t c = 0; c < topology.n_cells(); ++c) cell_index[topology.cell(c).id()] = c;
    std::map<std::string, std::size_t> op_index;
    for (std::size_t o = 0; o < topology.n_ops(); ++o) op_index[topology.ops()[o].id] = o;
    surrogate.sharpness = cfg.surrogate.sharpness;
    surrogate.target.assign(topology.n_cell_coeffs(), -1.0);
    for (const auto& t : cfg.surrogate.targets) {
      auto c = cell_index.find(t.cell);
      auto o = op_index.find(t.op);
      if (c == cell_index.end()) throw ConfigError("config key 'surrogate.targets': unknown cell '" + t.cell + "'");
      if (o == op_index.end()) throw ConfigError("config key 'surrogate.targets': unknown op '" + t.op + "'");
      if (t.tensor < 1 || t.tensor > topology.n_tensors() || t.source < 0 || t.source >= t.tensor) {
        throw ConfigError("config key 'surrogate.targets': illegal (i, j) for cell '" + t.cell + "'");
      }
      surrogate.target[topology.coeff_index(c->second, t.tensor, t.source, o->second)] = t.value;
    }
    if (std::any_of(surrogate.target.begin(), surrogate.target.end(), [](double v) { return v < 0.0; })) {
      throw ConfigError("config key 'surrogate.targets': every (cell, i, j, op) needs a non-negative value");
    }
  }
  surrogate.validate(topology);
  LatencyModel latency = LatencyModel::from_topology(topology, cfg.pipeline_overlap);
  return Experiment{std::move(topology), std::move(surrogate), std::move(latency)};
}

}  // namespace rtdnas::cli
