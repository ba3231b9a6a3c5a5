#include "smurf/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

namespace smurf {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& context) {
  if (!obj.is_object()) throw InputError(context + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw InputError(context + ": unknown key '" + key + "'");
  }
}

std::string get_string(const json& obj, const char* key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw InputError(context + ": '" + key + "' must be a string");
  return v.get<std::string>();
}

double get_number(const json& obj, const char* key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw InputError(context + ": '" + key + "' must be a number");
  return v.get<double>();
}

int get_int(const json& obj, const char* key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw InputError(context + ": '" + key + "' must be an integer");
  return v.get<int>();
}

std::vector<std::string> get_strings(const json& obj, const char* key, const std::string& context) {
  const auto& v = obj.at(key);
  if (!v.is_array()) throw InputError(context + ": '" + key + "' must be an array");
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (e.is_string())
      out.push_back(e.get<std::string>());
    else if (e.is_number())
      out.push_back(e.is_number_integer() ? std::to_string(e.get<long long>()) : format_number(e.get<double>()));
    else
      throw InputError(context + ": '" + key + "' entries must be strings or numbers");
  }
  return out;
}

void parse_admm(const json& obj, AdmmSettings& a) {
  const std::string ctx = "solver.admm";
  check_keys(obj, {"rho0", "eps_abs", "eps_rel", "relaxation", "mu", "eta", "max_iter"}, ctx);
  if (obj.contains("rho0")) a.rho0 = get_number(obj, "rho0", ctx);
  if (obj.contains("eps_abs")) a.eps_abs = get_number(obj, "eps_abs", ctx);
  if (obj.contains("eps_rel")) a.eps_rel = get_number(obj, "eps_rel", ctx);
  if (obj.contains("relaxation")) a.relaxation = get_number(obj, "relaxation", ctx);
  if (obj.contains("mu")) a.mu_rho = get_number(obj, "mu", ctx);
  if (obj.contains("eta")) a.eta_rho = get_number(obj, "eta", ctx);
  if (obj.contains("max_iter")) a.max_iter = get_int(obj, "max_iter", ctx);
}

void parse_solver(const json& obj, SolverSettings& s) {
  const std::string ctx = "solver";
  check_keys(obj, {"eps", "max_iter", "tau", "step_init", "step_floor", "snap_tolerance", "admm"}, ctx);
  if (obj.contains("eps")) s.eps = get_number(obj, "eps", ctx);
  if (obj.contains("max_iter")) s.max_iter = get_int(obj, "max_iter", ctx);
  if (obj.contains("tau")) s.tau = get_number(obj, "tau", ctx);
  if (obj.contains("step_init")) s.step_init = get_number(obj, "step_init", ctx);
  if (obj.contains("step_floor")) s.step_floor = get_number(obj, "step_floor", ctx);
  if (obj.contains("snap_tolerance")) s.snap_tolerance = get_number(obj, "snap_tolerance", ctx);
  if (obj.contains("admm")) parse_admm(obj.at("admm"), s.admm);
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw InputError(std::string("solver: ") + e.what());
  }
}

void parse_tuning(const json& obj, ModelConfig& c) {
  const std::string ctx = "tuning";
  check_keys(obj,
             {"method", "folds", "seed", "grid_count", "grid_ratio", "lambdas", "validation_fraction", "cv_criterion",
              "jobs"},
             ctx);
  auto& t = c.tuning;
  if (obj.contains("method")) c.method = parse_tuning_method(get_string(obj, "method", ctx));
  if (obj.contains("folds")) t.folds = get_int(obj, "folds", ctx);
  if (obj.contains("seed")) {
    const auto& v = obj.at("seed");
    if (!v.is_number_unsigned()) throw InputError("tuning: 'seed' must be a nonnegative integer");
    t.seed = v.get<std::uint64_t>();
  }
  if (obj.contains("grid_count")) t.grid.count = get_int(obj, "grid_count", ctx);
  if (obj.contains("grid_ratio")) t.grid.ratio = get_number(obj, "grid_ratio", ctx);
  if (obj.contains("validation_fraction")) t.validation_fraction = get_number(obj, "validation_fraction", ctx);
  if (obj.contains("cv_criterion")) t.cv_criterion = parse_criterion(get_string(obj, "cv_criterion", ctx));
  if (obj.contains("jobs")) t.jobs = get_int(obj, "jobs", ctx);
  if (obj.contains("lambdas")) {
    const auto& v = obj.at("lambdas");
    if (!v.is_array()) throw InputError("tuning: 'lambdas' must be an array");
    std::vector<double> l;
    for (const auto& e : v) {
      if (!e.is_number()) throw InputError("tuning: 'lambdas' entries must be numbers");
      l.push_back(e.get<double>());
    }
    t.lambdas = std::move(l);
  }
  if (t.folds < 2) throw InputError("tuning: 'folds' must be at least 2");
}

GraphConfig parse_graph(const json& obj, const std::string& ctx) {
  if (obj.is_string()) {
    GraphConfig g;
    g.type = obj.get<std::string>();
    if (g.type != "chain" && g.type != "complete") throw InputError(ctx + ": graph '" + g.type + "' needs parameters");
    return g;
  }
  check_keys(obj, {"type", "rows", "cols", "path"}, ctx + ".graph");
  GraphConfig g;
  g.type = get_string(obj, "type", ctx + ".graph");
  if (g.type == "grid") {
    g.rows = get_int(obj, "rows", ctx + ".graph");
    g.cols = get_int(obj, "cols", ctx + ".graph");
  } else if (g.type == "edges") {
    g.path = get_string(obj, "path", ctx + ".graph");
  } else if (g.type != "chain" && g.type != "complete") {
    throw InputError(ctx + ": unknown graph type '" + g.type + "' (expected chain, grid, complete or edges)");
  }
  for (const char* k : {"rows", "cols"})
    if (obj.contains(k) && g.type != "grid") throw InputError(ctx + ".graph: '" + k + "' applies to grid graphs only");
  if (obj.contains("path") && g.type != "edges") throw InputError(ctx + ".graph: 'path' applies to edge lists only");
  return g;
}

PredictorConfig parse_predictor(const json& obj, std::size_t index) {
  std::string ctx = "predictors[" + std::to_string(index) + "]";
  check_keys(obj, {"name", "type", "columns", "column", "levels", "reference", "penalty", "graph"}, ctx);
  PredictorConfig p;
  p.name = get_string(obj, "name", ctx);
  ctx = "predictor '" + p.name + "'";
  const std::string type = obj.contains("type") ? get_string(obj, "type", ctx) : "factor";
  if (type == "numeric") {
    p.type = PredictorConfig::Type::Numeric;
    for (const char* k : {"column", "levels", "reference", "graph"})
      if (obj.contains(k)) throw InputError(ctx + ": '" + k + "' applies to factor predictors only");
    p.columns = obj.contains("columns") ? get_strings(obj, "columns", ctx) : std::vector<std::string>{p.name};
    if (p.columns.empty()) throw InputError(ctx + ": no columns");
  } else if (type == "factor") {
    p.type = PredictorConfig::Type::Factor;
    if (obj.contains("columns")) throw InputError(ctx + ": 'columns' applies to numeric predictors only");
    p.column = obj.contains("column") ? get_string(obj, "column", ctx) : p.name;
    if (obj.contains("levels")) p.levels = get_strings(obj, "levels", ctx);
    if (obj.contains("reference") && !obj.at("reference").is_null()) {
      const auto& r = obj.at("reference");
      if (r.is_string())
        p.reference = r.get<std::string>();
      else if (r.is_number_integer())
        p.reference = std::to_string(r.get<long long>());
      else if (r.is_number())
        p.reference = format_number(r.get<double>());
      else
        throw InputError(ctx + ": 'reference' must be a level label");
    }
    if (obj.contains("graph")) p.graph = parse_graph(obj.at("graph"), ctx);
  } else {
    throw InputError(ctx + ": unknown type '" + type + "' (expected numeric or factor)");
  }
  if (!obj.contains("penalty")) throw InputError(ctx + ": missing 'penalty'");
  p.penalty = parse_penalty_kind(get_string(obj, "penalty", ctx));
  if (p.penalty == PenaltyKind::None) throw InputError(ctx + ": every predictor needs a penalty");
  if (p.type == PredictorConfig::Type::Numeric && is_fusion(p.penalty))
    throw InputError(ctx + ": fused penalties need a factor predictor");
  if (p.graph && !is_fusion(p.penalty)) throw InputError(ctx + ": only fused penalties take a graph");
  if (p.penalty == PenaltyKind::GeneralizedFusedLasso && !p.graph)
    throw InputError(ctx + ": gflasso needs a graph");
  if (p.penalty == PenaltyKind::FusedLasso && p.graph && p.graph->type != "chain")
    throw InputError(ctx + ": flasso uses a chain graph; use gflasso for other graphs");
  return p;
}

// Level order: declared, else sorted distinct values (numerically when all
// values are numbers).
std::vector<std::string> resolve_levels(const Table& table, const PredictorConfig& p) {
  if (!p.levels.empty()) {
    std::set<std::string> seen;
    for (const auto& l : p.levels)
      if (!seen.insert(l).second) throw InputError("predictor '" + p.name + "': duplicate level '" + l + "'");
    return p.levels;
  }
  const auto& col = table.column(p.column);
  std::vector<std::string> distinct(col.begin(), col.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  bool numeric = true;
  double tmp = 0.0;
  for (const auto& s : distinct) numeric = numeric && parse_number(s, tmp);
  if (numeric) {
    std::map<double, std::string> by_value;
    for (const auto& s : distinct) {
      parse_number(s, tmp);
      if (!by_value.emplace(tmp, s).second)
        throw InputError("predictor '" + p.name + "': values '" + by_value[tmp] + "' and '" + s +
                         "' denote the same level; declare the levels explicitly");
    }
    distinct.clear();
    for (auto& [v, s] : by_value) distinct.push_back(s);
  }
  return distinct;
}

class LevelLookup {
 public:
  explicit LevelLookup(const std::vector<std::string>& levels) {
    double v = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      by_label_.emplace(levels[i], static_cast<int>(i));
      if (parse_number(levels[i], v)) by_value_.emplace(v, static_cast<int>(i));
    }
  }
  int find(const std::string& cell) const {
    if (auto it = by_label_.find(cell); it != by_label_.end()) return it->second;
    double v = 0.0;
    if (parse_number(cell, v))
      if (auto it = by_value_.find(v); it != by_value_.end()) return it->second;
    return -1;
  }

 private:
  std::map<std::string, int> by_label_;
  std::map<double, int> by_value_;
};

struct ResolvedPredictor {
  std::vector<std::string> levels;
  std::optional<int> reference;
  Index columns = 0;
};

ResolvedPredictor resolve(const Table& table, const PredictorConfig& p) {
  ResolvedPredictor r;
  if (p.type == PredictorConfig::Type::Numeric) {
    for (const auto& c : p.columns) table.column_index(c);
    r.levels = p.columns;
    r.columns = static_cast<Index>(p.columns.size());
    return r;
  }
  r.levels = resolve_levels(table, p);
  if (p.reference) {
    const int ref = LevelLookup(r.levels).find(*p.reference);
    if (ref < 0) throw InputError("predictor '" + p.name + "': reference '" + *p.reference + "' is not a level");
    r.reference = ref;
  }
  r.columns = static_cast<Index>(r.levels.size()) - (r.reference ? 1 : 0);
  return r;
}

Graph make_graph(const PredictorConfig& p, int levels, const std::filesystem::path& base_dir) {
  const GraphConfig g = p.graph.value_or(GraphConfig{});
  if (g.type == "chain") return Graph::chain(levels);
  if (g.type == "complete") return Graph::complete(levels);
  if (g.type == "grid") {
    if (g.rows * g.cols != levels)
      throw InputError("predictor '" + p.name + "': grid " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                       " does not match " + std::to_string(levels) + " levels");
    return Graph::grid(g.rows, g.cols);
  }
  const auto path = g.path.is_absolute() ? g.path : base_dir / g.path;
  std::ifstream in(path);
  if (!in) throw InputError("predictor '" + p.name + "': cannot read edge list '" + path.string() + "'");
  try {
    return read_edge_list(in, levels);
  } catch (const InputError& e) {
    throw InputError("predictor '" + p.name + "': " + path.string() + ": " + e.what());
  }
}

struct Assembled {
  DesignMatrix design;
  std::vector<PredictorBlock> blocks;
};

Assembled assemble(const Table& table, const ModelConfig& config) {
  if (config.predictors.empty()) throw InputError("config lists no predictors");
  std::vector<ResolvedPredictor> resolved;
  Index p = 0;
  for (const auto& pc : config.predictors) {
    resolved.push_back(resolve(table, pc));
    p += resolved.back().columns;
  }
  const auto n = static_cast<Index>(table.rows());
  Assembled a;
  a.design.values = Matrix::Zero(n, p);
  a.design.offset = config.offset ? table.numeric(*config.offset) : Vector::Zero(n);
  a.blocks.push_back(PredictorBlock::intercept());
  Index first = 0;
  for (std::size_t j = 0; j < config.predictors.size(); ++j) {
    const auto& pc = config.predictors[j];
    const auto& rp = resolved[j];
    PredictorBlock b;
    b.id = pc.name;
    b.first_column = first;
    b.column_count = rp.columns;
    b.penalty = pc.penalty;
    b.reference_level = rp.reference;
    b.level_labels = rp.levels;
    if (pc.type == PredictorConfig::Type::Numeric) {
      for (std::size_t k = 0; k < pc.columns.size(); ++k) {
        a.design.values.col(first + static_cast<Index>(k)) = table.numeric(pc.columns[k]);
        a.design.columns.push_back({pc.name, pc.columns[k]});
      }
    } else {
      b.dummy_coded = true;
      if (is_fusion(pc.penalty)) b.graph = make_graph(pc, static_cast<int>(rp.levels.size()), config.base_dir);
      for (Index k = 0; k < rp.columns; ++k)
        a.design.columns.push_back({pc.name, rp.levels[static_cast<std::size_t>(b.level_of_column(k))]});
      const LevelLookup lookup(rp.levels);
      const auto col = table.column_index(pc.column);
      for (Index i = 0; i < n; ++i) {
        const auto& cell = table.cell(static_cast<std::size_t>(i), col);
        const int level = lookup.find(cell);
        if (level < 0)
          throw InputError(table.source() + ":" + std::to_string(table.line_of(static_cast<std::size_t>(i))) +
                           ": value '" + cell + "' of column '" + pc.column + "' is not a level of predictor '" +
                           pc.name + "'");
        if (const auto c = b.column_of_level(level)) a.design.values(i, first + *c) = 1.0;
      }
    }
    a.blocks.push_back(std::move(b));
    first += rp.columns;
  }
  return a;
}

}  // namespace

ModelConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc,
             {"family", "response", "offset", "predictors", "weights", "weight_cap", "initial_ridge", "solver",
              "tuning"},
             "config");
  ModelConfig c;
  c.base_dir = base_dir;
  const std::string ctx = "config";
  try {
    if (!doc.contains("family")) throw InputError("config: missing 'family'");
    c.family = parse_family(get_string(doc, "family", ctx));
    if (!doc.contains("response")) throw InputError("config: missing 'response'");
    c.response = get_string(doc, "response", ctx);
    if (doc.contains("offset") && !doc.at("offset").is_null()) c.offset = get_string(doc, "offset", ctx);
    if (doc.contains("weights")) c.weights = parse_weight_scheme(get_string(doc, "weights", ctx));
    if (doc.contains("weight_cap")) c.weight_options.cap = get_number(doc, "weight_cap", ctx);
    if (doc.contains("initial_ridge")) c.weight_options.initial_ridge = get_number(doc, "initial_ridge", ctx);
    if (!(c.weight_options.cap > 0.0)) throw InputError("config: 'weight_cap' must be positive");
    if (!(c.weight_options.initial_ridge >= 0.0)) throw InputError("config: 'initial_ridge' must be nonnegative");
    if (!doc.contains("predictors") || !doc.at("predictors").is_array())
      throw InputError("config: 'predictors' must be an array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < doc.at("predictors").size(); ++i) {
      c.predictors.push_back(parse_predictor(doc.at("predictors")[i], i));
      if (!names.insert(c.predictors.back().name).second)
        throw InputError("config: duplicate predictor '" + c.predictors.back().name + "'");
    }
    if (c.predictors.empty()) throw InputError("config: 'predictors' is empty");
    if (doc.contains("solver")) parse_solver(doc.at("solver"), c.solver);
    if (doc.contains("tuning")) parse_tuning(doc.at("tuning"), c);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  c.tuning.scheme = c.weights;
  c.tuning.weight_options = c.weight_options;
  c.tuning.solver = c.solver;
  return c;
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

json to_json(const ModelConfig& c) {
  json doc;
  doc["family"] = std::string(to_string(c.family));
  doc["response"] = c.response;
  if (c.offset) doc["offset"] = *c.offset;
  doc["weights"] = std::string(to_string(c.weights));
  json preds = json::array();
  for (const auto& p : c.predictors) {
    json q;
    q["name"] = p.name;
    q["penalty"] = std::string(to_string(p.penalty));
    if (p.type == PredictorConfig::Type::Numeric) {
      q["type"] = "numeric";
      q["columns"] = p.columns;
    } else {
      q["type"] = "factor";
      q["column"] = p.column;
      if (!p.levels.empty()) q["levels"] = p.levels;
      q["reference"] = p.reference ? json(*p.reference) : json(nullptr);
      if (p.graph) {
        json g;
        g["type"] = p.graph->type;
        if (p.graph->type == "grid") {
          g["rows"] = p.graph->rows;
          g["cols"] = p.graph->cols;
        }
        if (p.graph->type == "edges") g["path"] = p.graph->path.string();
        q["graph"] = g;
      }
    }
    preds.push_back(q);
  }
  doc["predictors"] = preds;
  json t;
  if (c.method) t["method"] = std::string(to_string(*c.method));
  t["folds"] = c.tuning.folds;
  t["seed"] = c.tuning.seed;
  t["grid_count"] = c.tuning.grid.count;
  t["grid_ratio"] = c.tuning.grid.ratio;
  doc["tuning"] = t;
  return doc;
}

ModelSpec build_spec(const Table& table, const ModelConfig& config) {
  Assembled a = assemble(table, config);
  Vector y = table.numeric(config.response);
  return validate_spec(std::move(a.design), std::move(y), config.family, std::move(a.blocks));
}

DesignMatrix build_design(const Table& table, const ModelConfig& config) { return assemble(table, config).design; }

}  // namespace smurf
