#include "qstate/experiment.hpp"

#include <fstream>
#include <set>

#include "qstate/baseline.hpp"
#include "qstate/catalog.hpp"
#include "qstate/errors.hpp"
#include "qstate/oracle.hpp"
#include "qstate/util.hpp"

namespace qstate {

using nlohmann::json;
using nlohmann::ordered_json;

// --- datasets --------------------------------------------------------------

namespace {

ColumnSpec uniform_col(std::string name, double low, double high) {
  ColumnSpec c;
  c.name = std::move(name);
  c.rule = ColumnRule::uniform;
  c.low = low;
  c.high = high;
  return c;
}

ColumnSpec sequence_col(std::string name) {
  ColumnSpec c;
  c.name = std::move(name);
  c.rule = ColumnRule::sequence;
  c.low = 0;
  return c;
}

ColumnSpec functional_col(std::string name, std::string source, double scale, double noise) {
  ColumnSpec c;
  c.name = std::move(name);
  c.rule = ColumnRule::functional;
  c.source = std::move(source);
  c.scale = scale;
  c.noise = noise;
  return c;
}

ColumnSpec zipf_col(std::string name, double s, std::size_t values) {
  ColumnSpec c;
  c.name = std::move(name);
  c.rule = ColumnRule::zipf;
  c.low = 0;
  c.zipf_s = s;
  c.zipf_values = values;
  return c;
}

ColumnSpec fk_col(std::string name, ColumnRef target, double s) {
  ColumnSpec c;
  c.name = std::move(name);
  c.rule = ColumnRule::foreign_key;
  c.reference = std::move(target);
  c.zipf_s = s;
  return c;
}

}  // namespace

SyntheticSpec fig4_dataset() {
  SyntheticSpec s;
  s.relations.push_back({"R", 10000, {uniform_col("a", 0, 999), functional_col("b", "a", 1.0, 0.0), uniform_col("c", 0, 999)}});
  return s;
}

SyntheticSpec fig5_dataset() {
  SyntheticSpec s;
  s.relations.push_back({"R", 2000, {sequence_col("id"), functional_col("a", "id", 0.5, 5.0), uniform_col("b", 0, 999)}});
  s.relations.push_back({"S", 10000, {fk_col("fk", {"R", "id"}, 1.1), uniform_col("c", 0, 999)}});
  s.join_keys.push_back({{"R", "id"}, {"S", "fk"}});
  return s;
}

SyntheticSpec planner_dataset() {
  SyntheticSpec s;
  s.relations.push_back({"A", 500, {sequence_col("id"), uniform_col("x", 0, 999), zipf_col("y", 1.0, 50)}});
  s.relations.push_back({"C", 300, {sequence_col("id"), zipf_col("w", 1.2, 40)}});
  s.relations.push_back(
      {"B", 2000, {sequence_col("id"), fk_col("a_id", {"A", "id"}, 1.1), fk_col("c_id", {"C", "id"}, 0.5), uniform_col("z", 0, 999)}});
  s.join_keys.push_back({{"A", "id"}, {"B", "a_id"}});
  s.join_keys.push_back({{"B", "c_id"}, {"C", "id"}});
  return s;
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "fig4-selection") {
    c.synthetic = fig4_dataset();
    c.workload.kind = WorkloadKind::selection;
    c.workload.relation = "R";
    c.workload.attributes = {"a", "b"};
    c.workload.m = 2;
    c.workload.count = 5000;
    c.workload.train_fraction = 0.8;
    c.train.curriculum = false;
  } else if (experiment == "fig5-combined") {
    c.synthetic = fig5_dataset();
    c.workload.kind = WorkloadKind::selection_join;
    c.workload.relation = "R";
    c.workload.attributes = {"a", "b"};
    c.workload.m = 2;
    c.workload.join_with = "S";
    c.workload.count = 2500;
    c.workload.train_fraction = 0.8;
  } else if (experiment == "planner-eval") {
    c.synthetic = planner_dataset();
    c.workload.kind = WorkloadKind::join_tree;
    c.workload.relations_per_query = 3;
    c.workload.count = 2000;
    c.workload.train_fraction = 0.8;
    c.planner.agent.episodes = 5000;
  } else {
    throw ConfigError("experiment: unknown experiment '" + experiment +
                      "' (expected fig4-selection, fig5-combined or planner-eval)");
  }
  return c;
}

// --- JSON ------------------------------------------------------------------

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "size_t fields are read as uint64");

// Reads optional fields of one JSON object and rejects anything it was not asked about.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void get(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(path(key) + ": expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, std::vector<std::string>& out) {
    if (const auto* v = find(key)) {
      if (!v->is_array()) throw ConfigError(path(key) + ": expected an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(path(key) + ": expected an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  template <typename Parse, typename T>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    get(key, s);
    if (s.empty()) return;
    try {
      out = parse(s);
    } catch (const ConfigError& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(path(it.key()) + ": unknown field");
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

ColumnRef parse_ref(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected \"relation.attribute\"");
  try {
    return ColumnRef::parse(j.get<std::string>());
  } catch (const Error& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

JoinPredicate parse_join(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [\"R.a\", \"S.b\"]");
  return {parse_ref(j[0], where), parse_ref(j[1], where)};
}

ordered_json join_json(const JoinPredicate& p) { return ordered_json::array({p.left.to_string(), p.right.to_string()}); }

void parse_workload(const json& j, WorkloadSpec& w) {
  Fields f(j, "workload");
  f.get_enum("kind", w.kind, parse_workload_kind);
  f.get("relation", w.relation);
  f.get("attributes", w.attributes);
  f.get("m", w.m);
  f.get("join_with", w.join_with);
  f.get("relations_per_query", w.relations_per_query);
  f.get("selection_probability", w.selection_probability);
  f.get("count", w.count);
  f.get("train_fraction", w.train_fraction);
  f.finish();
}

void parse_model(const json& j, ModelConfig& m) {
  Fields f(j, "model");
  f.get("state_dim", m.state_dim);
  f.get("init_hidden", m.init_hidden);
  f.get("transition_hidden", m.transition_hidden);
  f.get("observed_hidden", m.observed_hidden);
  f.get_enum("hidden_activation", m.hidden_activation, parse_activation);
  f.get_enum("state_activation", m.state_activation, parse_activation);
  f.get_enum("normalization", m.normalization, parse_normalization);
  f.finish();
}

void parse_train(const json& j, TrainConfig& t) {
  Fields f(j, "train");
  f.get("epochs", t.epochs);
  f.get("lr", t.lr);
  f.get("floor", t.floor);
  f.get("max_grad_norm", t.max_grad_norm);
  f.get("curriculum", t.curriculum);
  f.get("curriculum_fraction", t.curriculum_fraction);
  f.finish();
  if (!(t.floor > 0)) throw ConfigError("train.floor must be positive");
  if (!(t.lr >= 0)) throw ConfigError("train.lr must be non-negative");
}

void parse_planner(const json& j, PlannerConfig& p) {
  Fields f(j, "planner");
  if (const auto* modes = f.find("reward_modes")) {
    if (!modes->is_array()) throw ConfigError("planner.reward_modes: expected an array");
    p.reward_modes.clear();
    for (const auto& m : *modes) {
      if (!m.is_string()) throw ConfigError("planner.reward_modes: expected strings");
      try {
        p.reward_modes.push_back(parse_reward_mode(m.get<std::string>()));
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("planner.reward_modes: ") + e.what());
      }
    }
  }
  f.get_enum("q_mode", p.q_mode, parse_q_mode);
  f.get("episodes", p.agent.episodes);
  f.get("alpha", p.agent.alpha);
  f.get("gamma", p.agent.gamma);
  f.get("epsilon_start", p.agent.epsilon_start);
  f.get("epsilon_end", p.agent.epsilon_end);
  f.get("epsilon_decay_fraction", p.agent.epsilon_decay_fraction);
  f.get("alpha_decay", p.alpha_decay);
  f.get("hidden_quantum", p.hidden_quantum);
  f.get("approx_hidden", p.approx_hidden);
  f.get("queries", p.queries);
  f.get("relations_per_query", p.relations_per_query);
  f.get("selection_probability", p.selection_probability);
  f.finish();
  try {
    p.agent.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("planner.") + e.what());
  }
}

}  // namespace

SyntheticSpec parse_synthetic(const json& j, const std::string& where) {
  SyntheticSpec s;
  Fields f(j, where);
  f.get("seed", s.seed);
  const auto* rels = f.find("relations");
  if (rels == nullptr || !rels->is_array() || rels->empty())
    throw ConfigError(f.path("relations") + ": expected a non-empty array");
  for (std::size_t i = 0; i < rels->size(); ++i) {
    const auto rw = f.path("relations[" + std::to_string(i) + "]");
    Fields rf((*rels)[i], rw);
    RelationSpec rs;
    rf.get("name", rs.name);
    rf.get("rows", rs.rows);
    if (rs.name.empty()) throw ConfigError(rw + ".name is required");
    const auto* cols = rf.find("columns");
    if (cols == nullptr || !cols->is_array()) throw ConfigError(rw + ".columns: expected an array");
    for (std::size_t k = 0; k < cols->size(); ++k) {
      const auto cw = rw + ".columns[" + std::to_string(k) + "]";
      Fields cf((*cols)[k], cw);
      ColumnSpec cs;
      cf.get("name", cs.name);
      if (cs.name.empty()) throw ConfigError(cw + ".name is required");
      cf.get_enum("rule", cs.rule, parse_column_rule);
      cf.get("low", cs.low);
      cf.get("high", cs.high);
      cf.get("s", cs.zipf_s);
      cf.get("values", cs.zipf_values);
      cf.get("source", cs.source);
      cf.get("scale", cs.scale);
      cf.get("offset", cs.offset);
      cf.get("noise", cs.noise);
      if (const auto* ref = cf.find("reference")) cs.reference = parse_ref(*ref, cw + ".reference");
      cf.finish();
      rs.columns.push_back(std::move(cs));
    }
    rf.finish();
    s.relations.push_back(std::move(rs));
  }
  if (const auto* keys = f.find("join_keys")) {
    if (!keys->is_array()) throw ConfigError(f.path("join_keys") + ": expected an array");
    for (const auto& k : *keys) s.join_keys.push_back(parse_join(k, f.path("join_keys")));
  }
  f.finish();
  return s;
}

ordered_json to_json(const SyntheticSpec& s) {
  ordered_json j;
  j["seed"] = s.seed;
  j["relations"] = ordered_json::array();
  for (const auto& r : s.relations) {
    ordered_json rj;
    rj["name"] = r.name;
    rj["rows"] = r.rows;
    rj["columns"] = ordered_json::array();
    for (const auto& c : r.columns) {
      ordered_json cj;
      cj["name"] = c.name;
      cj["rule"] = std::string(to_string(c.rule));
      switch (c.rule) {
        case ColumnRule::uniform:
          cj["low"] = c.low;
          cj["high"] = c.high;
          break;
        case ColumnRule::zipf:
          cj["low"] = c.low;
          cj["s"] = c.zipf_s;
          cj["values"] = c.zipf_values;
          break;
        case ColumnRule::functional:
          cj["source"] = c.source;
          cj["scale"] = c.scale;
          cj["offset"] = c.offset;
          cj["noise"] = c.noise;
          break;
        case ColumnRule::foreign_key:
          cj["reference"] = c.reference.to_string();
          cj["s"] = c.zipf_s;
          break;
        case ColumnRule::sequence: cj["low"] = c.low; break;
      }
      rj["columns"].push_back(cj);
    }
    j["relations"].push_back(rj);
  }
  j["join_keys"] = ordered_json::array();
  for (const auto& k : s.join_keys) j["join_keys"].push_back(join_json(k));
  return j;
}

QuerySpec parse_query(const json& j) {
  QuerySpec q;
  Fields f(j, "query");
  f.get("relations", q.relations);
  if (const auto* sels = f.find("selections")) {
    if (!sels->is_array()) throw ConfigError("query.selections: expected an array");
    for (const auto& s : *sels) {
      Fields sf(s, "query.selections[]");
      Selection sel;
      if (const auto* col = sf.find("column")) sel.column = parse_ref(*col, "query.selections[].column");
      else throw ConfigError("query.selections[].column is required");
      if (sf.find("le") == nullptr) throw ConfigError("query.selections[].le is required");
      sf.get("le", sel.upper_bound);
      sf.finish();
      q.selections.push_back(sel);
    }
  }
  if (const auto* joins = f.find("joins")) {
    if (!joins->is_array()) throw ConfigError("query.joins: expected an array");
    for (const auto& k : *joins) q.joins.push_back(parse_join(k, "query.joins"));
  }
  f.finish();
  return q;
}

ordered_json to_json(const QuerySpec& q) {
  ordered_json j;
  j["relations"] = q.relations;
  j["selections"] = ordered_json::array();
  for (const auto& s : q.selections) {
    ordered_json sj;
    sj["column"] = s.column.to_string();
    sj["le"] = s.upper_bound;
    j["selections"].push_back(sj);
  }
  j["joins"] = ordered_json::array();
  for (const auto& k : q.joins) j["joins"].push_back(join_json(k));
  return j;
}

std::vector<QuerySpec> parse_queries(const json& j) {
  const json* arr = &j;
  if (j.is_object() && j.contains("queries")) arr = &j.at("queries");
  std::vector<QuerySpec> out;
  if (arr->is_array()) {
    for (const auto& q : *arr) out.push_back(parse_query(q));
  } else {
    out.push_back(parse_query(*arr));
  }
  return out;
}

ExperimentConfig parse_config(const json& j, const std::string& fallback) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  std::string name = fallback;
  if (auto it = j.find("experiment"); it != j.end()) {
    if (!it->is_string()) throw ConfigError("experiment: expected a string");
    name = it->get<std::string>();
  }
  if (name.empty()) throw ConfigError("experiment: missing experiment name");
  auto c = default_config(name);
  Fields f(j, "");
  f.find("experiment");
  f.get("seed", c.seed);
  f.get("buckets", c.buckets);
  if (c.buckets == 0) throw ConfigError("buckets must be positive");
  f.get("data_dir", c.data_dir);
  if (const auto* s = f.find("synthetic")) c.synthetic = parse_synthetic(*s);
  if (const auto* w = f.find("workload")) parse_workload(*w, c.workload);
  if (const auto* m = f.find("model")) parse_model(*m, c.model);
  if (const auto* t = f.find("train")) parse_train(*t, c.train);
  if (const auto* p = f.find("planner")) parse_planner(*p, c.planner);
  f.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::string& fallback) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(j, fallback);
}

ordered_json to_json(const ExperimentConfig& c) {
  ordered_json j;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["buckets"] = c.buckets;
  if (!c.data_dir.empty()) j["data_dir"] = c.data_dir;
  else j["synthetic"] = to_json(c.synthetic);

  ordered_json w;
  w["kind"] = std::string(to_string(c.workload.kind));
  w["relation"] = c.workload.relation;
  w["attributes"] = c.workload.attributes;
  w["m"] = c.workload.m;
  w["join_with"] = c.workload.join_with;
  w["relations_per_query"] = c.workload.relations_per_query;
  w["selection_probability"] = c.workload.selection_probability;
  w["count"] = c.workload.count;
  w["train_fraction"] = c.workload.train_fraction;
  j["workload"] = w;

  ordered_json m;
  m["state_dim"] = c.model.state_dim;
  m["init_hidden"] = c.model.init_hidden;
  m["transition_hidden"] = c.model.transition_hidden;
  m["observed_hidden"] = c.model.observed_hidden;
  m["hidden_activation"] = std::string(to_string(c.model.hidden_activation));
  m["state_activation"] = std::string(to_string(c.model.state_activation));
  m["normalization"] = std::string(to_string(c.model.normalization));
  j["model"] = m;

  ordered_json t;
  t["epochs"] = c.train.epochs;
  t["lr"] = c.train.lr;
  t["floor"] = c.train.floor;
  t["max_grad_norm"] = c.train.max_grad_norm;
  t["curriculum"] = c.train.curriculum;
  t["curriculum_fraction"] = c.train.curriculum_fraction;
  j["train"] = t;

  ordered_json p;
  p["reward_modes"] = ordered_json::array();
  for (auto mode : c.planner.reward_modes) p["reward_modes"].push_back(std::string(to_string(mode)));
  p["q_mode"] = std::string(to_string(c.planner.q_mode));
  p["episodes"] = c.planner.agent.episodes;
  p["alpha"] = c.planner.agent.alpha;
  p["gamma"] = c.planner.agent.gamma;
  p["epsilon_start"] = c.planner.agent.epsilon_start;
  p["epsilon_end"] = c.planner.agent.epsilon_end;
  p["epsilon_decay_fraction"] = c.planner.agent.epsilon_decay_fraction;
  p["alpha_decay"] = c.planner.alpha_decay;
  p["hidden_quantum"] = c.planner.hidden_quantum;
  p["approx_hidden"] = c.planner.approx_hidden;
  p["queries"] = c.planner.queries;
  p["relations_per_query"] = c.planner.relations_per_query;
  p["selection_probability"] = c.planner.selection_probability;
  j["planner"] = p;
  return j;
}

// --- running ---------------------------------------------------------------

Database experiment_database(const ExperimentConfig& c) {
  if (!c.data_dir.empty()) return load_database(c.data_dir);
  auto spec = c.synthetic;
  spec.seed = derive_seed(c.seed, "data");
  return gen_database(spec);
}

namespace {

std::vector<MetricRow> baseline_rows(const BaselineEstimator& baseline, const Workload& w, std::size_t epochs,
                                     double floor) {
  auto errors = [&](std::size_t from, std::size_t to) {
    std::vector<double> errs;
    for (std::size_t i = from; i < to; ++i) {
      const auto& q = w.queries[i];
      const auto& seq = w.sequences[i];
      for (std::size_t t = 0; t < seq.size(); ++t) {
        const auto est = baseline.estimate_subquery(stage_subquery(q, std::span(seq).first(t + 1)));
        errs.push_back(relative_error_loss(est, w.examples[i].labels[t], floor).loss);
      }
    }
    return errs;
  };
  const auto train = errors(0, w.train_count);
  const auto test = errors(w.train_count, w.queries.size());
  std::vector<MetricRow> rows;
  for (std::size_t e = 1; e <= epochs; ++e) {
    for (const auto* split : {"train", "test"}) {
      const auto& errs = std::string(split) == "train" ? train : test;
      if (errs.empty()) continue;
      rows.push_back({e, "baseline", split, mean(errs), median(errs), stddev(errs)});
    }
  }
  return rows;
}

void add_model_rows(ExperimentReport& r, const TrainResult& tr, const std::vector<MetricRow>& baseline) {
  // Interleave per epoch: nn rows first, then the baseline reference rows.
  std::size_t b = 0;
  for (std::size_t i = 0; i < tr.metrics.size();) {
    const auto epoch = tr.metrics[i].epoch;
    for (; i < tr.metrics.size() && tr.metrics[i].epoch == epoch; ++i) {
      const auto& m = tr.metrics[i];
      r.metrics.push_back({m.epoch, "nn", m.split, m.mean, m.median, m.std});
    }
    for (; b < baseline.size() && baseline[b].epoch == epoch; ++b) r.metrics.push_back(baseline[b]);
  }
}

struct TrainedModel {
  RepresentationModel model;
  Workload workload;
};

TrainedModel train_model(const ExperimentConfig& c, const Database& db, const Catalog& catalog,
                         CardinalityCache& oracle, ExperimentReport& report) {
  auto ws = c.workload;
  ws.seed = derive_seed(c.seed, "workload");
  auto w = gen_workload(ws, db, catalog, oracle);
  auto mc = c.model;
  mc.seed = derive_seed(c.seed, "model");
  RepresentationModel model(catalog.x0_size(), catalog.action_size(), mc);
  auto tc = c.train;
  tc.seed = derive_seed(c.seed, "train");
  const auto x0 = build_x0(catalog);
  const auto tr = train_combined(model, x0, w.train(), w.test(), tc);
  BaselineEstimator baseline(catalog);
  add_model_rows(report, tr, baseline_rows(baseline, w, c.train.epochs, c.train.floor));
  report.train_size = w.train_count;
  report.test_size = w.queries.size() - w.train_count;
  report.skipped = tr.skipped;
  return {std::move(model), std::move(w)};
}

void fill_scatter(ExperimentReport& r, const RepresentationModel& m, const DatabaseVector& x0, const Workload& w) {
  for (const auto& ex : w.test()) {
    const auto preds = predict_sequence(m, x0, ex.actions, ex.scales);
    r.scatter_h1.push_back({ex.labels[0], preds[0]});
    if (preds.size() > 1) r.scatter_h2.push_back({ex.labels[1], preds[1]});
  }
}

void run_planner(const ExperimentConfig& c, const Database& db, const Catalog& catalog,
                 const RepresentationModel* model, ExperimentReport& r) {
  WorkloadSpec qs;
  qs.kind = WorkloadKind::join_tree;
  qs.relations_per_query = c.planner.relations_per_query;
  qs.selection_probability = c.planner.selection_probability;
  qs.count = std::max<std::size_t>(c.planner.queries, 2);
  qs.train_fraction = 0.5;
  qs.seed = derive_seed(c.seed, "planner-queries");
  auto generated = gen_queries(qs, db);
  generated.queries.resize(c.planner.queries);

  PlanningEnv reference(db, catalog, nullptr, RewardMode::true_cardinality);
  std::vector<double> optimum, greedy;
  for (const auto& q : generated.queries) {
    optimum.push_back(exhaustive_optimum(reference, q).cost);
    greedy.push_back(plan_cost(reference, q, baseline_greedy_plan(reference, q)));
  }

  for (const auto mode : c.planner.reward_modes) {
    const RepresentationModel* m = mode == RewardMode::learned_cardinality ? model : nullptr;
    PlanningEnv env(db, catalog, m, mode);
    const auto mode_name = std::string(to_string(mode));
    for (std::size_t i = 0; i < generated.queries.size(); ++i) {
      const auto& q = generated.queries[i];
      const auto tag = mode_name + ":" + std::to_string(i);
      auto qf = c.planner.q_mode == QMode::tabular
                    ? QFunction::tabular(c.planner.hidden_quantum, c.planner.alpha_decay)
                    : QFunction::approximate((m ? m->state_dim() : 0) + catalog.context_size() + catalog.action_size(),
                                             c.planner.approx_hidden, derive_seed(c.seed, "q-init:" + tag));
      auto agent = c.planner.agent;
      agent.seed = derive_seed(c.seed, "agent:" + tag);
      run_training(env, std::span(&q, 1), qf, agent);
      const auto plan = best_plan(env, qf, q).plan;
      r.planner.push_back({i, mode_name, plan_cost(reference, q, plan), greedy[i], optimum[i]});
    }
  }
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& c) {
  ExperimentReport r;
  const auto db = experiment_database(c);
  const Catalog catalog(db, c.buckets);
  CardinalityCache oracle(db);
  const auto x0 = build_x0(catalog);

  if (c.experiment == "fig4-selection" || c.experiment == "fig5-combined") {
    auto trained = train_model(c, db, catalog, oracle, r);
    fill_scatter(r, trained.model, x0, trained.workload);
    r.model = std::move(trained.model);
  } else if (c.experiment == "planner-eval") {
    const bool needs_model = std::find(c.planner.reward_modes.begin(), c.planner.reward_modes.end(),
                                       RewardMode::learned_cardinality) != c.planner.reward_modes.end();
    if (needs_model) r.model = train_model(c, db, catalog, oracle, r).model;
    run_planner(c, db, catalog, r.model ? &*r.model : nullptr, r);
  } else {
    throw ConfigError("experiment: unknown experiment '" + c.experiment + "'");
  }
  return r;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  return out;
}

void write_scatter(const std::filesystem::path& p, const std::vector<ScatterPoint>& pts) {
  auto out = open_out(p);
  out << "true,predicted\n";
  for (const auto& s : pts) out << format_double(s.truth) << ',' << format_double(s.predicted) << '\n';
}

}  // namespace

void write_report(const ExperimentReport& r, const ExperimentConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  {
    auto out = open_out(dir / "metrics.csv");
    out << "epoch,estimator,split,mean_rel_err,median_rel_err,std\n";
    for (const auto& m : r.metrics)
      out << m.epoch << ',' << m.estimator << ',' << m.split << ',' << format_double(m.mean) << ','
          << format_double(m.median) << ',' << format_double(m.std) << '\n';
    files.push_back("metrics.csv");
  }
  if (!r.scatter_h1.empty()) {
    write_scatter(dir / "scatter_h1.csv", r.scatter_h1);
    files.push_back("scatter_h1.csv");
  }
  if (!r.scatter_h2.empty()) {
    write_scatter(dir / "scatter_h2.csv", r.scatter_h2);
    files.push_back("scatter_h2.csv");
  }
  if (!r.planner.empty()) {
    auto out = open_out(dir / "planner.csv");
    out << "query_id,reward_mode,agent_cost,baseline_greedy_cost,optimum_cost\n";
    for (const auto& p : r.planner)
      out << p.query_id << ',' << p.reward_mode << ',' << format_double(p.agent_cost) << ','
          << format_double(p.baseline_greedy_cost) << ',' << format_double(p.optimum_cost) << '\n';
    files.push_back("planner.csv");
  }
  if (r.model) {
    save_model_file((dir / "model.bin").string(), *r.model);
    files.push_back("model.bin");
  }
  ordered_json manifest;
  manifest["experiment"] = c.experiment;
  manifest["seed"] = c.seed;
  manifest["config"] = to_json(c);
  manifest["train_size"] = r.train_size;
  manifest["test_size"] = r.test_size;
  manifest["skipped_examples"] = r.skipped;
  manifest["files"] = files;
  auto out = open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

}  // namespace qstate
