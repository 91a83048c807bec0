#include "qstate/planner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "qstate/errors.hpp"
#include "qstate/util.hpp"

namespace qstate {

RewardMode parse_reward_mode(std::string_view name) {
  if (name == "learned-cardinality" || name == "learned") return RewardMode::learned_cardinality;
  if (name == "true-cardinality" || name == "true") return RewardMode::true_cardinality;
  if (name == "baseline-cost" || name == "baseline") return RewardMode::baseline_cost;
  throw ConfigError("unknown reward mode '" + std::string(name) + "'");
}

std::string_view to_string(RewardMode m) {
  switch (m) {
    case RewardMode::learned_cardinality: return "learned-cardinality";
    case RewardMode::true_cardinality: return "true-cardinality";
    case RewardMode::baseline_cost: return "baseline-cost";
  }
  return "?";
}

RewardScale parse_reward_scale(std::string_view name) {
  if (name == "log") return RewardScale::log;
  if (name == "raw") return RewardScale::raw;
  throw ConfigError("unknown reward scale '" + std::string(name) + "'");
}

std::string_view to_string(RewardScale s) { return s == RewardScale::raw ? "raw" : "log"; }

QMode parse_q_mode(std::string_view name) {
  if (name == "tabular") return QMode::tabular;
  if (name == "approximate") return QMode::approximate;
  throw ConfigError("unknown Q mode '" + std::string(name) + "'");
}

std::string_view to_string(QMode m) { return m == QMode::approximate ? "approximate" : "tabular"; }

// --- environment -----------------------------------------------------------

PlanningEnv::PlanningEnv(const Database& db, const Catalog& catalog, const RepresentationModel* model, RewardMode mode,
                         RewardScale scale)
    : db_(&db), catalog_(&catalog), model_(model), mode_(mode), scale_(scale), x0_(build_x0(catalog)),
      baseline_(catalog), oracle_(db) {
  if (mode == RewardMode::learned_cardinality && model == nullptr)
    throw ConfigError("learned-cardinality reward needs a trained model");
  if (model != nullptr && (model->x0_dim() != catalog.x0_size() || model->action_dim() != catalog.action_size()))
    throw ShapeError("model dimensions do not match the catalog");
}

PlanState PlanningEnv::reset(const QuerySpec& q) const {
  validate(q, *db_);
  if (!join_graph_is_tree(q)) throw ContractViolation("left-deep planning needs an acyclic join graph: " + q.to_string());
  PlanState s;
  if (model_ != nullptr) s.hidden.assign(model_->state_dim(), 0.0);
  s.context = init_context(q, *catalog_);
  return s;
}

std::size_t PlanningEnv::action_id(const Action& a) const {
  if (const auto* s = std::get_if<SelectionAction>(&a)) {
    if (auto r = catalog_->relation_index(s->relation)) return *r;
    throw EncodingError("relation " + s->relation + " is not in the catalog");
  }
  const auto& p = std::get<JoinAction>(a).predicate;
  if (auto j = catalog_->find_join(p)) return catalog_->relation_names().size() + *j;
  throw EncodingError("join " + p.to_string() + " is not in the catalog's predicate set");
}

std::vector<Action> PlanningEnv::legal_actions(const PlanState& s, const QuerySpec& q) const {
  auto actions = legal_next_actions(q, s.applied);
  std::stable_sort(actions.begin(), actions.end(),
                   [&](const Action& a, const Action& b) { return action_id(a) < action_id(b); });
  return actions;
}

double PlanningEnv::reward_of(double cardinality) const {
  const double c = std::max(0.0, cardinality);
  return scale_ == RewardScale::raw ? -c : -std::log10(1.0 + c);
}

StepResult PlanningEnv::step(const PlanState& s, const QuerySpec& q, const Action& a) {
  const auto legal = legal_actions(s, q);
  if (std::find(legal.begin(), legal.end(), a) == legal.end())
    throw ContractViolation("action " + describe(a) + " is not legal in this state");
  StepResult r;
  r.next.applied = s.applied;
  r.next.applied.push_back(a);
  r.next.context = apply_action(s.context, a, *catalog_);
  r.next.joined = joined_relations(q, r.next.applied);
  const auto stage = stage_subquery(q, r.next.applied);
  if (model_ != nullptr) {
    const auto enc = encode_action(a, *catalog_);
    r.next.hidden = s.applied.empty() ? initial_state(*model_, x0_, enc) : transition(*model_, s.hidden, enc);
  }
  switch (mode_) {
    case RewardMode::learned_cardinality:
      r.cardinality = decode_cardinality(*model_, r.next.hidden, stage_scale(*catalog_, stage));
      break;
    case RewardMode::true_cardinality: r.cardinality = true_stage_cardinality(stage); break;
    case RewardMode::baseline_cost: r.cardinality = baseline_.estimate_subquery(stage); break;
  }
  r.reward = reward_of(r.cardinality);
  return r;
}

// --- Q function ------------------------------------------------------------

QFunction QFunction::tabular(double hidden_quantum, double alpha_decay) {
  if (!(hidden_quantum > 0)) throw ConfigError("hidden quantum must be positive");
  if (!(alpha_decay >= 0)) throw ConfigError("alpha decay must be non-negative");
  QFunction q;
  q.mode_ = QMode::tabular;
  q.quantum_ = hidden_quantum;
  q.alpha_decay_ = alpha_decay;
  return q;
}

QFunction QFunction::approximate(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
  QFunction q;
  q.mode_ = QMode::approximate;
  std::mt19937_64 rng(seed);
  const std::size_t dims[] = {input_dim, hidden, 1};
  const Activation acts[] = {Activation::tanh, Activation::identity};
  q.net_ = Network::glorot(dims, acts, rng);
  return q;
}

std::string QFunction::state_key(const PlanState& s) const {
  std::string key;
  for (double v : s.context.values) {
    key += format_double(v);
    key += ',';
  }
  key += '|';
  for (double v : s.hidden) {
    key += std::to_string(static_cast<long long>(std::llround(v / quantum_)));
    key += ',';
  }
  return key;
}

std::vector<double> QFunction::features(const PlanState& s, const Action& a, const PlanningEnv& env) const {
  std::vector<double> x = s.hidden;
  x.insert(x.end(), s.context.values.begin(), s.context.values.end());
  const auto enc = encode_action(a, env.catalog());
  x.insert(x.end(), enc.values.begin(), enc.values.end());
  return x;
}

double QFunction::value(const PlanState& s, const Action& a, const PlanningEnv& env) const {
  if (mode_ == QMode::approximate) return predict(net_, features(s, a, env))[0];
  auto it = table_.find({state_key(s), env.action_id(a)});
  return it == table_.end() ? 0.0 : it->second;
}

double QFunction::max_value(const PlanState& s, std::span<const Action> legal_next, const PlanningEnv& env) const {
  if (legal_next.empty()) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& a : legal_next) best = std::max(best, value(s, a, env));
  return best;
}

void QFunction::update(const PlanState& s, const Action& a, double reward, const PlanState& next,
                       std::span<const Action> legal_next, const PlanningEnv& env, double alpha, double gamma) {
  const double target = reward + gamma * max_value(next, legal_next, env);
  if (mode_ == QMode::approximate) {
    auto fr = forward(net_, features(s, a, env));
    const double dq[] = {fr.output[0] - target};
    const auto g = backward(net_, fr.tape, dq);
    apply_sgd(net_, g, alpha);
    return;
  }
  const std::pair<std::string, std::size_t> key{state_key(s), env.action_id(a)};
  auto& q = table_[key];
  auto& n = visits_[key];
  const double step = alpha / (1.0 + alpha_decay_ * static_cast<double>(n));
  q += step * (target - q);
  ++n;
  if (!std::isfinite(q)) throw NumericError("Q-value diverged for state " + key.first);
}

// --- agent -----------------------------------------------------------------

void AgentConfig::validate() const {
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("alpha must lie in [0, 1]");
  if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(epsilon_start >= 0 && epsilon_start <= 1)) throw ConfigError("epsilon_start must lie in [0, 1]");
  if (!(epsilon_end >= 0 && epsilon_end <= 1)) throw ConfigError("epsilon_end must lie in [0, 1]");
  if (!(epsilon_decay_fraction >= 0 && epsilon_decay_fraction <= 1))
    throw ConfigError("epsilon_decay_fraction must lie in [0, 1]");
}

double AgentConfig::epsilon_at(std::size_t episode) const {
  const double horizon = epsilon_decay_fraction * static_cast<double>(episodes);
  if (horizon <= 0 || static_cast<double>(episode) >= horizon) return epsilon_end;
  return epsilon_start + (epsilon_end - epsilon_start) * static_cast<double>(episode) / horizon;
}

namespace {

const Action& greedy(const QFunction& qf, const PlanState& s, std::span<const Action> legal, const PlanningEnv& env) {
  std::size_t best = 0;
  double best_v = qf.value(s, legal[0], env);
  for (std::size_t i = 1; i < legal.size(); ++i) {
    const double v = qf.value(s, legal[i], env);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return legal[best];
}

}  // namespace

std::vector<EpisodeRecord> run_training(PlanningEnv& env, std::span<const QuerySpec> queries, QFunction& qf,
                                        const AgentConfig& c, std::ostream* step_log) {
  c.validate();
  if (c.episodes > 0 && queries.empty()) throw ConfigError("planner training needs at least one query");
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<PlanState> starts;
  for (const auto& q : queries) starts.push_back(env.reset(q));

  std::vector<EpisodeRecord> log;
  log.reserve(c.episodes);
  for (std::size_t e = 0; e < c.episodes; ++e) {
    const auto qi = e % queries.size();
    const auto& q = queries[qi];
    const double eps = c.epsilon_at(e);
    EpisodeRecord rec;
    rec.episode = e;
    rec.query = qi;
    PlanState s = starts[qi];
    auto legal = env.legal_actions(s, q);
    for (std::size_t t = 0; !legal.empty(); ++t) {
      const Action a = coin(rng) < eps ? legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng)]
                                       : greedy(qf, s, legal, env);
      auto res = env.step(s, q, a);
      auto next_legal = env.legal_actions(res.next, q);
      qf.update(s, a, res.reward, res.next, next_legal, env, c.alpha, c.gamma);
      if (step_log != nullptr) {
        nlohmann::ordered_json j;
        j["episode"] = e;
        j["step"] = t;
        j["state"] = qf.state_key(s);
        j["action"] = describe(a);
        j["reward"] = res.reward;
        j["q"] = qf.value(s, a, env);
        *step_log << j.dump() << '\n';
      }
      rec.plan.push_back(a);
      rec.rewards.push_back(res.reward);
      rec.total_reward += res.reward;
      s = std::move(res.next);
      legal = std::move(next_legal);
    }
    log.push_back(std::move(rec));
  }
  return log;
}

EpisodeRecord best_plan(PlanningEnv& env, const QFunction& qf, const QuerySpec& q) {
  EpisodeRecord rec;
  PlanState s = env.reset(q);
  for (auto legal = env.legal_actions(s, q); !legal.empty(); legal = env.legal_actions(s, q)) {
    const Action a = greedy(qf, s, legal, env);
    auto res = env.step(s, q, a);
    rec.plan.push_back(a);
    rec.rewards.push_back(res.reward);
    rec.total_reward += res.reward;
    s = std::move(res.next);
  }
  return rec;
}

std::vector<Action> baseline_greedy_plan(PlanningEnv& env, const QuerySpec& q) {
  std::vector<Action> plan;
  PlanState s = env.reset(q);
  for (auto legal = env.legal_actions(s, q); !legal.empty(); legal = env.legal_actions(s, q)) {
    std::size_t best = 0;
    double best_est = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < legal.size(); ++i) {
      auto prefix = plan;
      prefix.push_back(legal[i]);
      const double est = env.baseline().estimate_subquery(stage_subquery(q, prefix));
      if (est < best_est) {
        best_est = est;
        best = i;
      }
    }
    plan.push_back(legal[best]);
    s.applied = plan;
  }
  return plan;
}

double plan_cost(PlanningEnv& env, const QuerySpec& q, std::span<const Action> plan) {
  check_legal_prefix(q, plan);
  double cost = 0;
  for (std::size_t t = 0; t < plan.size(); ++t)
    cost += std::log10(1.0 + env.true_stage_cardinality(stage_subquery(q, plan.first(t + 1))));
  return cost;
}

OptimalPlan exhaustive_optimum(PlanningEnv& env, const QuerySpec& q) {
  constexpr std::size_t kMaxRelations = 5;
  if (q.relations.size() > kMaxRelations)
    throw CapacityError("exhaustive search supports at most 5 relations, query has " +
                        std::to_string(q.relations.size()));
  env.reset(q);
  OptimalPlan best;
  bool found = false;
  std::vector<Action> prefix;
  std::function<void(double)> dfs = [&](double cost) {
    PlanState s;
    s.applied = prefix;
    const auto legal = env.legal_actions(s, q);
    if (legal.empty()) {
      // Sibling orderings can differ in the last bits of the sum; only a clear
      // improvement displaces the earlier (lexicographically smaller) plan.
      if (!found || cost < best.cost - 1e-9 * std::max(1.0, std::abs(best.cost))) {
        best = {prefix, cost};
        found = true;
      }
      return;
    }
    for (const auto& a : legal) {
      prefix.push_back(a);
      const double c = std::log10(1.0 + env.true_stage_cardinality(stage_subquery(q, prefix)));
      dfs(cost + c);
      prefix.pop_back();
    }
  };
  dfs(0.0);
  return best;
}

std::string render_plan(const QuerySpec& q, std::span<const Action> plan) {
  check_legal_prefix(q, plan);
  auto base = [&](const std::string& rel) {
    std::string line = "Scan " + rel;
    for (const auto& a : plan)
      if (const auto* s = std::get_if<SelectionAction>(&a); s && s->relation == rel) {
        line = "Select " + rel + " [";
        for (std::size_t i = 0; i < s->predicates.size(); ++i) {
          if (i) line += " AND ";
          line += s->predicates[i].column.to_string() + " <= " + format_double(s->predicates[i].upper_bound);
        }
        line += "]";
      }
    return std::vector<std::string>{line};
  };
  auto indent = [](std::vector<std::string> lines) {
    for (auto& l : lines) l = "  " + l;
    return lines;
  };

  std::vector<std::string> tree;
  std::vector<std::string> chain;
  for (const auto& a : plan) {
    const auto* j = std::get_if<JoinAction>(&a);
    if (j == nullptr) continue;
    const auto& p = j->predicate;
    std::vector<std::string> node{"Join " + p.left.to_string() + " = " + p.right.to_string()};
    std::vector<std::string> left, right;
    if (chain.empty()) {
      left = base(p.left.relation);
      right = base(p.right.relation);
      chain = {p.left.relation, p.right.relation};
    } else {
      const bool left_in = std::find(chain.begin(), chain.end(), p.left.relation) != chain.end();
      const auto& fresh = left_in ? p.right.relation : p.left.relation;
      left = tree;
      right = base(fresh);
      chain.push_back(fresh);
    }
    for (auto& l : indent(left)) node.push_back(l);
    for (auto& l : indent(right)) node.push_back(l);
    tree = std::move(node);
  }
  if (tree.empty()) {
    const auto rel = q.relations.empty() ? std::string() : q.relations.front();
    tree = base(rel);
  }
  std::string out;
  for (const auto& l : tree) out += l + "\n";
  return out;
}

}  // namespace qstate
