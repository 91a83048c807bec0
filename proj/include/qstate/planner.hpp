#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qstate/baseline.hpp"
#include "qstate/catalog.hpp"
#include "qstate/model.hpp"
#include "qstate/nn.hpp"
#include "qstate/oracle.hpp"
#include "qstate/query.hpp"

namespace qstate {

enum class RewardMode { learned_cardinality, true_cardinality, baseline_cost };
/// log: r = -log10(1 + card). raw: r = -card.
enum class RewardScale { log, raw };

RewardMode parse_reward_mode(std::string_view name);
std::string_view to_string(RewardMode m);
RewardScale parse_reward_scale(std::string_view name);
std::string_view to_string(RewardScale s);

/// s_t = (h_t, u_t). `hidden` is empty when the environment has no model and a
/// zero vector before the first action otherwise.
struct PlanState {
  HiddenState hidden;
  ContextVector context;
  std::vector<std::string> joined;
  std::vector<Action> applied;

  bool terminal() const { return context.all_zero(); }
};

struct StepResult {
  PlanState next;
  double reward = 0;
  double cardinality = 0;  ///< the stage cardinality the reward was computed from
};

/// Left-deep planning MDP over one database. Rewards are the negated (log)
/// cardinality of each stage subquery under the configured source.
class PlanningEnv {
 public:
  /// `model` may be null unless the mode is learned_cardinality.
  PlanningEnv(const Database& db, const Catalog& catalog, const RepresentationModel* model, RewardMode mode,
              RewardScale scale = RewardScale::log);

  /// Initial state for `q`; ContractViolation for invalid or cyclic queries.
  PlanState reset(const QuerySpec& q) const;
  /// Legal next actions sorted by action id; empty iff `s` is terminal.
  std::vector<Action> legal_actions(const PlanState& s, const QuerySpec& q) const;
  /// ContractViolation if `a` is not legal in `s`.
  StepResult step(const PlanState& s, const QuerySpec& q, const Action& a);

  /// Selection on relation r -> catalog index of r; join predicate c_j -> #relations + j.
  std::size_t action_id(const Action& a) const;
  std::size_t action_count() const { return catalog_->relation_names().size() + catalog_->join_predicates().size(); }

  double reward_of(double cardinality) const;
  /// Exact stage cardinality, memoized.
  double true_stage_cardinality(const QuerySpec& stage) { return static_cast<double>(oracle_.get(stage)); }

  const Catalog& catalog() const { return *catalog_; }
  const RepresentationModel* model() const { return model_; }
  const DatabaseVector& x0() const { return x0_; }
  const BaselineEstimator& baseline() const { return baseline_; }
  RewardMode mode() const { return mode_; }
  CardinalityCache& oracle() { return oracle_; }

 private:
  const Database* db_;
  const Catalog* catalog_;
  const RepresentationModel* model_;
  RewardMode mode_;
  RewardScale scale_;
  DatabaseVector x0_;
  BaselineEstimator baseline_;
  CardinalityCache oracle_;
};

enum class QMode { tabular, approximate };

QMode parse_q_mode(std::string_view name);
std::string_view to_string(QMode m);

/// QL(s, a): a table keyed by (discretized state, action id), or a network
/// over [h; u; a-encoding] producing a scalar.
class QFunction {
 public:
  /// Unseen entries read as 0. `alpha_decay` > 0 scales the step size of an
  /// entry visited n times by 1 / (1 + alpha_decay * n).
  static QFunction tabular(double hidden_quantum = 0.1, double alpha_decay = 0.0);
  static QFunction approximate(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

  QMode mode() const { return mode_; }
  /// u_t verbatim plus h_t rounded to multiples of the quantum.
  std::string state_key(const PlanState& s) const;
  double value(const PlanState& s, const Action& a, const PlanningEnv& env) const;
  /// max over `legal_next` of QL(s', a'); 0 when there is none.
  double max_value(const PlanState& s, std::span<const Action> legal_next, const PlanningEnv& env) const;

  /// QL(s,a) += alpha [r + gamma max QL(s',.) - QL(s,a)] (tabular), or one
  /// semi-gradient SGD step on (target - Q)^2 / 2 (approximate).
  void update(const PlanState& s, const Action& a, double reward, const PlanState& next,
              std::span<const Action> legal_next, const PlanningEnv& env, double alpha, double gamma);

  std::size_t table_size() const { return table_.size(); }
  const std::map<std::pair<std::string, std::size_t>, double>& table() const { return table_; }
  const Network& network() const { return net_; }

 private:
  std::vector<double> features(const PlanState& s, const Action& a, const PlanningEnv& env) const;

  QMode mode_ = QMode::tabular;
  double quantum_ = 0.1;
  double alpha_decay_ = 0.0;
  std::map<std::pair<std::string, std::size_t>, double> table_;
  std::map<std::pair<std::string, std::size_t>, std::size_t> visits_;
  Network net_;
};

struct AgentConfig {
  double alpha = 0.1;
  double gamma = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  /// Share of episodes over which epsilon decays linearly to `epsilon_end`.
  double epsilon_decay_fraction = 0.5;
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  double epsilon_at(std::size_t episode) const;
};

struct EpisodeRecord {
  std::size_t episode = 0;
  std::size_t query = 0;
  std::vector<Action> plan;
  std::vector<double> rewards;
  double total_reward = 0;
};

/// Episodes visit `queries` round-robin. With `step_log`, every transition is
/// written as one JSON object per line.
std::vector<EpisodeRecord> run_training(PlanningEnv& env, std::span<const QuerySpec> queries, QFunction& qf,
                                        const AgentConfig& config, std::ostream* step_log = nullptr);

/// Greedy rollout (epsilon = 0); ties go to the lowest action id.
EpisodeRecord best_plan(PlanningEnv& env, const QFunction& qf, const QuerySpec& q);

/// Greedy on the baseline's stage estimates; ties go to the lowest action id.
std::vector<Action> baseline_greedy_plan(PlanningEnv& env, const QuerySpec& q);

/// Sum of log10(1 + true stage cardinality) over the plan.
double plan_cost(PlanningEnv& env, const QuerySpec& q, std::span<const Action> plan);

struct OptimalPlan {
  std::vector<Action> plan;
  double cost = 0;
};

/// Minimum plan_cost over every legal left-deep ordering; ties go to the
/// lexicographically smallest action-id sequence. CapacityError above 5 relations.
OptimalPlan exhaustive_optimum(PlanningEnv& env, const QuerySpec& q);

/// Indented text tree of the left-deep plan, root first.
std::string render_plan(const QuerySpec& q, std::span<const Action> plan);

}  // namespace qstate
