#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qstate/model.hpp"
#include "qstate/planner.hpp"
#include "qstate/relation.hpp"
#include "qstate/workload.hpp"

namespace qstate {

struct PlannerConfig {
  std::vector<RewardMode> reward_modes{RewardMode::learned_cardinality, RewardMode::true_cardinality,
                                       RewardMode::baseline_cost};
  QMode q_mode = QMode::tabular;
  AgentConfig agent;
  double hidden_quantum = 0.1;
  double alpha_decay = 0.0;
  std::size_t approx_hidden = 32;
  /// Evaluation queries: join-tree shaped, generated from the master seed.
  std::size_t queries = 20;
  std::size_t relations_per_query = 3;
  double selection_probability = 0.5;
};

struct ExperimentConfig {
  std::string experiment;  ///< fig4-selection | fig5-combined | planner-eval
  std::uint64_t seed = 42;
  std::size_t buckets = kDefaultBuckets;
  /// Directory with schema.json and CSVs; empty means generate `synthetic`.
  std::string data_dir;
  SyntheticSpec synthetic;
  WorkloadSpec workload;
  ModelConfig model;
  TrainConfig train;
  PlannerConfig planner;
};

/// Built-in datasets of the three experiments.
SyntheticSpec fig4_dataset();
SyntheticSpec fig5_dataset();
SyntheticSpec planner_dataset();

/// Complete defaults for a named experiment; ConfigError for unknown names.
ExperimentConfig default_config(const std::string& experiment);

/// Overlays `j` on the defaults of the experiment it names (or of `fallback`).
/// Unknown or mistyped fields raise ConfigError naming the field.
ExperimentConfig parse_config(const nlohmann::json& j, const std::string& fallback = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::string& fallback = {});
nlohmann::ordered_json to_json(const ExperimentConfig& c);

SyntheticSpec parse_synthetic(const nlohmann::json& j, const std::string& where = "synthetic");
nlohmann::ordered_json to_json(const SyntheticSpec& s);
QuerySpec parse_query(const nlohmann::json& j);
nlohmann::ordered_json to_json(const QuerySpec& q);
/// Accepts a single query object, an array, or {"queries": [...]}.
std::vector<QuerySpec> parse_queries(const nlohmann::json& j);

struct MetricRow {
  std::size_t epoch = 0;
  std::string estimator;
  std::string split;
  double mean = 0, median = 0, std = 0;
};

struct ScatterPoint {
  double truth = 0;
  double predicted = 0;
};

struct PlannerRow {
  std::size_t query_id = 0;
  std::string reward_mode;
  double agent_cost = 0;
  double baseline_greedy_cost = 0;
  double optimum_cost = 0;
};

struct ExperimentReport {
  std::vector<MetricRow> metrics;
  std::vector<ScatterPoint> scatter_h1;
  std::vector<ScatterPoint> scatter_h2;
  std::vector<PlannerRow> planner;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t skipped = 0;
  std::optional<RepresentationModel> model;
};

/// Database named by the config: loaded from `data_dir` or generated from the master seed.
Database experiment_database(const ExperimentConfig& c);

ExperimentReport run_experiment(const ExperimentConfig& c);

/// Writes metrics.csv, scatter_h1.csv / scatter_h2.csv (when present),
/// planner.csv (when present), model.bin (when trained) and manifest.json.
void write_report(const ExperimentReport& r, const ExperimentConfig& c, const std::filesystem::path& out_dir);

}  // namespace qstate
