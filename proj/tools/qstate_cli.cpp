#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "qstate/baseline.hpp"
#include "qstate/errors.hpp"
#include "qstate/experiment.hpp"
#include "qstate/planner.hpp"
#include "qstate/util.hpp"

using namespace qstate;
using nlohmann::json;

namespace {

struct DataSource {
  std::string dir;
  std::string preset;
  std::uint64_t seed = 42;
  std::size_t buckets = kDefaultBuckets;

  void add(CLI::App* app) {
    app->add_option("--data", dir, "Database directory (schema.json + CSVs)");
    app->add_option("--preset", preset, "Built-in synthetic database: fig4, fig5 or planner");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--buckets", buckets, "Histogram buckets per attribute")->check(CLI::PositiveNumber);
  }

  Database load() const {
    if (!dir.empty()) return load_database(dir);
    SyntheticSpec spec;
    if (preset == "fig4") spec = fig4_dataset();
    else if (preset == "fig5") spec = fig5_dataset();
    else if (preset == "planner") spec = planner_dataset();
    else throw ConfigError("give --data <dir> or --preset fig4|fig5|planner");
    spec.seed = derive_seed(seed, "data");
    return gen_database(spec);
  }
};

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Selections first in relation order, then joins, each step taking the first legal operation.
std::vector<Action> canonical_plan(const QuerySpec& q) {
  std::vector<Action> plan;
  for (auto legal = legal_next_actions(q, plan); !legal.empty(); legal = legal_next_actions(q, plan))
    plan.push_back(legal.front());
  return plan;
}

void print_summary(const ExperimentReport& r) {
  for (const auto& m : r.metrics)
    if (m.epoch == r.metrics.back().epoch)
      std::cout << "epoch " << m.epoch << ' ' << m.estimator << ' ' << m.split << ": median " << format_double(m.median)
                << ", mean " << format_double(m.mean) << '\n';
  if (!r.scatter_h2.empty()) {
    std::vector<double> t, p;
    for (const auto& s : r.scatter_h2) {
      t.push_back(s.truth);
      p.push_back(s.predicted);
    }
    std::cout << "h2 spearman: " << format_double(spearman(t, p)) << '\n';
  }
  if (!r.planner.empty()) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> within;
    for (const auto& row : r.planner) {
      auto& w = within[row.reward_mode];
      ++w.second;
      if (row.agent_cost <= row.optimum_cost * 1.1 + 1e-12) ++w.first;
    }
    for (const auto& [mode, w] : within)
      std::cout << mode << ": " << w.first << "/" << w.second << " plans within 10% of optimum\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned cardinality estimation and Q-learning plan enumeration sandbox"};
  app.require_subcommand(1);

  // gen-data
  auto* gen_data = app.add_subcommand("gen-data", "Generate a synthetic database directory");
  std::string spec_file, preset = "fig4", out_dir = "data";
  std::uint64_t seed = 42;
  gen_data->add_option("--spec", spec_file, "Synthetic spec (JSON)");
  gen_data->add_option("--preset", preset, "fig4, fig5 or planner (ignored with --spec)");
  gen_data->add_option("--seed", seed, "Master seed");
  gen_data->add_option("--out", out_dir, "Output directory");
  gen_data->callback([&] {
    SyntheticSpec spec;
    if (!spec_file.empty()) spec = parse_synthetic(read_json(spec_file));
    else if (preset == "fig4") spec = fig4_dataset();
    else if (preset == "fig5") spec = fig5_dataset();
    else if (preset == "planner") spec = planner_dataset();
    else throw ConfigError("--preset: expected fig4, fig5 or planner");
    spec.seed = derive_seed(seed, "data");
    const auto db = gen_database(spec);
    save_database(db, out_dir);
    for (const auto& r : db.relations()) std::cout << r.name() << ": " << r.row_count() << " rows\n";
  });

  // gen-workload
  auto* gen_wl = app.add_subcommand("gen-workload", "Generate a labelled query workload as JSON");
  DataSource wl_src;
  wl_src.add(gen_wl);
  WorkloadSpec wspec;
  std::string kind = "selection", wl_out = "workload.json";
  gen_wl->add_option("--kind", kind, "selection, selection+join or join-tree");
  gen_wl->add_option("--relation", wspec.relation, "Relation carrying the selections");
  gen_wl->add_option("--attributes", wspec.attributes, "Selection attributes");
  gen_wl->add_option("-m", wspec.m, "Selection attributes when --attributes is absent");
  gen_wl->add_option("--join-with", wspec.join_with, "Join partner for selection+join");
  gen_wl->add_option("--relations-per-query", wspec.relations_per_query, "Relations per join-tree query");
  gen_wl->add_option("--count", wspec.count, "Number of queries");
  gen_wl->add_option("--train-fraction", wspec.train_fraction, "Share of queries in the training split");
  gen_wl->add_option("--out", wl_out, "Output file");
  gen_wl->callback([&] {
    const auto db = wl_src.load();
    const Catalog catalog(db, wl_src.buckets);
    CardinalityCache oracle(db);
    wspec.kind = parse_workload_kind(kind);
    wspec.seed = derive_seed(wl_src.seed, "workload");
    const auto w = gen_workload(wspec, db, catalog, oracle);
    nlohmann::ordered_json j;
    j["train_count"] = w.train_count;
    j["queries"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < w.queries.size(); ++i) {
      auto qj = to_json(w.queries[i]);
      qj["cardinality"] = oracle.get(w.queries[i]);
      j["queries"].push_back(qj);
    }
    std::ofstream out(wl_out);
    out << j.dump(2) << '\n';
    std::cout << w.queries.size() << " queries (" << w.train_count << " train) -> " << wl_out << '\n';
  });

  // train
  auto* train = app.add_subcommand("train", "Run an experiment and write its reports");
  std::string experiment, config_file, reward_mode, train_out = "out";
  std::optional<std::uint64_t> t_seed;
  std::optional<std::size_t> t_epochs, t_hidden, t_buckets;
  std::optional<double> t_lr;
  train->add_option("--experiment", experiment, "fig4-selection, fig5-combined or planner-eval");
  train->add_option("--config", config_file, "Experiment config (JSON)");
  train->add_option("--seed", t_seed, "Master seed");
  train->add_option("--epochs", t_epochs, "Training epochs");
  train->add_option("--lr", t_lr, "SGD learning rate (default 0.01)");
  train->add_option("--hidden", t_hidden, "Hidden width of NN_init (default 50)");
  train->add_option("--buckets", t_buckets, "Histogram buckets per attribute");
  train->add_option("--reward-mode", reward_mode, "Planner reward: learned-cardinality, true-cardinality, baseline-cost");
  train->add_option("--out", train_out, "Report directory");
  train->callback([&] {
    auto c = config_file.empty() ? default_config(experiment) : load_config(config_file, experiment);
    if (!experiment.empty() && experiment != c.experiment)
      throw ConfigError("--experiment " + experiment + " disagrees with the config's " + c.experiment);
    if (t_seed) c.seed = *t_seed;
    if (t_epochs) c.train.epochs = *t_epochs;
    if (t_lr) c.train.lr = *t_lr;
    if (t_hidden) c.model.init_hidden = *t_hidden;
    if (t_buckets) c.buckets = *t_buckets;
    if (!reward_mode.empty()) c.planner.reward_modes = {parse_reward_mode(reward_mode)};
    const auto report = run_experiment(c);
    write_report(report, c, train_out);
    print_summary(report);
    std::cout << "reports written to " << train_out << '\n';
  });

  // eval
  auto* eval = app.add_subcommand("eval", "Relative error of a trained model and the baseline on a query file");
  DataSource ev_src;
  ev_src.add(eval);
  std::string model_file, queries_file;
  double floor = 1.0;
  eval->add_option("--model", model_file, "Model checkpoint")->required();
  eval->add_option("--queries", queries_file, "Query file (JSON)")->required();
  eval->add_option("--floor", floor, "Relative-error denominator floor");
  eval->callback([&] {
    const auto db = ev_src.load();
    const Catalog catalog(db, ev_src.buckets);
    const auto x0 = build_x0(catalog);
    const auto model = load_model_file(model_file);
    const BaselineEstimator baseline(catalog);
    CardinalityCache oracle(db);
    std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> errs;  // stage -> (nn, baseline)
    for (const auto& q : parse_queries(read_json(queries_file))) {
      const auto plan = canonical_plan(q);
      const auto preds = predict_query(model, catalog, x0, q, plan);
      for (std::size_t t = 0; t < plan.size(); ++t) {
        const auto stage = stage_subquery(q, std::span(plan).first(t + 1));
        const double truth = static_cast<double>(oracle.get(stage));
        errs[t + 1].first.push_back(relative_error_loss(preds[t], truth, floor).loss);
        errs[t + 1].second.push_back(relative_error_loss(baseline.estimate_subquery(stage), truth, floor).loss);
      }
    }
    std::cout << "stage,estimator,count,mean_rel_err,median_rel_err,std\n";
    for (const auto& [stage, e] : errs) {
      for (const auto& [name, v] : {std::pair{"nn", &e.first}, std::pair{"baseline", &e.second}})
        std::cout << stage << ',' << name << ',' << v->size() << ',' << format_double(mean(*v)) << ','
                  << format_double(median(*v)) << ',' << format_double(stddev(*v)) << '\n';
    }
  });

  // plan
  auto* plan = app.add_subcommand("plan", "Train a Q-learning agent on each query of a file and print its plan");
  DataSource pl_src;
  pl_src.add(plan);
  std::string plan_queries, plan_mode = "true-cardinality", plan_model, plan_qmode = "tabular", step_log;
  AgentConfig agent;
  agent.episodes = 5000;
  plan->add_option("query-file", plan_queries, "Query file (JSON)")->required();
  plan->add_option("--reward-mode", plan_mode, "learned-cardinality, true-cardinality or baseline-cost");
  plan->add_option("--model", plan_model, "Model checkpoint (learned-cardinality reward)");
  plan->add_option("--q-mode", plan_qmode, "tabular or approximate");
  plan->add_option("--episodes", agent.episodes, "Training episodes per query");
  plan->add_option("--alpha", agent.alpha, "Q-learning step size");
  plan->add_option("--gamma", agent.gamma, "Discount");
  plan->add_option("--episode-log", step_log, "Write per-step JSON lines here");
  plan->callback([&] {
    const auto db = pl_src.load();
    const Catalog catalog(db, pl_src.buckets);
    const auto mode = parse_reward_mode(plan_mode);
    std::optional<RepresentationModel> model;
    if (!plan_model.empty()) model = load_model_file(plan_model);
    PlanningEnv env(db, catalog, model ? &*model : nullptr, mode);
    PlanningEnv reference(db, catalog, nullptr, RewardMode::true_cardinality);
    std::ofstream log_file;
    if (!step_log.empty()) log_file.open(step_log);
    const auto queries = parse_queries(read_json(plan_queries));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto& q = queries[i];
      auto qf = parse_q_mode(plan_qmode) == QMode::tabular
                    ? QFunction::tabular()
                    : QFunction::approximate(
                          (model ? model->state_dim() : 0) + catalog.context_size() + catalog.action_size(), 32,
                          derive_seed(pl_src.seed, "q-init:" + std::to_string(i)));
      auto cfg = agent;
      cfg.seed = derive_seed(pl_src.seed, "agent:" + std::to_string(i));
      run_training(env, std::span(&q, 1), qf, cfg, log_file.is_open() ? &log_file : nullptr);
      const auto best = best_plan(env, qf, q);
      const auto opt = exhaustive_optimum(reference, q);
      std::cout << "query " << i << ": " << q.to_string() << '\n'
                << render_plan(q, best.plan) << "cost " << format_double(plan_cost(reference, q, best.plan))
                << " (optimum " << format_double(opt.cost) << ")\n\n";
    }
  });

  // compare
  auto* compare = app.add_subcommand("compare", "True, baseline and learned cardinalities per query stage");
  DataSource cmp_src;
  cmp_src.add(compare);
  std::string cmp_queries, cmp_model;
  compare->add_option("--queries", cmp_queries, "Query file (JSON)")->required();
  compare->add_option("--model", cmp_model, "Model checkpoint");
  compare->callback([&] {
    const auto db = cmp_src.load();
    const Catalog catalog(db, cmp_src.buckets);
    const auto x0 = build_x0(catalog);
    const BaselineEstimator baseline(catalog);
    CardinalityCache oracle(db);
    std::optional<RepresentationModel> model;
    if (!cmp_model.empty()) model = load_model_file(cmp_model);
    std::cout << "query,stage,true,baseline" << (model ? ",learned" : "") << '\n';
    const auto queries = parse_queries(read_json(cmp_queries));
    for (std::size_t i = 0; i < queries.size(); ++i) {
      const auto plan = canonical_plan(queries[i]);
      std::vector<double> preds;
      if (model) preds = predict_query(*model, catalog, x0, queries[i], plan);
      for (std::size_t t = 0; t < plan.size(); ++t) {
        const auto stage = stage_subquery(queries[i], std::span(plan).first(t + 1));
        std::cout << i << ',' << t + 1 << ',' << oracle.get(stage) << ','
                  << format_double(baseline.estimate_subquery(stage));
        if (model) std::cout << ',' << format_double(preds[t]);
        std::cout << '\n';
      }
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const qstate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
