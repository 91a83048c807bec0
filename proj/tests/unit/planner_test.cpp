#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "gtest/gtest.h"
#include "qstate/errors.hpp"
#include "qstate/planner.hpp"
#include "support.hpp"

namespace qstate {
namespace {

using testing::make_relation;

Database chain_db() { return testing::hand_mdp_database(); }
QuerySpec chain_query() { return testing::hand_mdp_query(); }

class PlannerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = chain_db();
    catalog_ = Catalog(db_, 4);
  }

  PlanningEnv env(RewardMode mode = RewardMode::true_cardinality) const {
    return PlanningEnv(db_, catalog_, nullptr, mode);
  }

  Database db_;
  Catalog catalog_;
};

double r(double card) { return -std::log10(1 + card); }

TEST_F(PlannerTest, RewardExamples) {
  auto e = env();
  EXPECT_EQ(e.reward_of(0), 0.0);
  EXPECT_DOUBLE_EQ(e.reward_of(999), -3.0);
  PlanningEnv raw(db_, catalog_, nullptr, RewardMode::true_cardinality, RewardScale::raw);
  EXPECT_EQ(raw.reward_of(42), -42.0);
}

TEST_F(PlannerTest, LegalActionsAndSteps) {
  auto e = env();
  auto q = chain_query();
  auto s0 = e.reset(q);
  EXPECT_TRUE(s0.hidden.empty());
  auto legal = e.legal_actions(s0, q);
  ASSERT_EQ(legal.size(), 2u);
  EXPECT_LT(e.action_id(legal[0]), e.action_id(legal[1]));
  auto st = e.step(s0, q, legal[0]);
  EXPECT_EQ(st.cardinality, 4.0);
  EXPECT_DOUBLE_EQ(st.reward, r(4));
  // the same join cannot be applied twice
  EXPECT_THROW(e.step(st.next, q, legal[0]), ContractViolation);
  auto last = e.legal_actions(st.next, q);
  ASSERT_EQ(last.size(), 1u);
  auto end = e.step(st.next, q, last[0]);
  EXPECT_EQ(end.cardinality, 6.0);
  EXPECT_TRUE(end.next.terminal());
  EXPECT_TRUE(e.legal_actions(end.next, q).empty());
}

TEST_F(PlannerTest, ActionIdsFollowCatalogOrder) {
  auto e = env();
  EXPECT_EQ(e.action_count(), 3u + 2u);
  EXPECT_EQ(e.action_id(SelectionAction{"S", {{{"S", "f"}, 1}}}), 1u);
  EXPECT_EQ(e.action_id(JoinAction{{{"S", "f"}, {"T", "f"}}}), 4u);
}

TEST_F(PlannerTest, LearnedModeNeedsModel) {
  EXPECT_THROW(PlanningEnv(db_, catalog_, nullptr, RewardMode::learned_cardinality), ConfigError);
}

TEST_F(PlannerTest, CyclicQueryIsRejected) {
  std::vector<Relation> rels{make_relation("A", {{"x", {1}}, {"y", {1}}}), make_relation("B", {{"y", {1}}, {"z", {1}}}),
                             make_relation("C", {{"z", {1}}, {"x", {1}}})};
  std::vector<JoinPredicate> keys{{{"A", "y"}, {"B", "y"}}, {{"B", "z"}, {"C", "z"}}, {{"C", "x"}, {"A", "x"}}};
  Database db(rels, keys);
  Catalog cat(db, 2);
  PlanningEnv e(db, cat, nullptr, RewardMode::true_cardinality);
  EXPECT_THROW(e.reset({{"A", "B", "C"}, {}, keys}), ContractViolation);
}

TEST_F(PlannerTest, TabularUpdateArithmetic) {
  auto e = env();
  auto q = chain_query();
  auto s0 = e.reset(q);
  auto a = e.legal_actions(s0, q)[0];
  auto st = e.step(s0, q, a);
  auto a2 = e.legal_actions(st.next, q)[0];
  auto end = e.step(st.next, q, a2);

  auto qf = QFunction::tabular();
  qf.update(st.next, a2, -0.5, end.next, {}, e, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(qf.value(st.next, a2, e), -0.05);
  // alpha = 0 leaves the entry alone
  qf.update(st.next, a2, -7.0, end.next, {}, e, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(qf.value(st.next, a2, e), -0.05);
  // bootstrap from the successor: 0 + 0.1 * (-1 + 1.0 * -0.05 - 0)
  auto legal_next = e.legal_actions(st.next, q);
  qf.update(s0, a, -1.0, st.next, legal_next, e, 0.1, 1.0);
  EXPECT_DOUBLE_EQ(qf.value(s0, a, e), 0.1 * (-1.0 - 0.05));
  EXPECT_EQ(qf.table_size(), 2u);
}

TEST_F(PlannerTest, TwoStepMdpConvergesToHandSolution) {
  auto e = env();
  std::vector<QuerySpec> qs{chain_query()};
  auto qf = QFunction::tabular();
  AgentConfig c;
  c.episodes = 2000;
  c.seed = 1;
  run_training(e, qs, qf, c);

  auto s0 = e.reset(qs[0]);
  auto legal = e.legal_actions(s0, qs[0]);
  ASSERT_EQ(legal.size(), 2u);
  // legal[0] = R-S join (id 3), legal[1] = S-T join (id 4)
  EXPECT_NEAR(qf.value(s0, legal[0], e), r(4) + r(6), 1e-6);
  EXPECT_NEAR(qf.value(s0, legal[1], e), r(5) + r(6), 1e-6);
  auto best = best_plan(e, qf, qs[0]);
  ASSERT_EQ(best.plan.size(), 2u);
  EXPECT_EQ(best.plan[0], legal[0]);
  EXPECT_NEAR(best.total_reward, r(4) + r(6), 1e-12);
}

TEST_F(PlannerTest, EpisodeRewardsSumToNegatedPlanCost) {
  auto e = env();
  std::vector<QuerySpec> qs{chain_query()};
  auto qf = QFunction::tabular();
  AgentConfig c;
  c.episodes = 30;
  auto episodes = run_training(e, qs, qf, c);
  ASSERT_EQ(episodes.size(), 30u);
  for (const auto& ep : episodes) {
    double sum = 0;
    for (double x : ep.rewards) sum += x;
    EXPECT_DOUBLE_EQ(ep.total_reward, sum);
    EXPECT_NEAR(ep.total_reward, -plan_cost(e, qs[0], ep.plan), 1e-12);
    EXPECT_EQ(ep.plan.size(), 2u);
  }
}

TEST_F(PlannerTest, ZeroEpisodesLeaveTableEmpty) {
  auto e = env();
  std::vector<QuerySpec> qs{chain_query()};
  auto qf = QFunction::tabular();
  AgentConfig c;
  c.episodes = 0;
  EXPECT_TRUE(run_training(e, qs, qf, c).empty());
  EXPECT_EQ(qf.table_size(), 0u);
}

TEST_F(PlannerTest, FixedSeedReplaysIdentically) {
  std::vector<QuerySpec> qs{chain_query()};
  AgentConfig c;
  c.episodes = 50;
  c.seed = 77;
  std::ostringstream a, b;
  auto e1 = env(), e2 = env();
  auto q1 = QFunction::tabular(), q2 = QFunction::tabular();
  run_training(e1, qs, q1, c, &a);
  run_training(e2, qs, q2, c, &b);
  EXPECT_FALSE(a.str().empty());
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(q1.table(), q2.table());
}

TEST_F(PlannerTest, InvalidAgentConfig) {
  AgentConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.alpha = 0.1;
  c.gamma = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST_F(PlannerTest, EpsilonSchedule) {
  AgentConfig c;
  c.episodes = 100;
  EXPECT_DOUBLE_EQ(c.epsilon_at(0), 1.0);
  EXPECT_DOUBLE_EQ(c.epsilon_at(25), 0.525);
  EXPECT_DOUBLE_EQ(c.epsilon_at(50), 0.05);
  EXPECT_DOUBLE_EQ(c.epsilon_at(99), 0.05);
}

TEST_F(PlannerTest, StateKeyCarriesContextVerbatim) {
  auto e = env();
  auto s0 = e.reset(chain_query());
  auto qf = QFunction::tabular();
  EXPECT_EQ(qf.state_key(s0), "0,0,0,0,1,1,|");
}

TEST_F(PlannerTest, OptimumOnChain) {
  auto e = env();
  auto opt = exhaustive_optimum(e, chain_query());
  ASSERT_EQ(opt.plan.size(), 2u);
  EXPECT_EQ(e.action_id(opt.plan[0]), 3u);
  EXPECT_NEAR(opt.cost, std::log10(5.0) + std::log10(7.0), 1e-12);
}

TEST_F(PlannerTest, SingleRelationPlans) {
  auto e = env();
  QuerySpec q{{"R"}, {{{"R", "k"}, 1}}, {}};
  auto opt = exhaustive_optimum(e, q);
  ASSERT_EQ(opt.plan.size(), 1u);
  EXPECT_NEAR(opt.cost, std::log10(3.0), 1e-12);
  auto qf = QFunction::tabular();
  EXPECT_EQ(best_plan(e, qf, q).plan, opt.plan);
}

TEST_F(PlannerTest, TiesPickLowestActionIds) {
  // both selections filter nothing, so every order costs the same
  auto e = env();
  QuerySpec q{{"R", "S"}, {{{"R", "k"}, 9}, {{"S", "f"}, 9}}, {{{"R", "k"}, {"S", "k"}}}};
  auto opt = exhaustive_optimum(e, q);
  ASSERT_EQ(opt.plan.size(), 3u);
  EXPECT_EQ(e.action_id(opt.plan[0]), 0u);
  EXPECT_EQ(e.action_id(opt.plan[1]), 1u);
}

TEST_F(PlannerTest, RenderedPlanShowsTree) {
  auto q = chain_query();
  q.selections.push_back({{"T", "f"}, 1});
  auto plan = query_actions(q);
  // selection on T first, then R-S, then S-T
  auto text = render_plan(q, plan);
  EXPECT_NE(text.find("Join S.f = T.f"), std::string::npos) << text;
  EXPECT_NE(text.find("  Join R.k = S.k"), std::string::npos) << text;
  EXPECT_NE(text.find("Scan R"), std::string::npos) << text;
  EXPECT_NE(text.find("Select T [T.f <= 1]"), std::string::npos) << text;
  EXPECT_EQ(text.rfind("Join S.f = T.f", 0), 0u) << text;
}

TEST_F(PlannerTest, ApproximateModeTrainsItsNetwork) {
  auto e = env();
  std::vector<QuerySpec> qs{chain_query()};
  const std::size_t dim = catalog_.context_size() + catalog_.action_size();
  auto qf = QFunction::approximate(dim, 8, 3);
  auto before = qf.network();
  AgentConfig c;
  c.episodes = 50;
  c.alpha = 0.05;
  auto eps = run_training(e, qs, qf, c);
  EXPECT_EQ(eps.size(), 50u);
  EXPECT_FALSE(qf.network() == before);
  EXPECT_EQ(best_plan(e, qf, qs[0]).plan.size(), 2u);
}

TEST(OptimumTest, MatchesBruteForceEnumeration) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    auto db = testing::random_database(rng, 30);
    Catalog cat(db, 4);
    PlanningEnv e(db, cat, nullptr, RewardMode::true_cardinality);
    for (int i = 0; i < 8; ++i) {
      auto q = testing::random_query(rng);
      auto ops = query_actions(q);
      if (ops.empty()) continue;
      std::vector<std::size_t> perm(ops.size());
      for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
      double best = std::numeric_limits<double>::infinity();
      do {
        std::vector<Action> plan;
        for (auto k : perm) plan.push_back(ops[k]);
        try {
          check_legal_prefix(q, plan);
        } catch (const ContractViolation&) {
          continue;
        }
        double cost = 0;
        for (std::size_t t = 0; t < plan.size(); ++t)
          cost += std::log10(1.0 + static_cast<double>(
                                       testing::nested_loop_count(db, stage_subquery(q, std::span(plan).first(t + 1)))));
        best = std::min(best, cost);
      } while (std::next_permutation(perm.begin(), perm.end()));
      EXPECT_NEAR(exhaustive_optimum(e, q).cost, best, 1e-9) << q.to_string();
    }
  }
}

TEST(OptimumTest, MoreThanFiveRelationsIsCapacityError) {
  std::vector<Relation> rels;
  std::vector<JoinPredicate> keys;
  QuerySpec q;
  for (int i = 0; i < 6; ++i) {
    const auto name = "X" + std::to_string(i);
    rels.push_back(make_relation(name, {{"k", {1, 2}}}));
    q.relations.push_back(name);
    if (i > 0) {
      keys.push_back({{"X" + std::to_string(i - 1), "k"}, {name, "k"}});
      q.joins.push_back(keys.back());
    }
  }
  Database db(rels, keys);
  Catalog cat(db, 2);
  PlanningEnv e(db, cat, nullptr, RewardMode::true_cardinality);
  EXPECT_THROW(exhaustive_optimum(e, q), CapacityError);
}

}  // namespace
}  // namespace qstate
