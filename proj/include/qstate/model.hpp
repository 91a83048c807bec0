#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qstate/catalog.hpp"
#include "qstate/nn.hpp"
#include "qstate/oracle.hpp"
#include "qstate/query.hpp"

namespace qstate {

/// selectivity: the observed head emits a sigmoid fraction of the stage scale.
/// raw: the head is linear and its output is the cardinality itself.
enum class Normalization : std::uint8_t { selectivity = 0, raw = 1 };

Normalization parse_normalization(std::string_view name);
std::string_view to_string(Normalization n);

struct ModelConfig {
  std::size_t state_dim = 64;
  std::size_t init_hidden = 50;
  std::size_t transition_hidden = 64;
  std::size_t observed_hidden = 32;
  Activation hidden_activation = Activation::tanh;
  /// Output layer of nn_init and nn_st, i.e. the activation of h itself.
  Activation state_activation = Activation::tanh;
  Normalization normalization = Normalization::selectivity;
  std::uint64_t seed = 0;
};

using HiddenState = std::vector<double>;

/// nn_init: [x0; a] -> h,  nn_st: [h; a] -> h',  nn_observed: h -> scalar.
/// h lies in (-1, 1) under the default tanh state activation, (0, 1) under sigmoid.
class RepresentationModel {
 public:
  RepresentationModel() = default;
  RepresentationModel(std::size_t x0_dim, std::size_t action_dim, const ModelConfig& config);
  /// Throws ShapeError unless the three networks chain on a common state dimension.
  RepresentationModel(Network nn_init, Network nn_st, Network nn_observed, std::size_t action_dim,
                      Normalization normalization);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t x0_dim() const { return x0_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  Normalization normalization() const { return normalization_; }

  const Network& nn_init() const { return init_; }
  const Network& nn_st() const { return st_; }
  const Network& nn_observed() const { return obs_; }
  Network& nn_init() { return init_; }
  Network& nn_st() { return st_; }
  Network& nn_observed() { return obs_; }

  bool operator==(const RepresentationModel& o) const {
    return init_ == o.init_ && st_ == o.st_ && obs_ == o.obs_ && normalization_ == o.normalization_;
  }

 private:
  Network init_, st_, obs_;
  std::size_t state_dim_ = 0, x0_dim_ = 0, action_dim_ = 0;
  Normalization normalization_ = Normalization::selectivity;
};

HiddenState initial_state(const RepresentationModel& m, const DatabaseVector& x0, const ActionEncoding& a0);
HiddenState transition(const RepresentationModel& m, const HiddenState& h, const ActionEncoding& a);
/// Raw output of nn_observed.
double observe(const RepresentationModel& m, const HiddenState& h);
/// Denormalized, non-negative cardinality for a stage whose input size is `scale`.
double decode_cardinality(const RepresentationModel& m, const HiddenState& h, double scale);
double decode_output(Normalization n, double y, double scale);

/// Product of base-relation sizes under a stage subquery (table size for a
/// selection stage, Cartesian bound for a join stage).
double stage_scale(const Catalog& catalog, const QuerySpec& stage);

struct SequenceExample {
  std::vector<ActionEncoding> actions;
  std::vector<double> labels;  ///< true cardinality after each action
  std::vector<double> scales;  ///< stage_scale after each action
};

/// Labels every stage of a legal action sequence with the oracle.
SequenceExample make_example(const QuerySpec& q, std::span<const Action> actions, const Catalog& catalog,
                             CardinalityCache& oracle);

struct ModelGradient {
  Gradient init, st, obs;
  double loss = 0;
  std::size_t stages = 0;

  double squared_norm() const { return init.squared_norm() + st.squared_norm() + obs.squared_norm(); }
  bool all_finite() const { return init.all_finite() && st.all_finite() && obs.all_finite(); }
  void scale(double f) {
    init.scale(f);
    st.scale(f);
    obs.scale(f);
  }
};

/// Summed relative-error loss over the first `max_depth` stages and its exact
/// gradient, back-propagated through every transition into nn_init.
ModelGradient combined_gradient(const RepresentationModel& m, const DatabaseVector& x0, const SequenceExample& ex,
                                double floor, std::size_t max_depth = std::numeric_limits<std::size_t>::max());

/// Stage predictions h_1..h_T decoded with the given scales.
std::vector<double> predict_sequence(const RepresentationModel& m, const DatabaseVector& x0,
                                     std::span<const ActionEncoding> actions, std::span<const double> scales);
/// Checks the prefix is legal for `q` (ContractViolation otherwise), then predicts every stage.
std::vector<double> predict_query(const RepresentationModel& m, const Catalog& catalog, const DatabaseVector& x0,
                                  const QuerySpec& q, std::span<const Action> actions);

struct TrainConfig {
  std::size_t epochs = 20;
  double lr = 0.01;
  std::uint64_t seed = 0;
  double floor = 1.0;
  /// Global L2 clip on the per-example gradient; 0 disables.
  double max_grad_norm = 1.0;
  /// Train on the first stage only for the leading fraction of epochs.
  bool curriculum = true;
  double curriculum_fraction = 0.25;
};

struct EpochMetrics {
  std::size_t epoch = 0;  ///< 1-based
  std::string split;      ///< "train" or "test"
  double mean = 0;
  double median = 0;
  double std = 0;
  std::size_t skipped = 0;  ///< examples dropped this epoch for non-finite loss
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::size_t skipped = 0;
};

/// Relative errors of every stage prediction of every example, in order.
std::vector<double> stage_errors(const RepresentationModel& m, const DatabaseVector& x0,
                                 std::span<const SequenceExample> data, double floor);

/// Per-example SGD over shuffled epochs; metrics after every epoch for both splits.
/// An empty `test` set yields train rows only.
TrainResult train_combined(RepresentationModel& m, const DatabaseVector& x0, std::span<const SequenceExample> train,
                           std::span<const SequenceExample> test, const TrainConfig& config);

/// CSV with header epoch,split,mean_rel_err,median_rel_err,std.
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics);

void save_model(std::ostream& out, const RepresentationModel& m);
RepresentationModel load_model(std::istream& in);
void save_model_file(const std::string& path, const RepresentationModel& m);
RepresentationModel load_model_file(const std::string& path);

}  // namespace qstate
