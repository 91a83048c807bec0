#include "qstate/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>

#include "qstate/errors.hpp"
#include "qstate/util.hpp"

namespace qstate {

Normalization parse_normalization(std::string_view name) {
  if (name == "selectivity") return Normalization::selectivity;
  if (name == "raw") return Normalization::raw;
  throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

std::string_view to_string(Normalization n) { return n == Normalization::raw ? "raw" : "selectivity"; }

RepresentationModel::RepresentationModel(std::size_t x0_dim, std::size_t action_dim, const ModelConfig& c)
    : state_dim_(c.state_dim), x0_dim_(x0_dim), action_dim_(action_dim), normalization_(c.normalization) {
  if (c.state_dim == 0 || c.init_hidden == 0 || c.transition_hidden == 0 || c.observed_hidden == 0)
    throw ConfigError("model widths must be positive");
  if (x0_dim == 0 || action_dim == 0) throw ShapeError("model needs non-empty x0 and action encodings");
  std::mt19937_64 rng(c.seed);
  const auto h = c.hidden_activation;
  const auto head = c.normalization == Normalization::raw ? Activation::identity : Activation::sigmoid;
  {
    const std::size_t dims[] = {x0_dim + action_dim, c.init_hidden, c.state_dim};
    const Activation acts[] = {h, c.state_activation};
    init_ = Network::glorot(dims, acts, rng);
  }
  {
    const std::size_t dims[] = {c.state_dim + action_dim, c.transition_hidden, c.state_dim};
    const Activation acts[] = {h, c.state_activation};
    st_ = Network::glorot(dims, acts, rng);
  }
  {
    const std::size_t dims[] = {c.state_dim, c.observed_hidden, 1};
    const Activation acts[] = {h, head};
    obs_ = Network::glorot(dims, acts, rng);
  }
}

RepresentationModel::RepresentationModel(Network nn_init, Network nn_st, Network nn_observed, std::size_t action_dim,
                                         Normalization normalization)
    : init_(std::move(nn_init)), st_(std::move(nn_st)), obs_(std::move(nn_observed)), action_dim_(action_dim),
      normalization_(normalization) {
  state_dim_ = init_.output_dim();
  if (state_dim_ == 0) throw ShapeError("nn_init is empty");
  if (init_.input_dim() <= action_dim) throw ShapeError("nn_init input too small for the action encoding");
  x0_dim_ = init_.input_dim() - action_dim;
  if (st_.input_dim() != state_dim_ + action_dim || st_.output_dim() != state_dim_)
    throw ShapeError("nn_st does not map [h; a] to h");
  if (obs_.input_dim() != state_dim_ || obs_.output_dim() != 1) throw ShapeError("nn_observed does not map h to a scalar");
}

namespace {

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

HiddenState initial_state(const RepresentationModel& m, const DatabaseVector& x0, const ActionEncoding& a0) {
  if (x0.values.size() != m.x0_dim() || a0.values.size() != m.action_dim())
    throw ShapeError("initial_state: encodings do not match the model");
  return predict(m.nn_init(), concat(x0.values, a0.values));
}

HiddenState transition(const RepresentationModel& m, const HiddenState& h, const ActionEncoding& a) {
  if (h.size() != m.state_dim() || a.values.size() != m.action_dim())
    throw ShapeError("transition: state or action does not match the model");
  return predict(m.nn_st(), concat(h, a.values));
}

double observe(const RepresentationModel& m, const HiddenState& h) {
  if (h.size() != m.state_dim()) throw ShapeError("observe: state does not match the model");
  return predict(m.nn_observed(), h)[0];
}

double decode_output(Normalization n, double y, double scale) {
  const double card = n == Normalization::raw ? y : y * scale;
  return std::max(0.0, card);
}

double decode_cardinality(const RepresentationModel& m, const HiddenState& h, double scale) {
  return decode_output(m.normalization(), observe(m, h), scale);
}

double stage_scale(const Catalog& catalog, const QuerySpec& stage) {
  double s = 1.0;
  for (const auto& r : stage.relations) s *= static_cast<double>(catalog.row_count(r));
  return s;
}

SequenceExample make_example(const QuerySpec& q, std::span<const Action> actions, const Catalog& catalog,
                             CardinalityCache& oracle) {
  check_legal_prefix(q, actions);
  SequenceExample ex;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    const auto stage = stage_subquery(q, actions.first(t + 1));
    ex.actions.push_back(encode_action(actions[t], catalog));
    ex.labels.push_back(static_cast<double>(oracle.get(stage)));
    ex.scales.push_back(stage_scale(catalog, stage));
  }
  return ex;
}

ModelGradient combined_gradient(const RepresentationModel& m, const DatabaseVector& x0, const SequenceExample& ex,
                                double floor, std::size_t max_depth) {
  if (ex.actions.empty()) throw ContractViolation("sequence example has no actions");
  if (ex.labels.size() != ex.actions.size() || ex.scales.size() != ex.actions.size())
    throw ShapeError("sequence example labels/scales do not match its actions");
  const std::size_t T = std::min(ex.actions.size(), max_depth);
  const std::size_t n = m.state_dim();

  std::vector<Tape> state_tapes;
  std::vector<Tape> obs_tapes;
  std::vector<double> dy(T);
  ModelGradient g{Gradient::zeros_like(m.nn_init()), Gradient::zeros_like(m.nn_st()),
                  Gradient::zeros_like(m.nn_observed()), 0.0, T};

  HiddenState h;
  for (std::size_t t = 0; t < T; ++t) {
    if (ex.actions[t].values.size() != m.action_dim()) throw ShapeError("action encoding does not match the model");
    auto fr = t == 0 ? forward(m.nn_init(), concat(x0.values, ex.actions[0].values))
                     : forward(m.nn_st(), concat(h, ex.actions[t].values));
    h = fr.output;
    state_tapes.push_back(std::move(fr.tape));
    auto ob = forward(m.nn_observed(), h);
    const double pred = decode_output(m.normalization(), ob.output[0], ex.scales[t]);
    const auto lv = relative_error_loss(pred, ex.labels[t], floor);
    g.loss += lv.loss;
    // Straight-through past the clamp at zero.
    dy[t] = m.normalization() == Normalization::raw ? lv.gradient : lv.gradient * ex.scales[t];
    obs_tapes.push_back(std::move(ob.tape));
  }

  std::vector<double> dh(n, 0.0);
  for (std::size_t t = T; t-- > 0;) {
    const double dyt[] = {dy[t]};
    const auto go = backward(m.nn_observed(), obs_tapes[t], dyt);
    g.obs.accumulate(go);
    for (std::size_t i = 0; i < n; ++i) dh[i] += go.input[i];
    if (t > 0) {
      const auto gs = backward(m.nn_st(), state_tapes[t], dh);
      g.st.accumulate(gs);
      std::copy(gs.input.begin(), gs.input.begin() + static_cast<std::ptrdiff_t>(n), dh.begin());
    } else {
      g.init.accumulate(backward(m.nn_init(), state_tapes[0], dh));
    }
  }
  return g;
}

std::vector<double> predict_sequence(const RepresentationModel& m, const DatabaseVector& x0,
                                     std::span<const ActionEncoding> actions, std::span<const double> scales) {
  if (scales.size() != actions.size()) throw ShapeError("predict_sequence: one scale per action required");
  std::vector<double> out;
  HiddenState h;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    h = t == 0 ? initial_state(m, x0, actions[0]) : transition(m, h, actions[t]);
    out.push_back(decode_cardinality(m, h, scales[t]));
  }
  return out;
}

std::vector<double> predict_query(const RepresentationModel& m, const Catalog& catalog, const DatabaseVector& x0,
                                  const QuerySpec& q, std::span<const Action> actions) {
  check_legal_prefix(q, actions);
  std::vector<ActionEncoding> enc;
  std::vector<double> scales;
  for (std::size_t t = 0; t < actions.size(); ++t) {
    enc.push_back(encode_action(actions[t], catalog));
    scales.push_back(stage_scale(catalog, stage_subquery(q, actions.first(t + 1))));
  }
  return predict_sequence(m, x0, enc, scales);
}

std::vector<double> stage_errors(const RepresentationModel& m, const DatabaseVector& x0,
                                 std::span<const SequenceExample> data, double floor) {
  std::vector<double> errs;
  for (const auto& ex : data) {
    const auto preds = predict_sequence(m, x0, ex.actions, ex.scales);
    for (std::size_t t = 0; t < preds.size(); ++t)
      errs.push_back(relative_error_loss(preds[t], ex.labels[t], floor).loss);
  }
  return errs;
}

namespace {

EpochMetrics summarize(std::size_t epoch, std::string split, const std::vector<double>& errs, std::size_t skipped) {
  EpochMetrics em;
  em.epoch = epoch;
  em.split = std::move(split);
  em.skipped = skipped;
  if (!errs.empty()) {
    em.mean = mean(errs);
    em.median = median(errs);
    em.std = stddev(errs);
  }
  return em;
}

}  // namespace

TrainResult train_combined(RepresentationModel& m, const DatabaseVector& x0, std::span<const SequenceExample> train,
                           std::span<const SequenceExample> test, const TrainConfig& c) {
  if (c.epochs > 0 && train.empty()) throw ConfigError("training set is empty");
  if (!(c.lr >= 0) || !std::isfinite(c.lr)) throw ConfigError("learning rate must be a finite non-negative number");
  if (x0.values.size() != m.x0_dim()) throw ShapeError("x0 does not match the model");
  TrainResult result;
  std::mt19937_64 rng(c.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto curriculum_epochs =
      c.curriculum ? static_cast<std::size_t>(std::floor(c.curriculum_fraction * static_cast<double>(c.epochs))) : 0;

  for (std::size_t epoch = 1; epoch <= c.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t depth = epoch <= curriculum_epochs ? 1 : std::numeric_limits<std::size_t>::max();
    std::size_t skipped = 0;
    for (auto idx : order) {
      ModelGradient g;
      try {
        g = combined_gradient(m, x0, train[idx], c.floor, depth);
      } catch (const NumericError&) {
        ++skipped;
        continue;
      }
      if (!std::isfinite(g.loss) || !g.all_finite()) {
        ++skipped;
        continue;
      }
      if (c.max_grad_norm > 0) {
        const double norm = std::sqrt(g.squared_norm());
        if (norm > c.max_grad_norm) g.scale(c.max_grad_norm / norm);
      }
      apply_sgd(m.nn_init(), g.init, c.lr);
      apply_sgd(m.nn_st(), g.st, c.lr);
      apply_sgd(m.nn_observed(), g.obs, c.lr);
    }
    result.skipped += skipped;
    result.metrics.push_back(summarize(epoch, "train", stage_errors(m, x0, train, c.floor), skipped));
    if (!test.empty()) result.metrics.push_back(summarize(epoch, "test", stage_errors(m, x0, test, c.floor), 0));
  }
  return result;
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> metrics) {
  out << "epoch,split,mean_rel_err,median_rel_err,std\n";
  for (const auto& m : metrics)
    out << m.epoch << ',' << m.split << ',' << format_double(m.mean) << ',' << format_double(m.median) << ','
        << format_double(m.std) << '\n';
}

namespace {
constexpr char kModelMagic[4] = {'Q', 'S', 'R', 'M'};
constexpr std::uint8_t kModelVersion = 1;
}  // namespace

void save_model(std::ostream& out, const RepresentationModel& m) {
  out.write(kModelMagic, 4);
  const char header[2] = {static_cast<char>(kModelVersion), static_cast<char>(m.normalization())};
  out.write(header, 2);
  const std::uint64_t action_dim = m.action_dim();
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(action_dim >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
  save_network(out, m.nn_init());
  save_network(out, m.nn_st());
  save_network(out, m.nn_observed());
  if (!out) throw Error("failed to write model checkpoint");
}

RepresentationModel load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kModelMagic, 4) != 0) throw ParseError("not a model checkpoint");
  char header[2];
  if (!in.read(header, 2)) throw ParseError("model checkpoint truncated");
  if (static_cast<std::uint8_t>(header[0]) != kModelVersion) throw ParseError("unsupported model checkpoint version");
  const auto norm = static_cast<std::uint8_t>(header[1]);
  if (norm > 1) throw ParseError("unknown normalization code in checkpoint");
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError("model checkpoint truncated");
  std::uint64_t action_dim = 0;
  for (int i = 0; i < 8; ++i) action_dim |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  auto init = load_network(in);
  auto st = load_network(in);
  auto obs = load_network(in);
  return RepresentationModel(std::move(init), std::move(st), std::move(obs), action_dim,
                             static_cast<Normalization>(norm));
}

void save_model_file(const std::string& path, const RepresentationModel& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save_model(out, m);
}

RepresentationModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load_model(in);
}

}  // namespace qstate
