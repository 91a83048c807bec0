#include "qstate/nn.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "qstate/errors.hpp"

namespace qstate {

namespace {

std::uint64_t next_revision() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::identity: return z;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  return z;
}

// Derivative expressed through the activation's output y.
double derivative_from_output(Activation a, double y) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: return y * (1.0 - y);
    case Activation::relu: return y > 0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
  }
  return 1.0;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw NumericError(std::string("non-finite ") + what);
}

void dense(const DenseLayer& layer, std::span<const double> x, std::vector<double>& y) {
  y.assign(layer.outputs, 0.0);
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const double* w = layer.weights.data() + o * layer.inputs;
    double z = layer.bias[o];
    for (std::size_t i = 0; i < layer.inputs; ++i) z += w[i] * x[i];
    y[o] = activate(layer.activation, z);
  }
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity" || name == "linear") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)), revision_(next_revision()) {
  if (layers_.empty()) throw ShapeError("network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.inputs == 0 || l.outputs == 0) throw ShapeError("layer " + std::to_string(k) + " has a zero dimension");
    if (l.weights.size() != l.inputs * l.outputs || l.bias.size() != l.outputs)
      throw ShapeError("layer " + std::to_string(k) + " parameter sizes do not match its dimensions");
    if (k > 0 && layers_[k - 1].outputs != l.inputs)
      throw ShapeError("layer " + std::to_string(k) + " input does not chain with the previous output");
    check_finite(l.weights, "weight");
    check_finite(l.bias, "bias");
  }
}

Network Network::glorot(std::span<const std::size_t> dims, std::span<const Activation> activations,
                        std::mt19937_64& rng) {
  if (dims.size() != activations.size() + 1) throw ShapeError("glorot: need one activation per layer");
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k < activations.size(); ++k) {
    DenseLayer l;
    l.inputs = dims[k];
    l.outputs = dims[k + 1];
    l.activation = activations[k];
    const double r = std::sqrt(6.0 / static_cast<double>(l.inputs + l.outputs));
    std::uniform_real_distribution<double> u(-r, r);
    l.weights.resize(l.inputs * l.outputs);
    for (auto& w : l.weights) w = u(rng);
    l.bias.assign(l.outputs, 0.0);
    layers.push_back(std::move(l));
  }
  return Network(std::move(layers));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<DenseLayer>& Network::mutable_layers() {
  revision_ = next_revision();
  return layers_;
}

Gradient Gradient::zeros_like(const Network& net) {
  Gradient g;
  for (const auto& l : net.layers())
    g.layers.push_back({std::vector<double>(l.weights.size(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
  g.input.assign(net.input_dim(), 0.0);
  return g;
}

void Gradient::accumulate(const Gradient& other) {
  if (other.layers.size() != layers.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& a = layers[k];
    const auto& b = other.layers[k];
    if (a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
      throw ShapeError("gradient shape mismatch");
    for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += b.weights[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += b.bias[i];
  }
}

void Gradient::scale(double factor) {
  for (auto& l : layers) {
    for (auto& w : l.weights) w *= factor;
    for (auto& b : l.bias) b *= factor;
  }
  for (auto& x : input) x *= factor;
}

double Gradient::squared_norm() const {
  double s = 0;
  for (const auto& l : layers) {
    for (double w : l.weights) s += w * w;
    for (double b : l.bias) s += b * b;
  }
  return s;
}

bool Gradient::all_finite() const {
  for (const auto& l : layers) {
    for (double w : l.weights)
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

ForwardResult forward(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw ShapeError("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(net.input_dim()));
  check_finite(x, "network input");
  ForwardResult r;
  r.tape.revision = net.revision();
  r.tape.values.reserve(net.layers().size() + 1);
  r.tape.values.emplace_back(x.begin(), x.end());
  for (const auto& l : net.layers()) {
    std::vector<double> y;
    dense(l, r.tape.values.back(), y);
    r.tape.values.push_back(std::move(y));
  }
  r.output = r.tape.values.back();
  return r;
}

std::vector<double> predict(const Network& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw ShapeError("predict: input has " + std::to_string(x.size()) + " entries, network expects " +
                     std::to_string(net.input_dim()));
  check_finite(x, "network input");
  std::vector<double> cur(x.begin(), x.end()), next;
  for (const auto& l : net.layers()) {
    dense(l, cur, next);
    std::swap(cur, next);
  }
  return cur;
}

Gradient backward(const Network& net, const Tape& tape, std::span<const double> dL_dy) {
  const auto layers = net.layers();
  if (tape.revision != net.revision() || tape.values.size() != layers.size() + 1)
    throw ContractViolation("backward: tape was not recorded on this network's current parameters");
  if (dL_dy.size() != net.output_dim()) throw ShapeError("backward: dL/dy has the wrong length");

  Gradient g = Gradient::zeros_like(net);
  std::vector<double> delta(dL_dy.begin(), dL_dy.end());
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    const auto& in = tape.values[k];
    const auto& out = tape.values[k + 1];
    auto& gl = g.layers[k];
    std::vector<double> prev(l.inputs, 0.0);
    for (std::size_t o = 0; o < l.outputs; ++o) {
      const double dz = delta[o] * derivative_from_output(l.activation, out[o]);
      gl.bias[o] = dz;
      if (dz == 0.0) continue;
      const double* w = l.weights.data() + o * l.inputs;
      double* gw = gl.weights.data() + o * l.inputs;
      for (std::size_t i = 0; i < l.inputs; ++i) {
        gw[i] = dz * in[i];
        prev[i] += dz * w[i];
      }
    }
    delta = std::move(prev);
  }
  g.input = std::move(delta);
  return g;
}

void apply_sgd(Network& net, const Gradient& grad, double lr) {
  const auto layers = net.layers();
  if (grad.layers.size() != layers.size()) throw ShapeError("sgd: gradient layer count mismatch");
  for (std::size_t k = 0; k < layers.size(); ++k)
    if (grad.layers[k].weights.size() != layers[k].weights.size() ||
        grad.layers[k].bias.size() != layers[k].bias.size())
      throw ShapeError("sgd: gradient shape mismatch in layer " + std::to_string(k));
  if (!grad.all_finite()) throw NumericError("sgd: non-finite gradient, step rejected");
  if (!std::isfinite(lr)) throw NumericError("sgd: non-finite learning rate");
  auto& mut = net.mutable_layers();
  for (std::size_t k = 0; k < mut.size(); ++k) {
    for (std::size_t i = 0; i < mut[k].weights.size(); ++i) mut[k].weights[i] -= lr * grad.layers[k].weights[i];
    for (std::size_t i = 0; i < mut[k].bias.size(); ++i) mut[k].bias[i] -= lr * grad.layers[k].bias[i];
  }
}

Network sgd_step(const Network& net, const Gradient& grad, double lr) {
  Network next = net;
  apply_sgd(next, grad, lr);
  return next;
}

LossValue relative_error_loss(double pred, double truth, double floor) {
  if (!(floor > 0)) throw ContractViolation("relative error floor must be positive");
  const double den = std::max(truth, floor);
  const double diff = pred - truth;
  const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
  return {std::abs(diff) / den, sign / den};
}

LossValue squared_relative_error_loss(double pred, double truth, double floor) {
  if (!(floor > 0)) throw ContractViolation("relative error floor must be positive");
  const double den = std::max(truth, floor);
  const double r = (pred - truth) / den;
  return {r * r, 2.0 * r / den};
}

// --- checkpoint ------------------------------------------------------------

namespace {

constexpr char kNetworkMagic[4] = {'Q', 'S', 'N', 'N'};
constexpr std::uint32_t kNetworkVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw ParseError("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_network(std::ostream& out, const Network& net) {
  out.write(kNetworkMagic, 4);
  put<std::uint32_t>(out, kNetworkVersion);
  put<std::uint64_t>(out, net.layers().size());
  for (const auto& l : net.layers()) {
    put<std::uint64_t>(out, l.inputs);
    put<std::uint64_t>(out, l.outputs);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    for (double w : l.weights) put<double>(out, w);
    for (double b : l.bias) put<double>(out, b);
  }
  if (!out) throw Error("failed to write network checkpoint");
}

Network load_network(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kNetworkMagic, 4) != 0) throw ParseError("not a network checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kNetworkVersion) throw ParseError("unsupported network checkpoint version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in);
  if (count == 0 || count > 1024) throw ParseError("implausible layer count in checkpoint");
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    l.inputs = get<std::uint64_t>(in);
    l.outputs = get<std::uint64_t>(in);
    if (l.inputs == 0 || l.outputs == 0 || l.inputs > (1u << 20) || l.outputs > (1u << 20))
      throw ParseError("implausible layer shape in checkpoint");
    const auto act = get<std::uint8_t>(in);
    if (act > 3) throw ParseError("unknown activation code in checkpoint");
    l.activation = static_cast<Activation>(act);
    l.weights.resize(l.inputs * l.outputs);
    for (auto& w : l.weights) w = get<double>(in);
    l.bias.resize(l.outputs);
    for (auto& b : l.bias) b = get<double>(in);
  }
  return Network(std::move(layers));
}

}  // namespace qstate
