#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace qstate {

enum class Activation : std::uint8_t { identity = 0, sigmoid = 1, relu = 2, tanh = 3 };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation a);

/// Fully connected layer y = act(W x + b); W is row-major (outputs x inputs).
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::identity;

  bool operator==(const DenseLayer&) const = default;
};

/// Feed-forward MLP. Every change of parameters gets a fresh revision so that
/// tapes recorded against old parameters are rejected by `backward`.
class Network {
 public:
  Network() = default;
  /// Throws ShapeError if layer dimensions do not chain, NumericError on non-finite parameters.
  explicit Network(std::vector<DenseLayer> layers);

  /// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
  /// `dims` has one more entry than `activations`.
  static Network glorot(std::span<const std::size_t> dims, std::span<const Activation> activations,
                        std::mt19937_64& rng);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().inputs; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().outputs; }
  std::size_t parameter_count() const;
  std::span<const DenseLayer> layers() const { return layers_; }
  std::uint64_t revision() const { return revision_; }

  /// Mutable parameter access; bumps the revision.
  std::vector<DenseLayer>& mutable_layers();

  /// Parameter equality (revision ignored).
  bool operator==(const Network& other) const { return layers_ == other.layers_; }

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t revision_ = 0;
};

/// Activations cached by `forward`: values[0] is the input, values[k+1] the output of layer k.
struct Tape {
  std::uint64_t revision = 0;
  std::vector<std::vector<double>> values;
};

struct ForwardResult {
  std::vector<double> output;
  Tape tape;
};

/// Per-parameter partials, shape-congruent with a Network, plus dL/dx.
struct Gradient {
  struct Layer {
    std::vector<double> weights;
    std::vector<double> bias;
  };
  std::vector<Layer> layers;
  std::vector<double> input;

  static Gradient zeros_like(const Network& net);
  /// Element-wise sum of parameter partials; `input` is left untouched.
  void accumulate(const Gradient& other);
  void scale(double factor);
  double squared_norm() const;
  bool all_finite() const;
};

/// Throws ShapeError on dimension mismatch and NumericError on non-finite input.
ForwardResult forward(const Network& net, std::span<const double> x);
/// Same output as `forward` without recording a tape.
std::vector<double> predict(const Network& net, std::span<const double> x);

/// Exact gradient of L given dL/dy; ContractViolation if `tape` was not
/// recorded by `forward` on this network's current parameters.
Gradient backward(const Network& net, const Tape& tape, std::span<const double> dL_dy);

/// p <- p - lr * g(p) for every parameter. Throws NumericError (network left
/// unchanged) on a non-finite gradient and ShapeError on incongruent shapes.
void apply_sgd(Network& net, const Gradient& grad, double lr);
Network sgd_step(const Network& net, const Gradient& grad, double lr);

struct LossValue {
  double loss = 0;
  double gradient = 0;  ///< dL/dpred
};

/// |pred - truth| / max(truth, floor) and its (sub)gradient; 0 at pred == truth.
LossValue relative_error_loss(double pred, double truth, double floor);
/// ((pred - truth) / max(truth, floor))^2, the squared alternative.
LossValue squared_relative_error_loss(double pred, double truth, double floor);

/// Versioned little-endian binary dump of shapes and parameters; bit-exact round trip.
void save_network(std::ostream& out, const Network& net);
Network load_network(std::istream& in);

}  // namespace qstate
