#pragma once

// Central finite differences against the analytic gradients of a network
// and of the chained representation model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "qstate/model.hpp"
#include "qstate/nn.hpp"

namespace qstate::testing {

struct FdReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst = 0;  ///< largest |a - n| / (rel * max(|a|, |n|) + abs); <= 1 passes
};

inline void fd_compare(FdReport& r, double analytic, double numeric, double rel, double abs) {
  const double allowed = rel * std::max(std::abs(analytic), std::abs(numeric)) + abs;
  const double ratio = std::abs(analytic - numeric) / allowed;
  ++r.checked;
  if (!(ratio <= 1.0)) ++r.failed;
  r.worst = std::max(r.worst, std::isfinite(ratio) ? ratio : 1e300);
}

/// Perturbs every weight and bias of `net` in turn; `loss` is re-evaluated on the perturbed copy.
inline void fd_network(FdReport& r, Network& net, const std::vector<Gradient::Layer>& analytic,
                       const std::function<double()>& loss, double h, double rel, double abs) {
  for (std::size_t k = 0; k < net.layers().size(); ++k) {
    for (int which = 0; which < 2; ++which) {
      const std::size_t n = which == 0 ? net.layers()[k].weights.size() : net.layers()[k].bias.size();
      for (std::size_t i = 0; i < n; ++i) {
        auto param = [&]() -> double& {
          auto& layer = net.mutable_layers()[k];
          return which == 0 ? layer.weights[i] : layer.bias[i];
        };
        const double orig = param();
        param() = orig + h;
        const double up = loss();
        param() = orig - h;
        const double down = loss();
        param() = orig;
        const double a = which == 0 ? analytic[k].weights[i] : analytic[k].bias[i];
        fd_compare(r, a, (up - down) / (2 * h), rel, abs);
      }
    }
  }
}

/// L = c . net(x); checks all parameter partials and dL/dx.
inline FdReport check_network(Network net, std::span<const double> x, std::span<const double> c, double h,
                              double rel, double abs) {
  auto fwd = forward(net, x);
  auto g = backward(net, fwd.tape, c);
  auto loss = [&](std::span<const double> in) {
    auto y = predict(net, in);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += c[i] * y[i];
    return s;
  };
  FdReport r;
  std::vector<double> xin(x.begin(), x.end());
  fd_network(r, net, g.layers, [&] { return loss(xin); }, h, rel, abs);
  for (std::size_t i = 0; i < xin.size(); ++i) {
    const double orig = xin[i];
    xin[i] = orig + h;
    const double up = loss(xin);
    xin[i] = orig - h;
    const double down = loss(xin);
    xin[i] = orig;
    fd_compare(r, g.input[i], (up - down) / (2 * h), rel, abs);
  }
  return r;
}

/// Summed relative-error loss of every stage of `ex`, recomputed from scratch.
inline double model_loss(const RepresentationModel& m, const DatabaseVector& x0, const SequenceExample& ex,
                         double floor) {
  auto preds = predict_sequence(m, x0, ex.actions, ex.scales);
  double s = 0;
  for (std::size_t t = 0; t < preds.size(); ++t) s += relative_error_loss(preds[t], ex.labels[t], floor).loss;
  return s;
}

/// combined_gradient against finite differences over nn_init, nn_st and nn_observed.
inline FdReport check_model(RepresentationModel m, const DatabaseVector& x0, const SequenceExample& ex, double floor,
                            double h, double rel, double abs) {
  auto g = combined_gradient(m, x0, ex, floor);
  auto loss = [&] { return model_loss(m, x0, ex, floor); };
  FdReport r;
  fd_network(r, m.nn_init(), g.init.layers, loss, h, rel, abs);
  fd_network(r, m.nn_st(), g.st.layers, loss, h, rel, abs);
  fd_network(r, m.nn_observed(), g.obs.layers, loss, h, rel, abs);
  return r;
}

}  // namespace qstate::testing
