#pragma once

// Central finite-difference check of Sequential::backward against a linear probe loss.

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "specprint/nn.hpp"

namespace gradcheck {

using specprint::nn::Batch;
using specprint::nn::Mode;
using specprint::nn::Sequential;

inline bool close(double analytic, double numeric, double* rel = nullptr) {
  const double err = std::abs(analytic - numeric);
  const double r = err / std::max({std::abs(analytic), std::abs(numeric), 1e-300});
  if (rel) *rel = err <= 1e-7 ? 0.0 : r;
  return err <= 1e-7 || r < 1e-4;
}

struct Result {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;  ///< worst relative error among entries above the absolute floor
  double worst_abs = 0.0;
  double worst_rel_large = 0.0;  ///< worst relative error among gradients of magnitude >= 1e-3

  void add(double analytic, double numeric) {
    double rel = 0.0;
    ++checked;
    if (!close(analytic, numeric, &rel)) ++failures;
    worst_rel = std::max(worst_rel, rel);
    const double err = std::abs(analytic - numeric);
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    worst_abs = std::max(worst_abs, err);
    if (mag >= 1e-3) worst_rel_large = std::max(worst_rel_large, err / mag);
  }
};

/// Loss <w, f(x)> with fixed random w, so dL/d(output) = w. Checks every parameter and,
/// if `inputs` is set, every input entry.
inline Result run(Sequential net, const Batch& input, specprint::Rng& rng, bool inputs = true) {
  Batch weights;
  for (const auto& t : net.forward(input, Mode::train))
    weights.push_back(oracle::random_tensor(t.channels(), t.height(), t.width(), rng));
  auto loss = [&](const Batch& out) {
    double s = 0.0;
    for (std::size_t n = 0; n < out.size(); ++n)
      for (std::size_t i = 0; i < out[n].size(); ++i) s += weights[n].values()[i] * out[n].values()[i];
    return s;
  };

  const auto tape = net.forward_train(input);
  Batch grad_in;
  const std::vector<double> grad = net.backward(tape, weights, &grad_in);

  Result res;
  auto record = [&](double a, double n) { res.add(a, n); };

  const double h = 1e-5;
  std::vector<double> theta = net.get_parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + h;
    net.set_parameters(theta);
    const double up = loss(net.forward(input, Mode::train));
    theta[i] = keep - h;
    net.set_parameters(theta);
    const double down = loss(net.forward(input, Mode::train));
    theta[i] = keep;
    net.set_parameters(theta);
    record(grad[i], (up - down) / (2 * h));
  }
  if (inputs) {
    Batch x = input;
    for (std::size_t n = 0; n < x.size(); ++n)
      for (std::size_t i = 0; i < x[n].size(); ++i) {
        double& v = x[n].values()[i];
        const double keep = v;
        v = keep + h;
        const double up = loss(net.forward(x, Mode::train));
        v = keep - h;
        const double down = loss(net.forward(x, Mode::train));
        v = keep;
        record(grad_in[n].values()[i], (up - down) / (2 * h));
      }
  }
  return res;
}

}  // namespace gradcheck
