#pragma once

#include <span>
#include <vector>

#include "specprint/tensor.hpp"

namespace specprint {

enum class NormKind { batch, instance, none };
enum class ActKind { relu, sigmoid, tanh, none };

/// Per-channel affine normalization parameters.
struct NormParams {
  NormKind kind = NormKind::none;
  std::vector<double> gamma;
  std::vector<double> beta;
  double eps = 1e-5;
  /// Batch statistics frozen for inference (batch kind only).
  bool frozen = false;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static NormParams make(NormKind kind, std::size_t channels, double eps = 1e-5);
};

/// Per-channel mean and biased variance.
struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> var;
};

ChannelStats instance_stats(const Tensor3& x);
ChannelStats batch_stats(std::span<const Tensor3> batch);

/// gamma (x - mean) / sqrt(var + eps) + beta with the given statistics.
Tensor3 normalize_with(const Tensor3& x, const NormParams& p, const ChannelStats& stats);

/// Normalizes a batch: batch kind pools statistics over the batch (or uses the frozen
/// ones), instance kind uses each sample's own.
std::vector<Tensor3> normalize(std::span<const Tensor3> batch, const NormParams& p);
Tensor3 normalize(const Tensor3& x, const NormParams& p);

/// Frequency form: gamma (F - mu_F) / sqrt(var + eps) + beta_F where mu_F and beta_F are the
/// transforms of the constants mean and beta, non-zero only at DC (value * M * N).
Spectrum2 normalize_freq(const Spectrum2& f, double gamma, double beta, double mean, double var,
                         double eps);

Tensor3 activate(const Tensor3& x, ActKind kind);
/// Elementwise derivative of the activation evaluated at the pre-activation x.
double activation_derivative(double x, ActKind kind);
double activation_value(double x, ActKind kind);

/// Polynomial ReLU surrogate c0 + c1 x + c2 x^2 used for frequency analysis only.
inline constexpr double kSreluC0 = 0.0;
inline constexpr double kSreluC1 = 0.3;
inline constexpr double kSreluC2 = 0.021;

Matrix srelu_poly(const Matrix& x);
Tensor3 srelu_poly(const Tensor3& x);
/// c0 M N delta + c1 F + (c2 / (M N)) (F circ-conv F). The 1/(MN) comes from the
/// unnormalized forward DFT.
Spectrum2 srelu_freq(const Spectrum2& f);

/// Direct circular convolution of two equally sized spectra, O((MN)^2).
Spectrum2 circular_convolve(const Spectrum2& a, const Spectrum2& b);

}  // namespace specprint
