#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "specprint/rng.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

enum class PaddingMode {
  zero_same,  ///< zero padding, output H x W
  valid,      ///< no padding, output (H - k + 1) x (W - k + 1)
  circular,   ///< periodic boundary, output H x W
};

/// Square convolution kernel bank, weights laid out [out][in][ky][kx].
///
/// Convolution is true (flipped) convolution anchored at (k - 1) / 2:
///   same(o, p, q) = bias[o] + sum_i sum_{a,b} K(o, i, a, b) x(i, p - a + anchor, q - b + anchor).
/// For odd k this is the usual centred kernel; the 2x2 nearest-upsampling kernel gets
/// anchor 0 and the 4x4 stride-2 deconvolution kernel anchor 1.
class ConvKernel {
 public:
  ConvKernel() = default;
  ConvKernel(std::size_t in_channels, std::size_t out_channels, std::size_t size);

  /// Uniform in +-1/sqrt(fan_in) for weights and biases.
  static ConvKernel random(std::size_t in_channels, std::size_t out_channels, std::size_t size,
                           Rng& rng);
  /// Single 2D kernel as a 1 -> 1 bank.
  static ConvKernel from_matrix(const Matrix& m);
  /// C -> C bank with 1 at the anchor of every (c, c) slice.
  static ConvKernel identity(std::size_t channels, std::size_t size);

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t size() const { return k_; }
  std::size_t anchor() const { return (k_ - 1) / 2; }

  double& w(std::size_t o, std::size_t i, std::size_t a, std::size_t b) {
    return weights_[((o * in_ + i) * k_ + a) * k_ + b];
  }
  double w(std::size_t o, std::size_t i, std::size_t a, std::size_t b) const {
    return weights_[((o * in_ + i) * k_ + a) * k_ + b];
  }
  std::span<const double> slice(std::size_t o, std::size_t i) const {
    return {weights_.data() + (o * in_ + i) * k_ * k_, k_ * k_};
  }
  Matrix slice_matrix(std::size_t o, std::size_t i) const;

  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::size_t k_ = 0;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

/// Direct spatial convolution, stride 1.
Tensor3 conv2_spatial(const Tensor3& x, const ConvKernel& kernel,
                      PaddingMode padding = PaddingMode::zero_same);

/// Same result through the DFT. Linear modes pad both operands to (H + k - 1, W + k - 1),
/// multiply spectra, sum over input channels and crop; circular mode works on the
/// H x W lattice with the kernel wrapped around its anchor.
Tensor3 conv2_via_dft(const Tensor3& x, const ConvKernel& kernel,
                      PaddingMode padding = PaddingMode::zero_same);

/// Gradients of a zero-same convolution given dL/d(output).
struct ConvGrads {
  Tensor3 input;
  std::vector<double> weights;
  std::vector<double> bias;
};
ConvGrads conv2_backward(const Tensor3& x, const ConvKernel& kernel, const Tensor3& grad_out);

/// Applies one 2D kernel to every channel independently (zero-same, anchored as above).
Tensor3 conv2_depthwise(const Tensor3& x, const Matrix& kernel);
/// Adjoint of conv2_depthwise.
Tensor3 conv2_depthwise_backward(const Tensor3& grad_out, const Matrix& kernel);

/// DFT of a 2D kernel placed on a rows x cols lattice with its anchor at the origin, i.e.
/// the transfer function of the circular convolution.
Spectrum2 kernel_transfer(const Matrix& kernel, std::size_t rows, std::size_t cols);

}  // namespace specprint
