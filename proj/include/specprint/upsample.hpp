#pragma once

#include <optional>

#include "specprint/conv.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

enum class UpsampleKind { nearest, bilinear, deconv };

/// Fixed 2x2 all-ones kernel (anchor 0).
Matrix nearest_kernel();
/// Fixed 3x3 [[1/4,1/2,1/4],[1/2,1,1/2],[1/4,1/2,1/4]] kernel (anchor 1).
Matrix bilinear_kernel();

/// Upsampling = zero interleave followed by a convolution with K_up. Interpolating modes
/// use the fixed kernels channel-wise; deconv carries a learnable kernel bank.
struct UpsampleMode {
  UpsampleKind kind = UpsampleKind::nearest;
  std::optional<ConvKernel> deconv;

  static UpsampleMode nearest() { return {UpsampleKind::nearest, std::nullopt}; }
  static UpsampleMode bilinear() { return {UpsampleKind::bilinear, std::nullopt}; }
  static UpsampleMode deconvolution(ConvKernel kernel) {
    return {UpsampleKind::deconv, std::move(kernel)};
  }
};

/// out(2x, 2y) = in(x, y); zero wherever either index is odd.
Tensor3 zero_interleave(const Tensor3& x);
/// Adjoint of zero_interleave: picks the even-index samples.
Tensor3 zero_interleave_adjoint(const Tensor3& g);

/// 2M x 2N tiling: F'(u + M, v) = F'(u, v + N) = F'(u + M, v + N) = F(u, v).
Spectrum2 spectrum_repeat(const Spectrum2& f);

/// zero_interleave then zero-same convolution with K_up.
Tensor3 upsample(const Tensor3& x, const UpsampleMode& mode);

/// Same pipeline with circular boundaries, the periodic variant that the frequency form
/// describes exactly.
Tensor3 upsample_circular(const Tensor3& x, const UpsampleMode& mode);

/// Zero-same pipeline on the input extended by one repeated row and column, so the
/// interpolating kernels never read zeros past the last sample (edge clamping, as
/// framework interpolation does). Deconv falls back to upsample().
Tensor3 upsample_clamped(const Tensor3& x, const UpsampleMode& mode);

/// spectrum_repeat(F) times the transfer function of the single-channel K_up on the
/// 2M x 2N lattice. Equals dft2 of upsample_circular on a one-channel input.
Spectrum2 upsample_spectrum(const Spectrum2& f, const Matrix& k_up);

/// The K_up a mode applies, for single-channel analysis. Deconv requires a 1 -> 1 bank.
Matrix upsample_kernel(const UpsampleMode& mode);

}  // namespace specprint
