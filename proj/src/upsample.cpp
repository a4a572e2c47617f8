#include "specprint/upsample.hpp"

#include <algorithm>

#include "specprint/dft.hpp"
#include "specprint/error.hpp"

namespace specprint {

Matrix nearest_kernel() { return Matrix(2, 2, 1.0); }

Matrix bilinear_kernel() {
  return Matrix(3, 3, {0.25, 0.5, 0.25, 0.5, 1.0, 0.5, 0.25, 0.5, 0.25});
}

Tensor3 zero_interleave(const Tensor3& x) {
  Tensor3 out(x.channels(), 2 * x.height(), 2 * x.width());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y < x.height(); ++y)
      for (std::size_t z = 0; z < x.width(); ++z) out.at(c, 2 * y, 2 * z) = x.at(c, y, z);
  return out;
}

Tensor3 zero_interleave_adjoint(const Tensor3& g) {
  Tensor3 out(g.channels(), g.height() / 2, g.width() / 2);
  for (std::size_t c = 0; c < out.channels(); ++c)
    for (std::size_t y = 0; y < out.height(); ++y)
      for (std::size_t z = 0; z < out.width(); ++z) out.at(c, y, z) = g.at(c, 2 * y, 2 * z);
  return out;
}

Spectrum2 spectrum_repeat(const Spectrum2& f) {
  const std::size_t m = f.height();
  const std::size_t n = f.width();
  Spectrum2 out(2 * m, 2 * n);
  for (std::size_t u = 0; u < 2 * m; ++u)
    for (std::size_t v = 0; v < 2 * n; ++v) out(u, v) = f(u % m, v % n);
  return out;
}

Matrix upsample_kernel(const UpsampleMode& mode) {
  switch (mode.kind) {
    case UpsampleKind::nearest: return nearest_kernel();
    case UpsampleKind::bilinear: return bilinear_kernel();
    case UpsampleKind::deconv:
      if (!mode.deconv || mode.deconv->in_channels() != 1 || mode.deconv->out_channels() != 1)
        throw DataError("single-channel analysis needs a 1 -> 1 deconvolution kernel");
      return mode.deconv->slice_matrix(0, 0);
  }
  return {};
}

Tensor3 upsample(const Tensor3& x, const UpsampleMode& mode) {
  const Tensor3 z = zero_interleave(x);
  if (mode.kind == UpsampleKind::deconv) {
    if (!mode.deconv) throw DataError("deconv upsampling without a kernel");
    return conv2_spatial(z, *mode.deconv, PaddingMode::zero_same);
  }
  return conv2_depthwise(z, upsample_kernel(mode));
}

Tensor3 upsample_circular(const Tensor3& x, const UpsampleMode& mode) {
  const Tensor3 z = zero_interleave(x);
  if (mode.kind == UpsampleKind::deconv) {
    if (!mode.deconv) throw DataError("deconv upsampling without a kernel");
    return conv2_spatial(z, *mode.deconv, PaddingMode::circular);
  }
  const ConvKernel single = ConvKernel::from_matrix(upsample_kernel(mode));
  Tensor3 out(x.channels(), z.height(), z.width());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const Tensor3 plane = Tensor3::from_matrix(z.channel(c));
    out.set_channel(c, conv2_spatial(plane, single, PaddingMode::circular).channel(0));
  }
  return out;
}

Spectrum2 upsample_spectrum(const Spectrum2& f, const Matrix& k_up) {
  const Spectrum2 rep = spectrum_repeat(f);
  return multiply(rep, kernel_transfer(k_up, rep.height(), rep.width()));
}

Tensor3 upsample_clamped(const Tensor3& x, const UpsampleMode& mode) {
  if (mode.kind == UpsampleKind::deconv) return upsample(x, mode);
  const std::size_t h = x.height(), w = x.width();
  Tensor3 padded(x.channels(), h + 1, w + 1);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y <= h; ++y)
      for (std::size_t q = 0; q <= w; ++q) padded.at(c, y, q) = x.at(c, std::min(y, h - 1), std::min(q, w - 1));
  const Tensor3 up = upsample(padded, mode);
  Tensor3 out(x.channels(), 2 * h, 2 * w);
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (std::size_t y = 0; y < 2 * h; ++y)
      for (std::size_t q = 0; q < 2 * w; ++q) out.at(c, y, q) = up.at(c, y, q);
  return out;
}

}  // namespace specprint
