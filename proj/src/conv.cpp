#include "specprint/conv.hpp"

#include <cmath>
#include <string>

#include "specprint/dft.hpp"
#include "specprint/error.hpp"

namespace specprint {
namespace {

using Index = std::ptrdiff_t;

// dst(p, q) += w * src(p + dy, q + dx) wherever the source index is in range.
void shift_add(std::span<const double> src, Index sh, Index sw, std::span<double> dst, Index dh,
               Index dw, Index dy, Index dx, double w) {
  const Index p0 = std::max<Index>(0, -dy);
  const Index p1 = std::min<Index>(dh, sh - dy);
  const Index q0 = std::max<Index>(0, -dx);
  const Index q1 = std::min<Index>(dw, sw - dx);
  if (p0 >= p1 || q0 >= q1) return;
  for (Index p = p0; p < p1; ++p) {
    const double* s = src.data() + (p + dy) * sw + dx;
    double* d = dst.data() + p * dw;
    for (Index q = q0; q < q1; ++q) d[q] += w * s[q];
  }
}

// sum_{p,q} a(p, q) * b(p + dy, q + dx) over the overlap, both h x w.
double shifted_dot(std::span<const double> a, std::span<const double> b, Index h, Index w,
                   Index dy, Index dx) {
  const Index p0 = std::max<Index>(0, -dy);
  const Index p1 = std::min<Index>(h, h - dy);
  const Index q0 = std::max<Index>(0, -dx);
  const Index q1 = std::min<Index>(w, w - dx);
  double acc = 0.0;
  for (Index p = p0; p < p1; ++p) {
    const double* ra = a.data() + p * w;
    const double* rb = b.data() + (p + dy) * w + dx;
    for (Index q = q0; q < q1; ++q) acc += ra[q] * rb[q];
  }
  return acc;
}

void circular_shift_add(std::span<const double> src, Index h, Index wd, std::span<double> dst,
                        Index dy, Index dx, double w) {
  for (Index p = 0; p < h; ++p) {
    const Index sp = ((p + dy) % h + h) % h;
    for (Index q = 0; q < wd; ++q) {
      const Index sq = ((q + dx) % wd + wd) % wd;
      dst[p * wd + q] += w * src[sp * wd + sq];
    }
  }
}

void check_channels(const Tensor3& x, const ConvKernel& kernel) {
  if (x.channels() != kernel.in_channels())
    throw DataError("channel mismatch: input has " + std::to_string(x.channels()) +
                    " channels, kernel expects " + std::to_string(kernel.in_channels()));
  if (kernel.size() == 0) throw DataError("empty convolution kernel");
}

std::pair<std::size_t, std::size_t> output_dims(const Tensor3& x, const ConvKernel& kernel,
                                                PaddingMode padding) {
  const std::size_t k = kernel.size();
  switch (padding) {
    case PaddingMode::valid:
      if (k > x.height() || k > x.width())
        throw DataError("kernel size " + std::to_string(k) + " exceeds unpadded input " +
                        std::to_string(x.height()) + "x" + std::to_string(x.width()));
      return {x.height() - k + 1, x.width() - k + 1};
    case PaddingMode::circular:
      if (k > x.height() || k > x.width())
        throw DataError("kernel size " + std::to_string(k) + " exceeds periodic input " +
                        std::to_string(x.height()) + "x" + std::to_string(x.width()));
      return {x.height(), x.width()};
    case PaddingMode::zero_same:
      break;
  }
  return {x.height(), x.width()};
}

}  // namespace

ConvKernel::ConvKernel(std::size_t in_channels, std::size_t out_channels, std::size_t size)
    : in_(in_channels),
      out_(out_channels),
      k_(size),
      weights_(in_channels * out_channels * size * size, 0.0),
      bias_(out_channels, 0.0) {
  if (size == 0) throw DataError("kernel size must be >= 1");
}

ConvKernel ConvKernel::random(std::size_t in_channels, std::size_t out_channels,
                              std::size_t size, Rng& rng) {
  ConvKernel k(in_channels, out_channels, size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * size * size));
  for (double& v : k.weights_) v = rng.uniform(-bound, bound);
  for (double& v : k.bias_) v = rng.uniform(-bound, bound);
  return k;
}

ConvKernel ConvKernel::from_matrix(const Matrix& m) {
  if (m.rows() != m.cols()) throw DataError("kernel matrix must be square");
  ConvKernel k(1, 1, m.rows());
  k.weights_ = m.storage();
  return k;
}

ConvKernel ConvKernel::identity(std::size_t channels, std::size_t size) {
  ConvKernel k(channels, channels, size);
  for (std::size_t c = 0; c < channels; ++c) k.w(c, c, k.anchor(), k.anchor()) = 1.0;
  return k;
}

Matrix ConvKernel::slice_matrix(std::size_t o, std::size_t i) const {
  auto s = slice(o, i);
  return Matrix(k_, k_, std::vector<double>(s.begin(), s.end()));
}

Tensor3 conv2_spatial(const Tensor3& x, const ConvKernel& kernel, PaddingMode padding) {
  check_channels(x, kernel);
  const auto [oh, ow] = output_dims(x, kernel, padding);
  const auto k = static_cast<Index>(kernel.size());
  const auto anchor = static_cast<Index>(kernel.anchor());
  const auto h = static_cast<Index>(x.height());
  const auto w = static_cast<Index>(x.width());
  Tensor3 out(kernel.out_channels(), oh, ow);
  for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
    auto dst = out.plane(o);
    std::fill(dst.begin(), dst.end(), kernel.bias()[o]);
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
      auto src = x.plane(i);
      for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
          const double wt = kernel.w(o, i, a, b);
          if (wt == 0.0) continue;
          switch (padding) {
            case PaddingMode::zero_same:
              shift_add(src, h, w, dst, h, w, anchor - a, anchor - b, wt);
              break;
            case PaddingMode::valid:
              shift_add(src, h, w, dst, static_cast<Index>(oh), static_cast<Index>(ow),
                        k - 1 - a, k - 1 - b, wt);
              break;
            case PaddingMode::circular:
              circular_shift_add(src, h, w, dst, anchor - a, anchor - b, wt);
              break;
          }
        }
      }
    }
  }
  return out;
}

Spectrum2 kernel_transfer(const Matrix& kernel, std::size_t rows, std::size_t cols) {
  const std::size_t k = kernel.rows();
  if (k > rows || k > cols) throw DataError("kernel larger than transfer lattice");
  const std::size_t anchor = (k - 1) / 2;
  Matrix placed(rows, cols);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      placed((a + rows - anchor) % rows, (b + cols - anchor) % cols) += kernel(a, b);
  return dft2(placed);
}

Tensor3 conv2_via_dft(const Tensor3& x, const ConvKernel& kernel, PaddingMode padding) {
  check_channels(x, kernel);
  const auto [oh, ow] = output_dims(x, kernel, padding);
  const std::size_t k = kernel.size();

  if (padding == PaddingMode::circular) {
    std::vector<Spectrum2> in_spec;
    for (std::size_t i = 0; i < x.channels(); ++i) in_spec.push_back(dft2(x.channel(i)));
    Tensor3 out(kernel.out_channels(), oh, ow);
    for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
      Spectrum2 acc(x.height(), x.width());
      for (std::size_t i = 0; i < x.channels(); ++i)
        acc += multiply(in_spec[i], kernel_transfer(kernel.slice_matrix(o, i), x.height(),
                                                    x.width()));
      Matrix plane = idft2(acc);
      for (double& v : plane.values()) v += kernel.bias()[o];
      out.set_channel(o, plane);
    }
    return out;
  }

  const std::size_t ph = x.height() + k - 1;
  const std::size_t pw = x.width() + k - 1;
  std::vector<Spectrum2> in_spec;
  for (std::size_t i = 0; i < x.channels(); ++i) in_spec.push_back(dft2(zero_pad(x.channel(i), ph, pw)));
  const std::size_t offset = padding == PaddingMode::valid ? k - 1 : kernel.anchor();
  Tensor3 out(kernel.out_channels(), oh, ow);
  for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
    Spectrum2 acc(ph, pw);
    for (std::size_t i = 0; i < x.channels(); ++i)
      acc += multiply(in_spec[i], dft2(zero_pad(kernel.slice_matrix(o, i), ph, pw)));
    const Matrix full = idft2(acc);
    for (std::size_t p = 0; p < oh; ++p)
      for (std::size_t q = 0; q < ow; ++q)
        out.at(o, p, q) = full(p + offset, q + offset) + kernel.bias()[o];
  }
  return out;
}

ConvGrads conv2_backward(const Tensor3& x, const ConvKernel& kernel, const Tensor3& grad_out) {
  check_channels(x, kernel);
  const auto k = static_cast<Index>(kernel.size());
  const auto anchor = static_cast<Index>(kernel.anchor());
  const auto h = static_cast<Index>(x.height());
  const auto w = static_cast<Index>(x.width());
  ConvGrads g{Tensor3(x.channels(), x.height(), x.width()),
              std::vector<double>(kernel.weights().size(), 0.0),
              std::vector<double>(kernel.out_channels(), 0.0)};
  for (std::size_t o = 0; o < kernel.out_channels(); ++o) {
    auto go = grad_out.plane(o);
    for (double v : go) g.bias[o] += v;
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) {
      auto xi = x.plane(i);
      auto gi = g.input.plane(i);
      for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
          const std::size_t widx = ((o * kernel.in_channels() + i) * kernel.size() + a) *
                                       kernel.size() + b;
          g.weights[widx] += shifted_dot(go, xi, h, w, anchor - a, anchor - b);
          const double wt = kernel.weights()[widx];
          if (wt != 0.0) shift_add(go, h, w, gi, h, w, a - anchor, b - anchor, wt);
        }
      }
    }
  }
  return g;
}

Tensor3 conv2_depthwise(const Tensor3& x, const Matrix& kernel) {
  const auto k = static_cast<Index>(kernel.rows());
  const Index anchor = (k - 1) / 2;
  const auto h = static_cast<Index>(x.height());
  const auto w = static_cast<Index>(x.width());
  Tensor3 out(x.channels(), x.height(), x.width());
  for (std::size_t c = 0; c < x.channels(); ++c)
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b)
        shift_add(x.plane(c), h, w, out.plane(c), h, w, anchor - a, anchor - b, kernel(a, b));
  return out;
}

Tensor3 conv2_depthwise_backward(const Tensor3& grad_out, const Matrix& kernel) {
  const auto k = static_cast<Index>(kernel.rows());
  const Index anchor = (k - 1) / 2;
  const auto h = static_cast<Index>(grad_out.height());
  const auto w = static_cast<Index>(grad_out.width());
  Tensor3 out(grad_out.channels(), grad_out.height(), grad_out.width());
  for (std::size_t c = 0; c < grad_out.channels(); ++c)
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b)
        shift_add(grad_out.plane(c), h, w, out.plane(c), h, w, a - anchor, b - anchor,
                  kernel(a, b));
  return out;
}

}  // namespace specprint
