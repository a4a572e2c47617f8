#include "specprint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specprint/error.hpp"

namespace specprint {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw DataError("matrix data length does not match dims");
}

double Matrix::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width, double fill)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width,
                 std::vector<double> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != channels * height * width)
    throw DataError("tensor data length does not match dims");
}

Tensor3 Tensor3::from_matrix(const Matrix& m) {
  return Tensor3(1, m.rows(), m.cols(), m.storage());
}

Matrix Tensor3::channel(std::size_t c) const {
  auto p = plane(c);
  return Matrix(height_, width_, std::vector<double>(p.begin(), p.end()));
}

void Tensor3::set_channel(std::size_t c, const Matrix& m) {
  if (m.rows() != height_ || m.cols() != width_) throw DataError("channel shape mismatch");
  std::copy(m.storage().begin(), m.storage().end(), plane(c).begin());
}

Matrix Tensor3::channel_mean() const {
  Matrix out(height_, width_);
  if (channels_ == 0) return out;
  auto dst = out.values();
  for (std::size_t c = 0; c < channels_; ++c) {
    auto src = plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  const double inv = 1.0 / static_cast<double>(channels_);
  for (double& v : dst) v *= inv;
  return out;
}

bool Tensor3::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Spectrum2::Spectrum2(std::size_t height, std::size_t width, Complex fill)
    : height_(height), width_(width), data_(height * width, fill) {}

Spectrum2& Spectrum2::operator+=(const Spectrum2& o) {
  if (o.height_ != height_ || o.width_ != width_) throw DataError("spectrum shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Spectrum2& Spectrum2::operator*=(Complex s) {
  for (auto& v : data_) v *= s;
  return *this;
}

namespace {
template <typename A, typename B>
double max_abs_diff_span(std::span<A> a, std::span<B> b) {
  if (a.size() != b.size()) throw DataError("size mismatch in max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}
}  // namespace

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DataError("shape mismatch");
  return max_abs_diff_span(a.values(), b.values());
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  if (!a.same_shape(b)) throw DataError("shape mismatch");
  return max_abs_diff_span(a.values(), b.values());
}

double max_abs_diff(const Spectrum2& a, const Spectrum2& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw DataError("shape mismatch");
  return max_abs_diff_span(a.values(), b.values());
}

}  // namespace specprint
