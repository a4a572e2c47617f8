#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace specprint {

using Complex = std::complex<double>;

/// Dense row-major real matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double sum() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// C x H x W real feature map, channel-outer row-major.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

  static Tensor3 from_matrix(const Matrix& m);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t plane_size() const { return height_ * width_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * height_ + y) * width_ + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<double> plane(std::size_t c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(std::size_t c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  Matrix channel(std::size_t c) const;
  void set_channel(std::size_t c, const Matrix& m);
  /// Mean over channels as a single matrix.
  Matrix channel_mean() const;

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;
  bool same_shape(const Tensor3& o) const {
    return channels_ == o.channels_ && height_ == o.height_ && width_ == o.width_;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Complex 2D spectrum in unshifted layout: DC at (0, 0).
class Spectrum2 {
 public:
  Spectrum2() = default;
  Spectrum2(std::size_t height, std::size_t width, Complex fill = {});

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  Complex& operator()(std::size_t u, std::size_t v) { return data_[u * width_ + v]; }
  const Complex& operator()(std::size_t u, std::size_t v) const { return data_[u * width_ + v]; }

  std::span<Complex> values() { return data_; }
  std::span<const Complex> values() const { return data_; }

  Spectrum2& operator+=(const Spectrum2& o);
  Spectrum2& operator*=(Complex s);

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Complex> data_;
};

/// Largest absolute elementwise difference; shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);
double max_abs_diff(const Tensor3& a, const Tensor3& b);
double max_abs_diff(const Spectrum2& a, const Spectrum2& b);

}  // namespace specprint
