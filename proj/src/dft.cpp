#include "specprint/dft.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <vector>

#include "specprint/error.hpp"

namespace specprint {
namespace {

constexpr std::size_t kDirectLimit = 64;

class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    twiddle_.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) /
                                        static_cast<double>(n));
    if (std::has_single_bit(n)) {
      kind_ = Kind::radix2;
    } else if (n <= kDirectLimit) {
      kind_ = Kind::direct;
    } else {
      kind_ = Kind::bluestein;
      init_bluestein();
    }
  }

  void run(std::span<Complex> data, bool inverse) const {
    switch (kind_) {
      case Kind::radix2: radix2(data, inverse); break;
      case Kind::direct: direct(data, inverse); break;
      case Kind::bluestein: bluestein(data, inverse); break;
    }
    if (inverse) {
      const double s = 1.0 / static_cast<double>(n_);
      for (auto& v : data) v *= s;
    }
  }

 private:
  enum class Kind { radix2, direct, bluestein };

  Complex tw(std::size_t k, bool inverse) const {
    const Complex w = twiddle_[k % n_];
    return inverse ? std::conj(w) : w;
  }

  void radix2(std::span<Complex> a, bool inverse) const {
    const std::size_t n = n_;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
      std::size_t bit = n >> 1U;
      for (; j & bit; bit >>= 1U) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1U) {
      const std::size_t half = len / 2;
      const std::size_t step = n / len;
      for (std::size_t i = 0; i < n; i += len) {
        for (std::size_t k = 0; k < half; ++k) {
          const Complex w = tw(k * step, inverse);
          const Complex u = a[i + k];
          const Complex v = a[i + k + half] * w;
          a[i + k] = u + v;
          a[i + k + half] = u - v;
        }
      }
    }
  }

  void direct(std::span<Complex> a, bool inverse) const {
    std::vector<Complex> out(n_);
    for (std::size_t u = 0; u < n_; ++u) {
      Complex acc{};
      for (std::size_t x = 0; x < n_; ++x) acc += a[x] * tw(u * x, inverse);
      out[u] = acc;
    }
    std::copy(out.begin(), out.end(), a.begin());
  }

  void init_bluestein() {
    m_ = std::bit_ceil(2 * n_ - 1);
    chirp_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      // exp(-i pi k^2 / n); reduce k^2 mod 2n for accuracy.
      const std::size_t k2 = (k * k) % (2 * n_);
      chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) /
                                      static_cast<double>(n_));
    }
    sub_ = std::make_unique<FftPlan>(m_);
    chirp_fwd_.assign(m_, Complex{});
    chirp_inv_.assign(m_, Complex{});
    for (std::size_t k = 0; k < n_; ++k) {
      chirp_fwd_[k] = std::conj(chirp_[k]);
      chirp_inv_[k] = chirp_[k];
      if (k != 0) {
        chirp_fwd_[m_ - k] = std::conj(chirp_[k]);
        chirp_inv_[m_ - k] = chirp_[k];
      }
    }
    sub_->run(chirp_fwd_, false);
    sub_->run(chirp_inv_, false);
  }

  void bluestein(std::span<Complex> a, bool inverse) const {
    std::vector<Complex> buf(m_, Complex{});
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      buf[k] = a[k] * c;
    }
    sub_->run(buf, false);
    const auto& kernel = inverse ? chirp_inv_ : chirp_fwd_;
    for (std::size_t k = 0; k < m_; ++k) buf[k] *= kernel[k];
    sub_->run(buf, true);
    for (std::size_t k = 0; k < n_; ++k) {
      const Complex c = inverse ? std::conj(chirp_[k]) : chirp_[k];
      a[k] = buf[k] * c;
    }
  }

  std::size_t n_;
  Kind kind_ = Kind::direct;
  std::vector<Complex> twiddle_;
  std::size_t m_ = 0;
  std::vector<Complex> chirp_;
  std::vector<Complex> chirp_fwd_;
  std::vector<Complex> chirp_inv_;
  std::unique_ptr<FftPlan> sub_;
};

const FftPlan& plan_for(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<FftPlan>> cache;
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftPlan>(n);
  return *slot;
}

void transform2(Spectrum2& s, bool inverse) {
  const std::size_t rows = s.height();
  const std::size_t cols = s.width();
  const FftPlan& row_plan = plan_for(cols);
  for (std::size_t r = 0; r < rows; ++r) row_plan.run(s.values().subspan(r * cols, cols), inverse);
  const FftPlan& col_plan = plan_for(rows);
  std::vector<Complex> column(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = s(r, c);
    col_plan.run(column, inverse);
    for (std::size_t r = 0; r < rows; ++r) s(r, c) = column[r];
  }
}

}  // namespace

void fft_inplace(std::span<Complex> data, bool inverse) {
  if (data.empty()) throw DataError("fft of empty sequence");
  plan_for(data.size()).run(data, inverse);
}

Spectrum2 dft2(const Matrix& x) {
  if (x.empty()) throw DataError("dft2 of empty matrix");
  Spectrum2 s(x.rows(), x.cols());
  auto dst = s.values();
  auto src = x.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = Complex(src[i], 0.0);
  transform2(s, false);
  return s;
}

Spectrum2 dft2(const Spectrum2& x) {
  if (x.size() == 0) throw DataError("dft2 of empty spectrum");
  Spectrum2 s = x;
  transform2(s, false);
  return s;
}

Spectrum2 idft2_complex(const Spectrum2& f) {
  if (f.size() == 0) throw DataError("idft2 of empty spectrum");
  Spectrum2 s = f;
  transform2(s, true);
  return s;
}

RealInverse idft2_checked(const Spectrum2& f) {
  const Spectrum2 s = idft2_complex(f);
  RealInverse out{Matrix(s.height(), s.width()), 0.0};
  auto dst = out.values.values();
  auto src = s.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i].real();
    out.imag_residue = std::max(out.imag_residue, std::abs(src[i].imag()));
  }
  return out;
}

Matrix idft2(const Spectrum2& f) { return idft2_checked(f).values; }

Matrix magnitude(const Spectrum2& f) {
  Matrix m(f.height(), f.width());
  auto dst = m.values();
  auto src = f.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
  return m;
}

Matrix log_magnitude(const Spectrum2& f) {
  Matrix m = magnitude(f);
  for (double& v : m.values()) v = std::log1p(v);
  return m;
}

Spectrum2 multiply(const Spectrum2& a, const Spectrum2& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw DataError("spectrum shape mismatch");
  Spectrum2 out(a.height(), a.width());
  for (std::size_t i = 0; i < a.size(); ++i) out.values()[i] = a.values()[i] * b.values()[i];
  return out;
}

Matrix fftshift_view(const Matrix& m) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  Matrix out(rows, cols);
  const std::size_t sr = (rows + 1) / 2;
  const std::size_t sc = (cols + 1) / 2;
  for (std::size_t u = 0; u < rows; ++u)
    for (std::size_t v = 0; v < cols; ++v) out(u, v) = m((u + sr) % rows, (v + sc) % cols);
  return out;
}

Matrix zero_pad(const Matrix& x, std::size_t rows, std::size_t cols) {
  if (rows < x.rows() || cols < x.cols())
    throw DataError("zero_pad target " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " is smaller than source " + std::to_string(x.rows()) + "x" +
                    std::to_string(x.cols()));
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c);
  return out;
}

}  // namespace specprint
