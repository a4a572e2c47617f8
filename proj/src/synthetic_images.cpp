#include "specprint/synthetic_images.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specprint/dft.hpp"
#include "specprint/error.hpp"

namespace specprint {
namespace {

void min_max_scale(std::span<double> v) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  if (span <= 0.0) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  for (double& x : v) x = (x - lo) / span;
}

}  // namespace

Matrix power_law_envelope(std::size_t rows, std::size_t cols, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DataError("power-law exponents must be positive");
  Matrix env(rows, cols);
  for (std::size_t u = 0; u < rows; ++u) {
    const double fx = static_cast<double>(min_image(u, rows));
    for (std::size_t v = 0; v < cols; ++v) {
      const double fy = static_cast<double>(min_image(v, cols));
      const double denom = std::pow(fx, a) + std::pow(fy, b);
      env(u, v) = denom > 0.0 ? 1.0 / denom : 0.0;
    }
  }
  return env;
}

Matrix power_law_image(std::size_t rows, std::size_t cols, double a, double b, Rng& rng) {
  const Matrix env = power_law_envelope(rows, cols, a, b);
  Spectrum2 spec(rows, cols);
  // Bins are visited in row-major order; a bin's phase is drawn when it is reached before
  // its conjugate mirror, so the result is exactly Hermitian.
  for (std::size_t u = 0; u < rows; ++u) {
    for (std::size_t v = 0; v < cols; ++v) {
      const std::size_t mu = (rows - u) % rows;
      const std::size_t mv = (cols - v) % cols;
      const std::size_t self = u * cols + v;
      const std::size_t mirror = mu * cols + mv;
      if (mirror < self) {
        spec(u, v) = std::conj(spec(mu, mv));
      } else if (mirror == self) {
        spec(u, v) = Complex(rng.uniform() < 0.5 ? -env(u, v) : env(u, v), 0.0);
      } else {
        spec(u, v) = std::polar(env(u, v), 2.0 * std::numbers::pi * rng.uniform());
      }
    }
  }
  Matrix img = idft2(spec);
  min_max_scale(img.values());
  return img;
}

Matrix random_power_law_image(std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = rng.uniform(kPowerLawExponentMin, kPowerLawExponentMax);
  const double b = rng.uniform(kPowerLawExponentMin, kPowerLawExponentMax);
  return power_law_image(rows, cols, a, b, rng);
}

Tensor3 random_power_law_tensor(std::size_t channels, std::size_t rows, std::size_t cols,
                                Rng& rng) {
  constexpr double kShared = 0.8;
  const Matrix shared = random_power_law_image(rows, cols, rng);
  Tensor3 out(channels, rows, cols);
  for (std::size_t c = 0; c < channels; ++c) {
    const Matrix own = random_power_law_image(rows, cols, rng);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < dst.size(); ++i)
      dst[i] = kShared * shared.storage()[i] + (1.0 - kShared) * own.storage()[i];
  }
  return out;
}

Matrix white_noise_image(std::size_t rows, std::size_t cols, double sigma, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = sigma * rng.normal();
  return m;
}

}  // namespace specprint
