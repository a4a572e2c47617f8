#pragma once

#include <cstddef>
#include <span>

#include "specprint/tensor.hpp"

namespace specprint {

/// In-place 1D DFT of arbitrary length. Powers of two use iterative radix-2, short odd
/// lengths a direct sum, everything else Bluestein's chirp-z. Forward is unnormalized;
/// `inverse` applies the conjugate kernel and the 1/n factor.
void fft_inplace(std::span<Complex> data, bool inverse);

/// F(u,v) = sum_x sum_y f(x,y) exp(-i 2 pi (u x / M + v y / N)). Unnormalized.
Spectrum2 dft2(const Matrix& x);
Spectrum2 dft2(const Spectrum2& x);

/// Inverse with 1/(MN). Complex result.
Spectrum2 idft2_complex(const Spectrum2& f);

struct RealInverse {
  Matrix values;
  /// Largest |imag| discarded when taking the real part.
  double imag_residue = 0.0;
};

RealInverse idft2_checked(const Spectrum2& f);
/// Real part of the inverse transform.
Matrix idft2(const Spectrum2& f);

Matrix magnitude(const Spectrum2& f);
/// log(1 + |F|) per bin.
Matrix log_magnitude(const Spectrum2& f);
Spectrum2 multiply(const Spectrum2& a, const Spectrum2& b);

/// Quadrant swap for display: out(u,v) = in((u + ceil(M/2)) mod M, (v + ceil(N/2)) mod N).
Matrix fftshift_view(const Matrix& m);

/// Places `x` at the top-left of a rows x cols zero matrix.
Matrix zero_pad(const Matrix& x, std::size_t rows, std::size_t cols);

/// Circular (wrap-around) distance of frequency index u from DC on an n-point axis.
inline std::size_t min_image(std::size_t u, std::size_t n) { return u <= n - u ? u : n - u; }

}  // namespace specprint
