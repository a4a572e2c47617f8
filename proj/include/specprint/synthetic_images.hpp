#pragma once

#include <cstddef>

#include "specprint/rng.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

/// Exponent range used when natural-image exponents are drawn at random.
inline constexpr double kPowerLawExponentMin = 0.5;
inline constexpr double kPowerLawExponentMax = 3.5;

/// 1 / (|f_x|^a + |f_y|^b) on the unshifted lattice, f measured as the circular
/// distance from DC. The DC bin (undefined) is set to 0.
Matrix power_law_envelope(std::size_t rows, std::size_t cols, double a, double b);

/// Image whose spectrum magnitude is the power-law envelope with uniformly random,
/// conjugate-symmetric phases. Min-max scaled to [0, 1]. Throws on a, b <= 0.
Matrix power_law_image(std::size_t rows, std::size_t cols, double a, double b, Rng& rng);

/// Draws a, b uniformly from [0.5, 3.5] and returns a power-law image.
Matrix random_power_law_image(std::size_t rows, std::size_t cols, Rng& rng);

/// Colour image in [0, 1]: a shared power-law luminance field mixed with weaker
/// independent per-channel fields.
Tensor3 random_power_law_tensor(std::size_t channels, std::size_t rows, std::size_t cols,
                                Rng& rng);

/// i.i.d. N(0, sigma^2) image.
Matrix white_noise_image(std::size_t rows, std::size_t cols, double sigma, Rng& rng);

}  // namespace specprint
