#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "specprint/conv.hpp"
#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/norm_act.hpp"
#include "specprint/upsample.hpp"

using namespace specprint;

namespace {

ConvKernel random_kernel(std::size_t in, std::size_t out, std::size_t k, Rng& rng) {
  return ConvKernel::random(in, out, k, rng);
}

}  // namespace

TEST_CASE("conv2_spatial: identity kernel and impulse response") {
  Rng rng(1);
  const Tensor3 x = oracle::random_tensor(2, 6, 7, rng);
  const ConvKernel id = ConvKernel::identity(2, 3);
  CHECK(max_abs_diff(conv2_spatial(x, id), x) == 0.0);

  Tensor3 imp(1, 5, 5);
  imp.at(0, 2, 2) = 1.0;
  ConvKernel ones(1, 1, 3);
  for (double& w : ones.weights()) w = 1.0;
  const Tensor3 v = conv2_spatial(imp, ones, PaddingMode::valid);
  REQUIRE(v.height() == 3);
  REQUIRE(v.width() == 3);
  for (double val : v.values()) CHECK(val == 1.0);
}

TEST_CASE("conv2_spatial matches the naive loop in every padding mode") {
  Rng rng(2);
  const Tensor3 x = oracle::random_tensor(2, 5, 5, rng);
  const ConvKernel k = random_kernel(2, 2, 3, rng);
  CHECK(max_abs_diff(conv2_spatial(x, k, PaddingMode::zero_same), oracle::naive_conv(x, k, 0)) < 1e-12);
  CHECK(max_abs_diff(conv2_spatial(x, k, PaddingMode::valid), oracle::naive_conv(x, k, 1)) < 1e-12);
  CHECK(max_abs_diff(conv2_spatial(x, k, PaddingMode::circular), oracle::naive_conv(x, k, 2)) < 1e-12);

  const ConvKernel even = random_kernel(1, 1, 4, rng);
  const Tensor3 y = oracle::random_tensor(1, 7, 6, rng);
  CHECK(max_abs_diff(conv2_spatial(y, even), oracle::naive_conv(y, even, 0)) < 1e-12);
}

TEST_CASE("conv2 errors") {
  Rng rng(3);
  const Tensor3 x = oracle::random_tensor(2, 4, 4, rng);
  CHECK_THROWS_AS(conv2_spatial(x, random_kernel(3, 1, 3, rng)), DataError);
  CHECK_THROWS_AS(conv2_via_dft(x, random_kernel(3, 1, 3, rng)), DataError);
  CHECK_THROWS_AS(conv2_spatial(x, random_kernel(2, 1, 5, rng), PaddingMode::valid), DataError);
}

TEST_CASE("conv2_via_dft agrees with the spatial path") {
  Rng rng(4);
  SUBCASE("single channel 8x8") {
    const Tensor3 x = oracle::random_tensor(1, 8, 8, rng);
    const ConvKernel k = random_kernel(1, 1, 3, rng);
    for (auto mode : {PaddingMode::zero_same, PaddingMode::valid, PaddingMode::circular})
      CHECK(max_abs_diff(conv2_via_dft(x, k, mode), conv2_spatial(x, k, mode)) < 1e-9);
  }
  SUBCASE("delta kernel reproduces input") {
    const Tensor3 x = oracle::random_tensor(1, 9, 6, rng);
    CHECK(max_abs_diff(conv2_via_dft(x, ConvKernel::identity(1, 5)), x) < 1e-10);
  }
  SUBCASE("3 -> 1 channels") {
    const Tensor3 x = oracle::random_tensor(3, 7, 9, rng);
    const ConvKernel k = random_kernel(3, 1, 5, rng);
    CHECK(max_abs_diff(conv2_via_dft(x, k), conv2_spatial(x, k)) < 1e-9);
  }
}

TEST_CASE("conv2_backward is the adjoint of the forward map") {
  // <conv(x), g> is linear in x and in the weights; check both adjoint identities.
  Rng rng(5);
  const Tensor3 x = oracle::random_tensor(2, 6, 5, rng);
  ConvKernel k = random_kernel(2, 3, 3, rng);
  const Tensor3 g = oracle::random_tensor(3, 6, 5, rng);
  const ConvGrads grads = conv2_backward(x, k, g);

  auto inner = [](const Tensor3& a, const Tensor3& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
  };
  ConvKernel nobias = k;
  std::fill(nobias.bias().begin(), nobias.bias().end(), 0.0);
  const double lhs = inner(conv2_spatial(x, nobias), g);
  CHECK(lhs == doctest::Approx(inner(x, grads.input)).epsilon(1e-12));
  double rhs = 0.0;
  for (std::size_t i = 0; i < k.weights().size(); ++i) rhs += k.weights()[i] * grads.weights[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("zero_interleave") {
  Tensor3 one(1, 1, 1);
  one.at(0, 0, 0) = 2.5;
  const Tensor3 z = zero_interleave(one);
  CHECK(z == Tensor3(1, 2, 2, {2.5, 0, 0, 0}));

  Rng rng(6);
  const Tensor3 x = oracle::random_tensor(2, 3, 4, rng);
  const Tensor3 zx = zero_interleave(x);
  double s0 = 0, s1 = 0;
  for (double v : x.values()) s0 += v;
  for (double v : zx.values()) s1 += v;
  CHECK(s0 == doctest::Approx(s1));
  CHECK(zero_interleave_adjoint(zx) == x);
}

TEST_CASE("spectrum replication of zero-interleaved inputs") {
  Rng rng(7);
  const Matrix x = oracle::random_matrix(6, 6, rng);
  const Spectrum2 lhs = dft2(zero_interleave(Tensor3::from_matrix(x)).channel(0));
  const Spectrum2 rhs = spectrum_repeat(dft2(x));
  CHECK(max_abs_diff(lhs, rhs) < 1e-9);

  const Spectrum2 flat(3, 3, Complex(2.0, -1.0));
  const Spectrum2 tiled = spectrum_repeat(flat);
  for (auto v : tiled.values()) CHECK(v == Complex(2.0, -1.0));

  Spectrum2 dc(4, 4);
  dc(0, 0) = Complex(5.0, 0.0);
  const Spectrum2 r = spectrum_repeat(dc);
  CHECK(r(0, 0) == Complex(5.0, 0.0));
  CHECK(r(4, 0) == Complex(5.0, 0.0));
  CHECK(r(0, 4) == Complex(5.0, 0.0));
  CHECK(r(4, 4) == Complex(5.0, 0.0));
  CHECK(r(2, 0) == Complex(0.0, 0.0));
}

TEST_CASE("upsample: nearest equals pixel replication") {
  const Tensor3 x(1, 2, 2, {1, 2, 3, 4});
  const Tensor3 up = upsample(x, UpsampleMode::nearest());
  CHECK(up.channel(0) ==
        Matrix(4, 4, {1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
}

TEST_CASE("upsample: bilinear interior") {
  const Tensor3 c(1, 5, 5, 0.7);
  const Tensor3 up = upsample(c, UpsampleMode::bilinear());
  for (std::size_t r = 0; r + 1 < up.height(); ++r)
    for (std::size_t q = 0; q + 1 < up.width(); ++q)
      CHECK(std::abs(up.at(0, r, q) - 0.7) < 1e-12);

  Rng rng(8);
  const Matrix x = oracle::random_matrix(4, 4, rng);
  const Tensor3 ux = upsample(Tensor3::from_matrix(x), UpsampleMode::bilinear());
  for (std::size_t r = 0; r + 1 < ux.height(); ++r)
    for (std::size_t q = 0; q + 1 < ux.width(); ++q)
      CHECK(std::abs(ux.at(0, r, q) - oracle::separable_bilinear(x, r, q)) < 1e-9);
}

TEST_CASE("upsample: deconv channel mismatch") {
  Rng rng(9);
  const Tensor3 x = oracle::random_tensor(2, 3, 3, rng);
  CHECK_THROWS_AS(upsample(x, UpsampleMode::deconvolution(ConvKernel::random(3, 2, 4, rng))),
                  DataError);
  const Tensor3 ok = upsample(x, UpsampleMode::deconvolution(ConvKernel::random(2, 5, 4, rng)));
  CHECK(ok.channels() == 5);
  CHECK(ok.height() == 6);
}

TEST_CASE("upsample_spectrum") {
  SUBCASE("impulse input gives the kernel spectrum") {
    Matrix imp(4, 4);
    imp(0, 0) = 1.0;
    const Spectrum2 out = upsample_spectrum(dft2(imp), nearest_kernel());
    CHECK(max_abs_diff(out, kernel_transfer(nearest_kernel(), 8, 8)) < 1e-12);
  }
  SUBCASE("nearest transfer vanishes on the new Nyquist lines") {
    // H(u, v) = (1 + e^{-i pi u / M})(1 + e^{-i pi v / M}) on a 2M lattice: zero at u = M.
    const std::size_t m = 4;
    const Spectrum2 h = kernel_transfer(nearest_kernel(), 2 * m, 2 * m);
    for (std::size_t v = 0; v < 2 * m; ++v) {
      CHECK(std::abs(h(m, v)) < 1e-12);
      CHECK(std::abs(h(v, m)) < 1e-12);
    }
    for (std::size_t u = 0; u < 2 * m; ++u)
      for (std::size_t v = 0; v < 2 * m; ++v) {
        const double closed = 4.0 * std::abs(std::cos(M_PI * u / (2.0 * m))) *
                              std::abs(std::cos(M_PI * v / (2.0 * m)));
        CHECK(std::abs(std::abs(h(u, v)) - closed) < 1e-12);
      }
  }
  SUBCASE("matches the circular spatial pipeline") {
    Rng rng(10);
    const Matrix x = oracle::random_matrix(4, 4, rng);
    for (const Matrix& k : {nearest_kernel(), bilinear_kernel(), oracle::random_matrix(4, 4, rng)}) {
      // Circular reference built from the naive loop, not the library upsampler.
      const Tensor3 z = zero_interleave(Tensor3::from_matrix(x));
      const Tensor3 spatial = oracle::naive_conv(z, ConvKernel::from_matrix(k), 2);
      CHECK(max_abs_diff(dft2(spatial.channel(0)), upsample_spectrum(dft2(x), k)) < 1e-9);
    }
  }
}

TEST_CASE("normalize: spatial and frequency forms") {
  Rng rng(11);
  SUBCASE("standardized input passes through") {
    Tensor3 x = oracle::random_tensor(1, 8, 8, rng);
    const ChannelStats s = instance_stats(x);
    for (double& v : x.values()) v = (v - s.mean[0]) / std::sqrt(s.var[0]);
    NormParams p = NormParams::make(NormKind::instance, 1, 1e-12);
    CHECK(max_abs_diff(normalize(x, p), x) < 1e-9);
  }
  SUBCASE("non-DC bins are only scaled") {
    const Matrix x = oracle::random_matrix(8, 8, rng);
    const Spectrum2 f = dft2(x);
    const double gamma = 1.7, beta = -0.3, mean = 0.2, var = 0.5, eps = 1e-5;
    const Spectrum2 g = normalize_freq(f, gamma, beta, mean, var, eps);
    const double scale = gamma / std::sqrt(var + eps);
    for (std::size_t u = 0; u < 8; ++u)
      for (std::size_t v = 0; v < 8; ++v)
        if (u || v) CHECK(std::abs(g(u, v) - scale * f(u, v)) < 1e-12);
  }
  SUBCASE("instance and batch norm: spatial then DFT equals frequency path") {
    for (int trial = 0; trial < 20; ++trial) {
      const Tensor3 x = oracle::random_tensor(2, 8, 8, rng, -2, 3);
      NormParams p = NormParams::make(NormKind::instance, 2);
      p.gamma = {rng.uniform(0.5, 2), rng.uniform(0.5, 2)};
      p.beta = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      const Tensor3 y = normalize(x, p);
      const ChannelStats s = instance_stats(x);
      for (std::size_t c = 0; c < 2; ++c) {
        const Spectrum2 freq = normalize_freq(dft2(x.channel(c)), p.gamma[c], p.beta[c],
                                              s.mean[c], s.var[c], p.eps);
        CHECK(max_abs_diff(dft2(y.channel(c)), freq) < 1e-9);
      }
    }
  }
  SUBCASE("zero variance with eps = 0") {
    const Tensor3 flat(1, 4, 4, 0.5);
    NormParams p = NormParams::make(NormKind::instance, 1, 0.0);
    CHECK_THROWS_AS(normalize(flat, p), DataError);
    CHECK_THROWS_AS(normalize_freq(dft2(flat.channel(0)), 1, 0, 0.5, 0.0, 0.0), DataError);
  }
  SUBCASE("batch statistics pool over the batch") {
    std::vector<Tensor3> batch{oracle::random_tensor(1, 4, 4, rng), oracle::random_tensor(1, 4, 4, rng)};
    NormParams p = NormParams::make(NormKind::batch, 1);
    const auto out = normalize(batch, p);
    double sum = 0, sq = 0;
    for (const auto& t : out)
      for (double v : t.values()) {
        sum += v;
        sq += v * v;
      }
    CHECK(std::abs(sum / 32) < 1e-12);
    CHECK(sq / 32 == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("activations and the polynomial ReLU") {
  Tensor3 x(1, 1, 2, {0.0, 1.0});
  CHECK(srelu_poly(x).at(0, 0, 0) == 0.0);
  CHECK(srelu_poly(x).at(0, 0, 1) == doctest::Approx(0.321));
  CHECK(activate(x, ActKind::relu).at(0, 0, 0) == 0.0);
  CHECK(activate(Tensor3(1, 1, 1, {-2.0}), ActKind::relu).at(0, 0, 0) == 0.0);
  CHECK(activate(x, ActKind::sigmoid).at(0, 0, 0) == doctest::Approx(0.5));
  CHECK(activate(x, ActKind::tanh).at(0, 0, 1) == doctest::Approx(std::tanh(1.0)));

  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix m = oracle::random_matrix(6, 6, rng, -2, 2);
    CHECK(max_abs_diff(dft2(srelu_poly(m)), srelu_freq(dft2(m))) < 1e-9);
  }
}
