#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/fingerprint.hpp"
#include "specprint/synth_pool.hpp"
#include "specprint/synthetic_images.hpp"
#include "specprint/upsample.hpp"

using namespace specprint;

namespace {

// Ring sizes on an n x n lattice, counted over signed frequencies.
std::vector<double> ring_counts(int n) {
  std::vector<double> counts(static_cast<std::size_t>(n / 2), 0.0);
  for (int a = -n / 2; a < n - n / 2; ++a)
    for (int b = -n / 2; b < n - n / 2; ++b) {
      const long k = std::lround(std::sqrt(double(a * a + b * b)));
      if (k < n / 2) counts[static_cast<std::size_t>(k)] += 1.0;
    }
  return counts;
}

Tensor3 gray(const Matrix& m) { return Tensor3::from_matrix(m); }

}  // namespace

TEST_CASE("mean magnitude spectrum") {
  Rng rng(1);
  const Matrix x = oracle::random_matrix(6, 6, rng);
  CHECK(max_abs_diff(mean_magnitude_spectrum(std::vector<Matrix>{x}), magnitude(dft2(x))) < 1e-12);

  Matrix y(6, 6);
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] = -x.values()[i] + 0.3;
  const Matrix mean = mean_magnitude_spectrum(std::vector<Matrix>{x, y});
  const Spectrum2 fx = oracle::naive_dft2(x), fy = oracle::naive_dft2(y);
  for (std::size_t i = 0; i < mean.size(); ++i)
    CHECK(std::abs(mean.values()[i] - 0.5 * (std::abs(fx.values()[i]) + std::abs(fy.values()[i]))) < 1e-10);

  // Colour images: per channel first, then across channels.
  const Tensor3 t = oracle::random_tensor(3, 4, 4, rng);
  Matrix manual(4, 4);
  for (std::size_t c = 0; c < 3; ++c) {
    const Spectrum2 f = oracle::naive_dft2(t.channel(c));
    for (std::size_t i = 0; i < manual.size(); ++i) manual.values()[i] += std::abs(f.values()[i]) / 3.0;
  }
  CHECK(max_abs_diff(mean_magnitude_spectrum(std::vector<Tensor3>{t}), manual) < 1e-10);

  CHECK_THROWS_AS(mean_magnitude_spectrum(std::vector<Matrix>{Matrix(4, 4), Matrix(4, 5)}), DataError);
  CHECK_THROWS_AS(mean_magnitude_spectrum(std::vector<Matrix>{}), DataError);
}

TEST_CASE("power-law spectra average to a radially decreasing profile") {
  Rng rng(2);
  std::vector<Matrix> images;
  for (int i = 0; i < 1000; ++i) images.push_back(random_power_law_image(32, 32, rng));
  const Matrix mean = mean_magnitude_spectrum(images);
  const auto counts = ring_counts(32);
  const auto profile = azimuthal_integral(mean).values;
  for (std::size_t k = 2; k < profile.size(); ++k)
    CHECK(profile[k] / counts[k] < profile[k - 1] / counts[k - 1]);
}

TEST_CASE("high-pass mask") {
  Matrix ones(8, 8, 1.0);
  const Matrix nearly_all = highpass_mask(ones, 1e-9);
  CHECK(nearly_all(0, 0) == 0.0);
  CHECK(nearly_all.sum() == 63.0);

  // Radius < 2 bins on 8x8: signed frequencies in {-1, 0, 1} on both axes.
  const Matrix half = highpass_mask(ones, 0.5);
  for (std::size_t u = 0; u < 8; ++u)
    for (std::size_t v = 0; v < 8; ++v) {
      const bool low = (u <= 1 || u == 7) && (v <= 1 || v == 7);
      CHECK(half(u, v) == (low ? 0.0 : 1.0));
    }
  CHECK(highpass_mask(half, 0.5) == half);
  CHECK_THROWS_AS(highpass_mask(ones, 0.0), DataError);
  CHECK_THROWS_AS(highpass_mask(ones, 1.0), DataError);
}

TEST_CASE("azimuthal integral") {
  Matrix imp(16, 16);
  imp(0, 0) = 1.0;
  const auto p = azimuthal_integral(dft2(imp)).values;
  const auto counts = ring_counts(16);
  REQUIRE(p.size() == 8);
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(p[k] == doctest::Approx(counts[k]));

  for (double v : azimuthal_integral(Spectrum2(8, 8)).values) CHECK(v == 0.0);

  Rng rng(4);
  const Matrix x = oracle::random_matrix(12, 12, rng);
  Matrix scaled = x;
  for (double& v : scaled.values()) v *= 3.0;
  const auto a = azimuthal_integral(dft2(x)).values;
  const auto b = azimuthal_integral(dft2(scaled)).values;
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == doctest::Approx(9.0 * a[k]));

  // Non-square: same profile as the central square crop of the shifted spectrum.
  const Matrix wide = oracle::random_matrix(8, 12, rng);
  const Matrix mag = magnitude(dft2(wide));
  Matrix crop(8, 8);
  for (std::size_t u = 0; u < 8; ++u)
    for (int sv = -4; sv < 4; ++sv) crop(u, static_cast<std::size_t>((sv + 8) % 8)) = mag(u, static_cast<std::size_t>((sv + 12) % 12));
  const auto pw = azimuthal_integral(mag).values;
  const auto pc = azimuthal_integral(crop).values;
  for (std::size_t k = 0; k < pw.size(); ++k) CHECK(pw[k] == doctest::Approx(pc[k]));
}

TEST_CASE("hp_ratio edge cases and white noise") {
  CHECK(hp_ratio(dft2(Matrix(8, 8, 0.7))).value == 0.0);
  CHECK_FALSE(hp_ratio(dft2(Matrix(8, 8, 0.7))).degenerate);
  CHECK(hp_ratio(Spectrum2(8, 8)).degenerate);

  const auto counts = ring_counts(64);
  const double outer = std::accumulate(counts.begin() + 16, counts.end(), 0.0);
  const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
  double mean_ratio = 0.0;
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const double r = hp_ratio(dft2(white_noise_image(64, 64, 1.0, rng))).value;
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
    mean_ratio += r / 50.0;
  }
  CHECK(std::abs(mean_ratio - outer / all) < 0.05);
}

TEST_CASE("bilinear upsampling lowers hp_ratio on power-law inputs (circular boundary)") {
  // Power-law images are periodic by construction; a zero boundary would add its own edge.
  int drops = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) + 100);
    const Matrix x = random_power_law_image(32, 32, rng);
    const Tensor3 up = upsample_circular(gray(x), UpsampleMode::bilinear());
    drops += feature_hp_ratio(up) < feature_hp_ratio(gray(x));
  }
  CHECK(drops == 20);
}

TEST_CASE("attenuation curve") {
  Rng rng(5);
  const Tensor3 x = random_power_law_tensor(3, 16, 16, rng);
  const std::vector<std::pair<std::string, Tensor3>> identity = {{"a", x}, {"b", x}, {"c", x}};
  const auto flat = attenuation_curve(identity);
  REQUIRE(flat.size() == 3);
  CHECK(flat[0].second == flat[2].second);

  const Tensor3 up = upsample_circular(x, UpsampleMode::bilinear());
  const auto chain = attenuation_curve({{"input", x}, {"up.bilinear", up}, {"copy", up}});
  CHECK(chain[1].second < chain[0].second);
  CHECK(chain[2].second == chain[1].second);

  BlockConfig c;
  c.up = UpsampleKind::bilinear;
  const FreqGenModel m(c);
  const auto curve = attenuation_curve(m, x);
  REQUIRE(curve.size() == m.net().size());
  for (std::size_t i = 0; i < curve.size(); ++i) CHECK(curve[i].first == m.net().layer(i).name());
}

TEST_CASE("fingerprints") {
  const auto images = power_law_corpus(6, 16, 3);
  const Fingerprint one = extract_fingerprint({images[0]});
  const Fingerprint single = image_feature(images[0]);
  CHECK(one.values == single.values);
  CHECK(one.n_images == 1);

  const Fingerprint fp = extract_fingerprint(images);
  double norm = 0.0;
  for (double v : fp.values) norm += v * v;
  CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
  CHECK(fp.values.size() == 256);

  std::vector<Tensor3> shuffled(images.rbegin(), images.rend());
  const Fingerprint fs = extract_fingerprint(shuffled);
  for (std::size_t i = 0; i < fp.values.size(); ++i) CHECK(fs.values[i] == doctest::Approx(fp.values[i]).epsilon(1e-12));

  const Fingerprint pc = extract_fingerprint(images, 0.5, ChannelMode::per_channel);
  CHECK(pc.values.size() == 256);
  CHECK_THROWS_AS(extract_fingerprint({}), DataError);
}

TEST_CASE("fingerprints of one generator are stable across disjoint batches") {
  BlockConfig c;
  c.up = UpsampleKind::deconv;
  c.act = ActKind::relu;
  c.seed = 8;
  c.feature_dim = 8;
  const FreqGenModel m(c);
  const auto images = power_law_corpus(100, 32, 4);
  std::vector<Tensor3> a, b;
  for (std::size_t i = 0; i < images.size(); ++i) (i % 2 ? a : b).push_back(m.forward(images[i]));
  CHECK(cosine(extract_fingerprint(a), extract_fingerprint(b)) >= 0.99);
}

TEST_CASE("cosine") {
  Rng rng(6);
  std::vector<double> a(20), b(20);
  for (auto& v : a) v = rng.uniform(-1, 1);
  for (auto& v : b) v = rng.uniform(-1, 1);
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  CHECK(cosine(a, b) == doctest::Approx(ab / std::sqrt(aa * bb)).epsilon(1e-12));
  CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)).epsilon(1e-15));
  CHECK(cosine(a, a) == doctest::Approx(1.0));
  CHECK(cosine(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  CHECK_THROWS_AS(cosine(std::vector<double>{1}, std::vector<double>{1, 2}), DataError);

  Fingerprint f1{{1.0, 0.0}, 1, 2}, f2{{0.0, 1.0, 0.0}, 1, 3};
  CHECK_THROWS_AS(cosine(f1, f2), DataError);
}

TEST_CASE("kernel spectrum similarity") {
  const auto images = power_law_corpus(10, 32, 6);

  // A delta kernel leaves the image unchanged: the score is the similarity of each image's
  // high-passed spectrum to a flat one.
  const ConvKernel delta = ConvKernel::identity(3, 3);
  std::vector<Tensor3> same;
  for (const auto& x : images) same.push_back(conv2_spatial(x, delta, PaddingMode::zero_same));
  double baseline = 0.0;
  for (const auto& x : images) {
    Matrix mag(32, 32);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const Matrix m = magnitude(dft2(x.channel(ch)));
      for (std::size_t i = 0; i < mag.size(); ++i) mag.values()[i] += m.values()[i];
    }
    const Matrix hp = highpass_mask(mag, 0.5);
    const Matrix flat = highpass_mask(Matrix(32, 32, 1.0), 0.5);
    baseline += cosine(hp.values(), flat.values()) / 10.0;
  }
  // identity(3, 3) averages one delta and eight zero kernels, still a flat spectrum.
  CHECK(kernel_spectrum_similarity(delta, same) == doctest::Approx(baseline).epsilon(1e-12));

  Rng rng(9);
  const ConvKernel k = ConvKernel::random(3, 3, 3, rng);
  std::vector<Tensor3> out, bright;
  for (const auto& x : images) {
    out.push_back(conv2_spatial(x, k, PaddingMode::zero_same));
    Tensor3 scaled = out.back();
    for (double& v : scaled.values()) v *= 2.5;
    bright.push_back(std::move(scaled));
  }
  CHECK(kernel_spectrum_similarity(k, bright) == doctest::Approx(kernel_spectrum_similarity(k, out)).epsilon(1e-12));
}

TEST_CASE("coherent kernel spectrum is the channel-mean transfer for identical channels") {
  Rng rng(21);
  ConvKernel k = ConvKernel::random(3, 4, 3, rng);
  for (double& b : k.bias()) b = 0.0;
  const Matrix plane = random_power_law_image(16, 16, rng);
  Tensor3 x(3, 16, 16);
  for (std::size_t c = 0; c < 3; ++c) x.set_channel(c, plane);
  const Matrix got = magnitude(dft2(conv2_spatial(x, k, PaddingMode::circular).channel_mean()));
  const Matrix h = coherent_kernel_spectrum(k, 16, 16);
  const Matrix xm = magnitude(dft2(plane));
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(std::abs(got.values()[i] - 3.0 * h.values()[i] * xm.values()[i]) < 1e-9);
}

TEST_CASE("linear probe: separable classes, gradient check, errors") {
  Rng rng(10);
  std::vector<std::vector<double>> x;
  std::vector<std::size_t> y;
  for (int n = 0; n < 40; ++n) {
    const std::size_t label = n % 2;
    std::vector<double> f(4);
    for (auto& v : f) v = rng.normal() * 0.3;
    f[label] += 2.0;
    x.push_back(f);
    y.push_back(label);
  }
  const LinearProbe p = train_linear_probe(x, y, 2, 2, {200, 0.5, 1e-4});
  CHECK(probe_accuracy(p, x, y) == 1.0);
  CHECK(probe_weight_maps(p).size() == 2);
  CHECK(probe_weight_maps(p)[0].rows() == 2);

  // Gradient check from a random point, three classes.
  std::vector<std::vector<double>> x3;
  std::vector<std::size_t> y3;
  for (int n = 0; n < 9; ++n) {
    std::vector<double> f(6);
    for (auto& v : f) v = rng.uniform(-1, 1);
    x3.push_back(f);
    y3.push_back(static_cast<std::size_t>(n % 3));
  }
  LinearProbe q = train_linear_probe(x3, y3, 2, 3, {0, 0.1, 0.0});
  for (auto& w : q.weights) w = rng.uniform(-0.5, 0.5);
  for (auto& b : q.bias) b = rng.uniform(-0.5, 0.5);
  const double l2 = 0.01;
  const ProbeObjective obj = probe_objective(q, x3, y3, l2);
  const double h = 1e-5;
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    param = keep + h;
    const double up = probe_objective(q, x3, y3, l2).loss;
    param = keep - h;
    const double down = probe_objective(q, x3, y3, l2).loss;
    param = keep;
    const double numeric = (up - down) / (2 * h);
    const double err = std::abs(numeric - analytic);
    CHECK((err <= 1e-7 || err / std::max(std::abs(numeric), std::abs(analytic)) < 1e-4));
  };
  for (std::size_t i = 0; i < q.weights.size(); ++i) check(q.weights[i], obj.grad_weights[i]);
  for (std::size_t i = 0; i < q.bias.size(); ++i) check(q.bias[i], obj.grad_bias[i]);

  CHECK_THROWS_AS(train_linear_probe(x, std::vector<std::size_t>(x.size(), 1), 2, 2), DataError);
  CHECK_THROWS_AS(train_linear_probe(x, y, 3, 3), DataError);
}
