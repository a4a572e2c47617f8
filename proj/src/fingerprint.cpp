#include "specprint/fingerprint.hpp"

#include <algorithm>
#include <cmath>

#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/synth_pool.hpp"

namespace specprint {
namespace {

void accumulate(Matrix& acc, const Matrix& m) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += m.values()[i];
}

void scale(Matrix& m, double s) {
  for (double& v : m.values()) v *= s;
}

Matrix channel_mean_magnitude(const Tensor3& x) {
  Matrix mag(x.height(), x.width());
  for (std::size_t c = 0; c < x.channels(); ++c) accumulate(mag, magnitude(dft2(x.channel(c))));
  scale(mag, 1.0 / static_cast<double>(x.channels()));
  return mag;
}

void normalize_l2(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0)
    for (double& x : v) x /= n;
}

}  // namespace

Matrix mean_magnitude_spectrum(const std::vector<Tensor3>& images) {
  if (images.empty()) throw DataError("mean spectrum of an empty image set");
  Matrix acc(images.front().height(), images.front().width());
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw DataError("images differ in size");
    accumulate(acc, channel_mean_magnitude(img));
  }
  scale(acc, 1.0 / static_cast<double>(images.size()));
  return acc;
}

Matrix mean_magnitude_spectrum(const std::vector<Matrix>& images) {
  if (images.empty()) throw DataError("mean spectrum of an empty image set");
  Matrix acc(images.front().rows(), images.front().cols());
  for (const auto& img : images) {
    if (img.rows() != acc.rows() || img.cols() != acc.cols()) throw DataError("images differ in size");
    accumulate(acc, magnitude(dft2(img)));
  }
  scale(acc, 1.0 / static_cast<double>(images.size()));
  return acc;
}

double normalized_radius(std::size_t u, std::size_t v, std::size_t rows, std::size_t cols) {
  const double fu = static_cast<double>(min_image(u, rows)) / (static_cast<double>(rows) / 2.0);
  const double fv = static_cast<double>(min_image(v, cols)) / (static_cast<double>(cols) / 2.0);
  return std::sqrt(fu * fu + fv * fv);
}

Matrix highpass_mask(const Matrix& spectrum, double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw DataError("high-pass cutoff must lie in (0, 1)");
  Matrix out = spectrum;
  for (std::size_t u = 0; u < out.rows(); ++u)
    for (std::size_t v = 0; v < out.cols(); ++v)
      if (normalized_radius(u, v, out.rows(), out.cols()) < cutoff) out(u, v) = 0.0;
  return out;
}

AzimuthalProfile azimuthal_integral(const Matrix& mag) {
  const std::size_t s = std::min(mag.rows(), mag.cols());
  AzimuthalProfile p;
  p.values.assign(s / 2, 0.0);
  // round(r) < s/2 already implies |u'|, |v'| < s/2, i.e. the central s x s block.
  for (std::size_t u = 0; u < mag.rows(); ++u)
    for (std::size_t v = 0; v < mag.cols(); ++v) {
      const double du = static_cast<double>(min_image(u, mag.rows()));
      const double dv = static_cast<double>(min_image(v, mag.cols()));
      const auto k = static_cast<std::size_t>(std::lround(std::sqrt(du * du + dv * dv)));
      if (k < p.values.size()) p.values[k] += mag(u, v) * mag(u, v);
    }
  return p;
}

AzimuthalProfile azimuthal_integral(const Spectrum2& f) { return azimuthal_integral(magnitude(f)); }

HpRatio hp_ratio(const AzimuthalProfile& profile) {
  const std::size_t k = profile.values.size();
  double total = 0.0, high = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    total += profile.values[i];
    if (i >= k / 2) high += profile.values[i];
  }
  if (total <= 0.0) return {0.0, true};
  return {high / total, false};
}

HpRatio hp_ratio(const Matrix& mag) { return hp_ratio(azimuthal_integral(mag)); }
HpRatio hp_ratio(const Spectrum2& f) { return hp_ratio(azimuthal_integral(f)); }

double feature_hp_ratio(const Tensor3& x) { return hp_ratio(dft2(x.channel_mean())).value; }

AttenuationCurve attenuation_curve(const std::vector<std::pair<std::string, Tensor3>>& taps) {
  AttenuationCurve curve;
  curve.reserve(taps.size());
  for (const auto& [name, t] : taps) curve.emplace_back(name, feature_hp_ratio(t));
  return curve;
}

AttenuationCurve attenuation_curve(const FreqGenModel& model, const Tensor3& img) {
  return attenuation_curve(model.taps(img));
}

Fingerprint extract_fingerprint(const std::vector<Tensor3>& images, double cutoff, ChannelMode mode) {
  if (images.empty()) throw DataError("fingerprint of an empty image set");
  Matrix mean;
  if (mode == ChannelMode::per_channel) {
    mean = mean_magnitude_spectrum(images);
  } else {
    std::vector<Matrix> gray;
    gray.reserve(images.size());
    for (const auto& img : images) {
      if (!img.same_shape(images.front())) throw DataError("images differ in size");
      gray.push_back(img.channel_mean());
    }
    mean = mean_magnitude_spectrum(gray);
  }
  for (double& v : mean.values()) v = std::log1p(v);
  const Matrix masked = highpass_mask(mean, cutoff);
  Fingerprint fp;
  fp.values = masked.storage();
  normalize_l2(fp.values);
  fp.rows = masked.rows();
  fp.cols = masked.cols();
  fp.cutoff = cutoff;
  fp.n_images = images.size();
  return fp;
}

Fingerprint image_feature(const Tensor3& img, double cutoff, ChannelMode mode) {
  return extract_fingerprint({img}, cutoff, mode);
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine of vectors with different lengths");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

double cosine(const Fingerprint& a, const Fingerprint& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw DataError("fingerprints differ in size");
  return cosine(std::span<const double>(a.values), std::span<const double>(b.values));
}

Matrix kernel_magnitude_spectrum(const ConvKernel& kernel, std::size_t rows, std::size_t cols) {
  Matrix acc(rows, cols);
  for (std::size_t o = 0; o < kernel.out_channels(); ++o)
    for (std::size_t i = 0; i < kernel.in_channels(); ++i)
      accumulate(acc, magnitude(dft2(zero_pad(kernel.slice_matrix(o, i), rows, cols))));
  scale(acc, 1.0 / static_cast<double>(kernel.out_channels() * kernel.in_channels()));
  return acc;
}

Matrix coherent_kernel_spectrum(const ConvKernel& kernel, std::size_t rows, std::size_t cols) {
  Matrix mean(kernel.size(), kernel.size());
  for (std::size_t o = 0; o < kernel.out_channels(); ++o)
    for (std::size_t i = 0; i < kernel.in_channels(); ++i) accumulate(mean, kernel.slice_matrix(o, i));
  scale(mean, 1.0 / static_cast<double>(kernel.out_channels() * kernel.in_channels()));
  return magnitude(dft2(zero_pad(mean, rows, cols)));
}

double kernel_spectrum_similarity(const ConvKernel& kernel, const std::vector<Tensor3>& outputs,
                                  double cutoff) {
  if (outputs.empty()) throw DataError("no convolved images");
  const std::size_t rows = outputs.front().height(), cols = outputs.front().width();
  const Matrix k = highpass_mask(kernel_magnitude_spectrum(kernel, rows, cols), cutoff);
  double total = 0.0;
  for (const auto& out : outputs) {
    if (out.height() != rows || out.width() != cols) throw DataError("images differ in size");
    const Matrix s = highpass_mask(channel_mean_magnitude(out), cutoff);
    total += cosine(s.values(), k.values());
  }
  return total / static_cast<double>(outputs.size());
}

std::vector<double> log_spectrum_feature(const Tensor3& img) {
  return log_magnitude(dft2(img.channel_mean())).storage();
}

// ---- linear probe ----

namespace {

std::vector<double> standardized(const LinearProbe& p, std::span<const double> x) {
  if (x.size() != p.dims()) throw DataError("probe feature has the wrong length");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - p.feature_mean[j]) / p.feature_scale[j];
  return z;
}

std::vector<double> logits(const LinearProbe& p, const std::vector<double>& z) {
  std::vector<double> out(p.classes);
  const std::size_t d = p.dims();
  for (std::size_t c = 0; c < p.classes; ++c) {
    const double* w = p.weights.data() + c * d;
    double s = p.bias[c];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * z[j];
    out[c] = s;
  }
  return out;
}

void softmax_inplace(std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) s += (x = std::exp(x - m));
  for (double& x : v) x /= s;
}

}  // namespace

std::vector<double> LinearProbe::scores(std::span<const double> feature) const {
  return logits(*this, standardized(*this, feature));
}

std::size_t LinearProbe::predict(std::span<const double> feature) const {
  const auto s = scores(feature);
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

ProbeObjective probe_objective(const LinearProbe& probe, const std::vector<std::vector<double>>& x,
                               const std::vector<std::size_t>& labels, double l2) {
  const std::size_t d = probe.dims();
  ProbeObjective obj;
  obj.grad_weights.assign(probe.weights.size(), 0.0);
  obj.grad_bias.assign(probe.classes, 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::vector<double> z = standardized(probe, x[n]);
    std::vector<double> p = logits(probe, z);
    softmax_inplace(p);
    obj.loss -= std::log(std::max(p[labels[n]], 1e-300)) * inv_n;
    for (std::size_t c = 0; c < probe.classes; ++c) {
      const double delta = (p[c] - (c == labels[n] ? 1.0 : 0.0)) * inv_n;
      obj.grad_bias[c] += delta;
      double* g = obj.grad_weights.data() + c * d;
      for (std::size_t j = 0; j < d; ++j) g[j] += delta * z[j];
    }
  }
  for (std::size_t i = 0; i < probe.weights.size(); ++i) {
    obj.loss += 0.5 * l2 * probe.weights[i] * probe.weights[i];
    obj.grad_weights[i] += l2 * probe.weights[i];
  }
  return obj;
}

LinearProbe train_linear_probe(const std::vector<std::vector<double>>& x,
                               const std::vector<std::size_t>& labels, std::size_t rows,
                               std::size_t cols, const ProbeOptions& options) {
  if (x.size() != labels.size() || x.empty()) throw DataError("probe needs matching features and labels");
  const std::size_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> counts(classes, 0);
  for (auto l : labels) ++counts[l];
  if (std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }) < 2)
    throw DataError("probe needs at least two classes");

  LinearProbe p;
  p.classes = classes;
  p.rows = rows;
  p.cols = cols;
  const std::size_t d = p.dims();
  p.weights.assign(classes * d, 0.0);
  p.bias.assign(classes, 0.0);
  p.feature_mean.assign(d, 0.0);
  p.feature_scale.assign(d, 0.0);
  for (const auto& row : x) {
    if (row.size() != d) throw DataError("probe feature has the wrong length");
    for (std::size_t j = 0; j < d; ++j) p.feature_mean[j] += row[j];
  }
  for (double& m : p.feature_mean) m /= static_cast<double>(x.size());
  for (const auto& row : x)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - p.feature_mean[j];
      p.feature_scale[j] += c * c;
    }
  for (double& s : p.feature_scale) {
    s = std::sqrt(s / static_cast<double>(x.size()));
    if (s < 1e-12) s = 1.0;
  }

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const ProbeObjective obj = probe_objective(p, x, labels, options.l2);
    if (!std::isfinite(obj.loss)) throw DivergenceError("probe training diverged");
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= options.learning_rate * obj.grad_weights[i];
    for (std::size_t c = 0; c < classes; ++c) p.bias[c] -= options.learning_rate * obj.grad_bias[c];
  }
  return p;
}

double probe_accuracy(const LinearProbe& probe, const std::vector<std::vector<double>>& x,
                      const std::vector<std::size_t>& labels) {
  if (x.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t n = 0; n < x.size(); ++n) hits += probe.predict(x[n]) == labels[n];
  return static_cast<double>(hits) / static_cast<double>(x.size());
}

std::vector<Matrix> probe_weight_maps(const LinearProbe& probe) {
  std::vector<Matrix> maps;
  const std::size_t d = probe.dims();
  for (std::size_t c = 0; c < probe.classes; ++c) {
    Matrix m(probe.rows, probe.cols);
    for (std::size_t j = 0; j < d; ++j) m.values()[j] = probe.weights[c * d + j] / probe.feature_scale[j];
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace specprint
