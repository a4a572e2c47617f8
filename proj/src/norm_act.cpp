#include "specprint/norm_act.hpp"

#include <cmath>

#include "specprint/error.hpp"

namespace specprint {

NormParams NormParams::make(NormKind kind, std::size_t channels, double eps) {
  NormParams p;
  p.kind = kind;
  p.gamma.assign(channels, 1.0);
  p.beta.assign(channels, 0.0);
  p.eps = eps;
  p.running_mean.assign(channels, 0.0);
  p.running_var.assign(channels, 1.0);
  return p;
}

ChannelStats instance_stats(const Tensor3& x) {
  ChannelStats s{std::vector<double>(x.channels()), std::vector<double>(x.channels())};
  const double n = static_cast<double>(x.plane_size());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double sum = 0.0;
    for (double v : x.plane(c)) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (double v : x.plane(c)) sq += (v - mean) * (v - mean);
    s.mean[c] = mean;
    s.var[c] = sq / n;
  }
  return s;
}

ChannelStats batch_stats(std::span<const Tensor3> batch) {
  if (batch.empty()) throw DataError("batch statistics of an empty batch");
  const std::size_t channels = batch.front().channels();
  ChannelStats s{std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
  const double n = static_cast<double>(batch.size() * batch.front().plane_size());
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (const auto& x : batch)
      for (double v : x.plane(c)) sum += v;
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& x : batch)
      for (double v : x.plane(c)) sq += (v - mean) * (v - mean);
    s.mean[c] = mean;
    s.var[c] = sq / n;
  }
  return s;
}

Tensor3 normalize_with(const Tensor3& x, const NormParams& p, const ChannelStats& stats) {
  if (p.kind == NormKind::none) return x;
  if (p.gamma.size() != x.channels() || stats.mean.size() != x.channels())
    throw DataError("normalization channel count mismatch");
  Tensor3 out(x.channels(), x.height(), x.width());
  for (std::size_t c = 0; c < x.channels(); ++c) {
    const double denom_sq = stats.var[c] + p.eps;
    if (!(denom_sq > 0.0))
      throw DataError("zero-variance channel " + std::to_string(c) + " with eps = 0");
    const double scale = p.gamma[c] / std::sqrt(denom_sq);
    auto src = x.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = scale * (src[i] - stats.mean[c]) + p.beta[c];
  }
  return out;
}

std::vector<Tensor3> normalize(std::span<const Tensor3> batch, const NormParams& p) {
  std::vector<Tensor3> out;
  out.reserve(batch.size());
  switch (p.kind) {
    case NormKind::none:
      out.assign(batch.begin(), batch.end());
      break;
    case NormKind::instance:
      for (const auto& x : batch) out.push_back(normalize_with(x, p, instance_stats(x)));
      break;
    case NormKind::batch: {
      const ChannelStats stats =
          p.frozen ? ChannelStats{p.running_mean, p.running_var} : batch_stats(batch);
      for (const auto& x : batch) out.push_back(normalize_with(x, p, stats));
      break;
    }
  }
  return out;
}

Tensor3 normalize(const Tensor3& x, const NormParams& p) {
  return normalize(std::span<const Tensor3>(&x, 1), p).front();
}

Spectrum2 normalize_freq(const Spectrum2& f, double gamma, double beta, double mean, double var,
                         double eps) {
  if (!(var + eps > 0.0)) throw DataError("zero variance with eps = 0");
  const double area = static_cast<double>(f.height() * f.width());
  const double scale = gamma / std::sqrt(var + eps);
  Spectrum2 out(f.height(), f.width());
  for (std::size_t i = 0; i < f.size(); ++i) out.values()[i] = scale * f.values()[i];
  // mu_F and beta_F only live on the DC bin.
  out(0, 0) = scale * (f(0, 0) - mean * area) + beta * area;
  return out;
}

double activation_value(double x, ActKind kind) {
  switch (kind) {
    case ActKind::relu: return x > 0.0 ? x : 0.0;
    case ActKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case ActKind::tanh: return std::tanh(x);
    case ActKind::none: return x;
  }
  return x;
}

double activation_derivative(double x, ActKind kind) {
  switch (kind) {
    case ActKind::relu: return x > 0.0 ? 1.0 : 0.0;
    case ActKind::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 - s);
    }
    case ActKind::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActKind::none: return 1.0;
  }
  return 1.0;
}

Tensor3 activate(const Tensor3& x, ActKind kind) {
  Tensor3 out = x;
  if (kind == ActKind::none) return out;
  for (double& v : out.values()) v = activation_value(v, kind);
  return out;
}

Matrix srelu_poly(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.values()) v = kSreluC0 + kSreluC1 * v + kSreluC2 * v * v;
  return out;
}

Tensor3 srelu_poly(const Tensor3& x) {
  Tensor3 out = x;
  for (double& v : out.values()) v = kSreluC0 + kSreluC1 * v + kSreluC2 * v * v;
  return out;
}

Spectrum2 circular_convolve(const Spectrum2& a, const Spectrum2& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DataError("circular_convolve shape mismatch");
  const std::size_t m = a.height();
  const std::size_t n = a.width();
  Spectrum2 out(m, n);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      Complex acc{};
      for (std::size_t p = 0; p < m; ++p) {
        const std::size_t up = (u + m - p) % m;
        for (std::size_t q = 0; q < n; ++q) acc += a(p, q) * b(up, (v + n - q) % n);
      }
      out(u, v) = acc;
    }
  }
  return out;
}

Spectrum2 srelu_freq(const Spectrum2& f) {
  const double area = static_cast<double>(f.height() * f.width());
  Spectrum2 out = circular_convolve(f, f);
  out *= Complex(kSreluC2 / area, 0.0);
  for (std::size_t i = 0; i < f.size(); ++i) out.values()[i] += kSreluC1 * f.values()[i];
  out(0, 0) += kSreluC0 * area;
  return out;
}

}  // namespace specprint
