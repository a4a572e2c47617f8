#include "specprint/nn.hpp"

#include <cmath>

#include "specprint/error.hpp"

namespace specprint::nn {
namespace {

std::size_t total_size(const std::vector<std::span<double>>& spans) {
  std::size_t n = 0;
  for (auto s : spans) n += s.size();
  return n;
}

}  // namespace

// ---- AvgPool2 ----

Batch AvgPool2::forward(const Batch& in, Mode, LayerCache* cache) const {
  Batch out;
  out.reserve(in.size());
  for (const auto& x : in) {
    if (x.height() % 2 || x.width() % 2)
      throw DataError("average pooling needs even dims, got " + std::to_string(x.height()) + "x" +
                      std::to_string(x.width()));
    Tensor3 y(x.channels(), x.height() / 2, x.width() / 2);
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t r = 0; r < y.height(); ++r)
        for (std::size_t q = 0; q < y.width(); ++q)
          y.at(c, r, q) = 0.25 * (x.at(c, 2 * r, 2 * q) + x.at(c, 2 * r + 1, 2 * q) +
                                  x.at(c, 2 * r, 2 * q + 1) + x.at(c, 2 * r + 1, 2 * q + 1));
    out.push_back(std::move(y));
  }
  if (cache) cache->inputs = in;
  return out;
}

Batch AvgPool2::backward(const LayerCache& cache, const Batch& grad_out, std::span<double>) const {
  Batch gin;
  gin.reserve(grad_out.size());
  for (std::size_t n = 0; n < grad_out.size(); ++n) {
    const Tensor3& g = grad_out[n];
    const Tensor3& x = cache.inputs[n];
    Tensor3 gi(x.channels(), x.height(), x.width());
    for (std::size_t c = 0; c < g.channels(); ++c)
      for (std::size_t r = 0; r < g.height(); ++r)
        for (std::size_t q = 0; q < g.width(); ++q) {
          const double v = 0.25 * g.at(c, r, q);
          gi.at(c, 2 * r, 2 * q) = v;
          gi.at(c, 2 * r + 1, 2 * q) = v;
          gi.at(c, 2 * r, 2 * q + 1) = v;
          gi.at(c, 2 * r + 1, 2 * q + 1) = v;
        }
    gin.push_back(std::move(gi));
  }
  return gin;
}

// ---- Conv ----

Batch Conv::forward(const Batch& in, Mode, LayerCache* cache) const {
  Batch out;
  out.reserve(in.size());
  for (const auto& x : in) out.push_back(conv2_spatial(x, kernel_, PaddingMode::zero_same));
  if (cache) cache->inputs = in;
  return out;
}

Batch Conv::backward(const LayerCache& cache, const Batch& grad_out,
                     std::span<double> param_grad) const {
  const std::size_t nw = kernel_.weights().size();
  Batch gin;
  gin.reserve(grad_out.size());
  for (std::size_t n = 0; n < grad_out.size(); ++n) {
    ConvGrads g = conv2_backward(cache.inputs[n], kernel_, grad_out[n]);
    for (std::size_t i = 0; i < nw; ++i) param_grad[i] += g.weights[i];
    for (std::size_t i = 0; i < g.bias.size(); ++i) param_grad[nw + i] += g.bias[i];
    gin.push_back(std::move(g.input));
  }
  return gin;
}

std::vector<std::span<double>> Conv::parameters() {
  return {std::span<double>(kernel_.weights()), std::span<double>(kernel_.bias())};
}

std::size_t Conv::parameter_count() const {
  return kernel_.weights().size() + kernel_.bias().size();
}

// ---- Upsample ----

std::string Upsample::name() const {
  switch (mode_.kind) {
    case UpsampleKind::nearest: return "up.nearest";
    case UpsampleKind::bilinear: return "up.bilinear";
    case UpsampleKind::deconv: return "up.deconv";
  }
  return "up";
}

Batch Upsample::forward(const Batch& in, Mode, LayerCache* cache) const {
  Batch out;
  out.reserve(in.size());
  for (const auto& x : in) out.push_back(upsample(x, mode_));
  if (cache) cache->inputs = in;
  return out;
}

Batch Upsample::backward(const LayerCache& cache, const Batch& grad_out,
                         std::span<double> param_grad) const {
  Batch gin;
  gin.reserve(grad_out.size());
  if (mode_.kind == UpsampleKind::deconv) {
    const ConvKernel& k = *mode_.deconv;
    const std::size_t nw = k.weights().size();
    for (std::size_t n = 0; n < grad_out.size(); ++n) {
      ConvGrads g = conv2_backward(zero_interleave(cache.inputs[n]), k, grad_out[n]);
      for (std::size_t i = 0; i < nw; ++i) param_grad[i] += g.weights[i];
      for (std::size_t i = 0; i < g.bias.size(); ++i) param_grad[nw + i] += g.bias[i];
      gin.push_back(zero_interleave_adjoint(g.input));
    }
    return gin;
  }
  const Matrix kernel = upsample_kernel(mode_);
  for (const auto& g : grad_out)
    gin.push_back(zero_interleave_adjoint(conv2_depthwise_backward(g, kernel)));
  return gin;
}

std::vector<std::span<double>> Upsample::parameters() {
  if (mode_.kind != UpsampleKind::deconv) return {};
  return {std::span<double>(mode_.deconv->weights()), std::span<double>(mode_.deconv->bias())};
}

std::size_t Upsample::parameter_count() const {
  if (mode_.kind != UpsampleKind::deconv) return 0;
  return mode_.deconv->weights().size() + mode_.deconv->bias().size();
}

// ---- Norm ----

Batch Norm::forward(const Batch& in, Mode mode, LayerCache* cache) const {
  Batch out;
  out.reserve(in.size());
  std::vector<ChannelStats> used;
  if (params_.kind == NormKind::instance) {
    for (const auto& x : in) {
      used.push_back(instance_stats(x));
      out.push_back(normalize_with(x, params_, used.back()));
    }
  } else if (params_.kind == NormKind::batch) {
    if (mode == Mode::infer && frozen())
      used.push_back({params_.running_mean, params_.running_var});
    else
      used.push_back(batch_stats(in));
    for (const auto& x : in) out.push_back(normalize_with(x, params_, used.front()));
  } else {
    out = in;
  }
  if (cache) {
    cache->inputs = in;
    cache->stats = std::move(used);
  }
  return out;
}

Batch Norm::backward(const LayerCache& cache, const Batch& grad_out,
                     std::span<double> param_grad) const {
  if (params_.kind == NormKind::none) return grad_out;
  const std::size_t channels = params_.gamma.size();
  std::span<double> dgamma = param_grad.subspan(0, channels);
  std::span<double> dbeta = param_grad.subspan(channels, channels);

  Batch gin;
  for (const auto& g : grad_out) gin.emplace_back(g.channels(), g.height(), g.width());

  // Groups of samples that share statistics.
  std::vector<std::vector<std::size_t>> groups;
  if (params_.kind == NormKind::instance) {
    for (std::size_t n = 0; n < grad_out.size(); ++n) groups.push_back({n});
  } else {
    groups.emplace_back();
    for (std::size_t n = 0; n < grad_out.size(); ++n) groups.back().push_back(n);
  }

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const ChannelStats& st = cache.stats[gi];
    const auto& members = groups[gi];
    for (std::size_t c = 0; c < channels; ++c) {
      const double inv_s = 1.0 / std::sqrt(st.var[c] + params_.eps);
      double count = 0.0, sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
      for (std::size_t n : members) {
        auto x = cache.inputs[n].plane(c);
        auto g = grad_out[n].plane(c);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double xhat = (x[i] - st.mean[c]) * inv_s;
          dgamma[c] += g[i] * xhat;
          dbeta[c] += g[i];
          const double dxhat = g[i] * params_.gamma[c];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat;
        }
        count += static_cast<double>(x.size());
      }
      const double mean_dxhat = sum_dxhat / count;
      const double mean_dxhat_xhat = sum_dxhat_xhat / count;
      for (std::size_t n : members) {
        auto x = cache.inputs[n].plane(c);
        auto g = grad_out[n].plane(c);
        auto dst = gin[n].plane(c);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const double xhat = (x[i] - st.mean[c]) * inv_s;
          const double dxhat = g[i] * params_.gamma[c];
          dst[i] = inv_s * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
    }
  }
  return gin;
}

std::vector<std::span<double>> Norm::parameters() {
  if (params_.kind == NormKind::none) return {};
  return {std::span<double>(params_.gamma), std::span<double>(params_.beta)};
}

std::size_t Norm::parameter_count() const {
  if (params_.kind == NormKind::none) return 0;
  return params_.gamma.size() + params_.beta.size();
}

std::vector<std::span<double>> Norm::buffers() {
  if (params_.kind != NormKind::batch) return {};
  return {std::span<double>(params_.running_mean), std::span<double>(params_.running_var),
          std::span<double>(frozen_flag_)};
}

void Norm::freeze(const LayerCache& cache) {
  if (params_.kind != NormKind::batch || cache.stats.empty()) return;
  params_.running_mean = cache.stats.front().mean;
  params_.running_var = cache.stats.front().var;
  params_.frozen = true;
  frozen_flag_[0] = 1.0;
}

// ---- Activation ----

Batch Activation::forward(const Batch& in, Mode, LayerCache* cache) const {
  Batch out;
  out.reserve(in.size());
  for (const auto& x : in) out.push_back(activate(x, kind_));
  if (cache) cache->inputs = in;
  return out;
}

Batch Activation::backward(const LayerCache& cache, const Batch& grad_out,
                           std::span<double>) const {
  Batch gin = grad_out;
  if (kind_ == ActKind::none) return gin;
  for (std::size_t n = 0; n < gin.size(); ++n) {
    auto x = cache.inputs[n].values();
    auto g = gin[n].values();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= activation_derivative(x[i], kind_);
  }
  return gin;
}

// ---- Sequential ----

Sequential::Sequential(const Sequential& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    Sequential tmp(other);
    layers_ = std::move(tmp.layers_);
  }
  return *this;
}

Batch Sequential::forward(const Batch& in, Mode mode) const {
  Batch cur = in;
  for (const auto& l : layers_) cur = l->forward(cur, mode, nullptr);
  return cur;
}

std::vector<Batch> Sequential::forward_taps(const Batch& in, Mode mode) const {
  std::vector<Batch> taps;
  taps.reserve(layers_.size());
  const Batch* cur = &in;
  for (const auto& l : layers_) {
    taps.push_back(l->forward(*cur, mode, nullptr));
    cur = &taps.back();
  }
  return taps;
}

Sequential::Tape Sequential::forward_train(const Batch& in) const {
  Tape tape;
  tape.caches.resize(layers_.size());
  Batch cur = in;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    cur = layers_[i]->forward(cur, Mode::train, &tape.caches[i]);
  tape.output = std::move(cur);
  return tape;
}

std::vector<double> Sequential::backward(const Tape& tape, const Batch& grad_out,
                                         Batch* grad_input) const {
  std::vector<std::size_t> offsets(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i)
    offsets[i + 1] = offsets[i] + layers_[i]->parameter_count();
  std::vector<double> grad(offsets.back(), 0.0);
  Batch g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    std::span<double> slot(grad.data() + offsets[i], offsets[i + 1] - offsets[i]);
    g = layers_[i]->backward(tape.caches[i], g, slot);
  }
  if (grad_input) *grad_input = std::move(g);
  return grad;
}

std::size_t Sequential::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l->parameter_count();
  return n;
}

std::vector<double> Sequential::get_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers_)
    for (auto s : l->parameters()) flat.insert(flat.end(), s.begin(), s.end());
  return flat;
}

void Sequential::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw DataError("parameter vector length mismatch");
  std::size_t pos = 0;
  for (auto& l : layers_)
    for (auto s : l->parameters()) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size()), s.begin());
      pos += s.size();
    }
}

std::vector<double> Sequential::get_state() const {
  std::vector<double> flat = get_parameters();
  for (const auto& l : layers_)
    for (auto s : l->buffers()) flat.insert(flat.end(), s.begin(), s.end());
  return flat;
}

void Sequential::set_state(std::span<const double> flat) {
  std::size_t buffer_total = 0;
  for (auto& l : layers_) buffer_total += total_size(l->buffers());
  const std::size_t np = parameter_count();
  if (flat.size() != np + buffer_total) throw DataError("state vector length mismatch");
  set_parameters(flat.subspan(0, np));
  std::size_t pos = np;
  for (auto& l : layers_)
    for (auto s : l->buffers()) {
      std::copy(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size()), s.begin());
      pos += s.size();
    }
}

void Sequential::freeze(const Tape& tape) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->freeze(tape.caches[i]);
}

}  // namespace specprint::nn
