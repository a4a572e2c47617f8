#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "specprint/conv.hpp"
#include "specprint/norm_act.hpp"
#include "specprint/tensor.hpp"
#include "specprint/upsample.hpp"

// Minimal layer stack with hand-written backward passes. Layers are immutable during a
// forward pass; everything the backward pass needs lives in a LayerCache owned by the
// caller, so one network can be evaluated from several threads at once.
namespace specprint::nn {

using Batch = std::vector<Tensor3>;

enum class Mode { train, infer };

struct LayerCache {
  Batch inputs;
  Batch outputs;
  /// Normalization: statistics used in the forward pass (one entry per sample for
  /// instance norm, a single entry for batch norm).
  std::vector<ChannelStats> stats;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string name() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// `cache` may be null when no backward pass follows.
  virtual Batch forward(const Batch& in, Mode mode, LayerCache* cache) const = 0;
  /// Returns dL/d(input); writes dL/d(parameters) into `param_grad` (length
  /// parameter_count(), same order as parameters()).
  virtual Batch backward(const LayerCache& cache, const Batch& grad_out,
                         std::span<double> param_grad) const = 0;

  virtual std::vector<std::span<double>> parameters() { return {}; }
  virtual std::size_t parameter_count() const { return 0; }
  /// Non-trainable state that must survive serialization.
  virtual std::vector<std::span<double>> buffers() { return {}; }
  /// Called once after training with the cache of the last training batch.
  virtual void freeze(const LayerCache&) {}
};

/// 2x2 average pooling, stride 2.
class AvgPool2 final : public Layer {
 public:
  std::string name() const override { return "pool"; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2>(*this); }
  Batch forward(const Batch& in, Mode mode, LayerCache* cache) const override;
  Batch backward(const LayerCache& cache, const Batch& grad_out,
                 std::span<double> param_grad) const override;
};

/// Zero-same convolution with learnable weights and bias.
class Conv final : public Layer {
 public:
  Conv(std::string name, ConvKernel kernel) : name_(std::move(name)), kernel_(std::move(kernel)) {}

  std::string name() const override { return name_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv>(*this); }
  Batch forward(const Batch& in, Mode mode, LayerCache* cache) const override;
  Batch backward(const LayerCache& cache, const Batch& grad_out,
                 std::span<double> param_grad) const override;
  std::vector<std::span<double>> parameters() override;
  std::size_t parameter_count() const override;

  const ConvKernel& kernel() const { return kernel_; }
  ConvKernel& kernel() { return kernel_; }

 private:
  std::string name_;
  ConvKernel kernel_;
};

/// Zero interleave followed by K_up; fixed for nearest/bilinear, learnable for deconv.
class Upsample final : public Layer {
 public:
  explicit Upsample(UpsampleMode mode) : mode_(std::move(mode)) {}

  std::string name() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Upsample>(*this); }
  Batch forward(const Batch& in, Mode mode, LayerCache* cache) const override;
  Batch backward(const LayerCache& cache, const Batch& grad_out,
                 std::span<double> param_grad) const override;
  std::vector<std::span<double>> parameters() override;
  std::size_t parameter_count() const override;

  const UpsampleMode& mode() const { return mode_; }

 private:
  UpsampleMode mode_;
};

/// Batch or instance normalization with learnable per-channel gamma and beta.
class Norm final : public Layer {
 public:
  Norm(std::string name, NormParams params) : name_(std::move(name)), params_(std::move(params)) {}

  std::string name() const override { return name_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Norm>(*this); }
  Batch forward(const Batch& in, Mode mode, LayerCache* cache) const override;
  Batch backward(const LayerCache& cache, const Batch& grad_out,
                 std::span<double> param_grad) const override;
  std::vector<std::span<double>> parameters() override;
  std::size_t parameter_count() const override;
  std::vector<std::span<double>> buffers() override;
  void freeze(const LayerCache& cache) override;

  const NormParams& params() const { return params_; }
  bool frozen() const { return params_.frozen || frozen_flag_[0] != 0.0; }

 private:
  std::string name_;
  NormParams params_;
  // Mirrors params_.frozen as a buffer so it survives set_state.
  std::vector<double> frozen_flag_{0.0};
};

class Activation final : public Layer {
 public:
  Activation(std::string name, ActKind kind) : name_(std::move(name)), kind_(kind) {}

  std::string name() const override { return name_; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Activation>(*this); }
  Batch forward(const Batch& in, Mode mode, LayerCache* cache) const override;
  Batch backward(const LayerCache& cache, const Batch& grad_out,
                 std::span<double> param_grad) const override;

 private:
  std::string name_;
  ActKind kind_;
};

/// Ordered layer chain. Copyable (deep copy).
class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  Layer& layer(std::size_t i) { return *layers_[i]; }

  Batch forward(const Batch& in, Mode mode = Mode::infer) const;
  /// Output of every layer, in execution order.
  std::vector<Batch> forward_taps(const Batch& in, Mode mode = Mode::infer) const;

  struct Tape {
    std::vector<LayerCache> caches;
    Batch output;
  };
  Tape forward_train(const Batch& in) const;
  /// Flat parameter gradient for dL/d(output) = grad_out. Optionally returns dL/d(input).
  std::vector<double> backward(const Tape& tape, const Batch& grad_out,
                               Batch* grad_input = nullptr) const;

  std::size_t parameter_count() const;
  std::vector<double> get_parameters() const;
  void set_parameters(std::span<const double> flat);
  /// Parameters followed by buffers.
  std::vector<double> get_state() const;
  void set_state(std::span<const double> flat);

  void freeze(const Tape& tape);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace specprint::nn
