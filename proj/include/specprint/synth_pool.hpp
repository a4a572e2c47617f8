#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "specprint/nn.hpp"
#include "specprint/rng.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

/// Where normalization and activation sit relative to each block convolution.
enum class BlockOrder { post, pre };  // post: conv, norm, act; pre: norm, act, conv

struct BlockConfig {
  int layers = 1;  ///< 1 or 2
  BlockOrder order = BlockOrder::post;
  UpsampleKind up = UpsampleKind::nearest;
  ActKind act = ActKind::relu;
  NormKind norm = NormKind::none;
  std::uint64_t seed = 0;
  std::size_t feature_dim = 16;
  std::size_t kernel = 3;

  /// Architecture part only, e.g. "L2-pre-bilinear-tanh-batch".
  std::string arch_name() const;
  /// Architecture plus seed.
  std::string name() const;
};

struct GridGenConfig {
  int num_blocks = 3;  ///< 3, 4 or 5
  std::uint64_t seed = 0;
  std::size_t channels = 8;

  std::string name() const;
};

const char* to_string(UpsampleKind k);
const char* to_string(ActKind k);
const char* to_string(NormKind k);
const char* to_string(BlockOrder k);

struct TrainOptions {
  double learning_rate = 0.01;
  double clip_norm = 1.0;
  int max_steps = 2000;
  std::size_t batch_size = 4;
  double target = 0.005;
};

struct TrainReport {
  int steps = 0;
  double final_residual = 0.0;
  std::vector<double> history;  ///< batch loss before each update
};

/// Autoencoder-style generator: 2x2 average pool, entry conv (3 -> F), one generative
/// block (L convs with norm/activation in the configured order), upsample, exit conv (F -> 3).
class FreqGenModel {
 public:
  FreqGenModel() = default;
  /// Random init, uniform in +-1/sqrt(fan_in), drawn from Rng(config.seed).
  explicit FreqGenModel(const BlockConfig& config);
  /// Every convolution passes its input channel straight through (deconv kernels are the
  /// nearest kernel per channel). Useful as a smoothing reference.
  static FreqGenModel identity(const BlockConfig& config);

  const BlockConfig& config() const { return config_; }
  const nn::Sequential& net() const { return net_; }
  nn::Sequential& net() { return net_; }

  Tensor3 forward(const Tensor3& img) const;
  /// (layer name, output) for every layer in execution order.
  std::vector<std::pair<std::string, Tensor3>> taps(const Tensor3& img) const;

  bool trained = false;
  double final_residual = 0.0;
  int steps = 0;

 private:
  BlockConfig config_;
  nn::Sequential net_;
};

/// Gradient descent on the mean absolute reconstruction residual. Batches cycle through
/// `images` in order. Batch-norm statistics are frozen from the final batch.
TrainReport train_freq_generator(FreqGenModel& model, const std::vector<Tensor3>& images,
                                 const TrainOptions& options = {});

/// Mean absolute per-pixel residual |forward(x) - x| over the images.
double reconstruction_residual(const FreqGenModel& model, const std::vector<Tensor3>& images);

/// num_blocks x (stride-2 deconvolution, k = 4; convolution, k = 3), ReLU between blocks.
/// Input noise has `channels` channels at 1/2^n of the output resolution; output has 3.
class GridGenModel {
 public:
  GridGenModel() = default;
  explicit GridGenModel(const GridGenConfig& config);

  const GridGenConfig& config() const { return config_; }
  const nn::Sequential& net() const { return net_; }
  nn::Sequential& net() { return net_; }

  Tensor3 forward(const Tensor3& z) const;
  /// Unit Gaussian input for an output of rows x cols (both divisible by 2^n).
  Tensor3 sample_input(std::size_t rows, std::size_t cols, Rng& rng) const;
  Tensor3 sample(std::size_t rows, std::size_t cols, Rng& rng) const;

  bool trained = false;
  double final_magnitude = 0.0;
  int steps = 0;

 private:
  GridGenConfig config_;
  nn::Sequential net_;
};

struct GridTrainOptions {
  double learning_rate = 0.01;
  double clip_norm = 1.0;
  int max_steps = 500;
  std::size_t batch_size = 4;
  double target = 0.005;
  double tolerance = 0.0005;  ///< stop once |mean-abs - target| is below this
  std::size_t output_size = 32;  ///< training output resolution; input is output / 2^n
};

/// Minimizes |mean|output| - target| from fresh unit Gaussian inputs each step.
TrainReport train_grid_generator(GridGenModel& model, const GridTrainOptions& options = {});

/// img + noise, clamped to [0, 1]. Noise size must match the image.
Tensor3 apply_grid_noise(const Tensor3& img, const Tensor3& noise);
Tensor3 apply_grid_noise(const Tensor3& img, const GridGenModel& model, Rng& rng);

/// Mean |F| on the lattice of multiples of size / 2^n (DC excluded) over the median |F|
/// off the lattice, from the channel-mean magnitude spectrum.
double lattice_peak_ratio(const Tensor3& noise, int num_blocks);

enum class PoolScale { desk, full };

struct PoolPlan {
  std::vector<BlockConfig> freq;
  std::vector<GridGenConfig> grid;
};

/// Full scale: 20 seeds x 144 architectures and 500 grid models per depth. Desk scale:
/// `seeds_per_config` of each. Seeds are derived from `base_seed` and the position.
PoolPlan enumerate_pool(PoolScale scale, std::size_t seeds_per_config = 1,
                        std::uint64_t base_seed = 0);

/// `freq_models` freq configs spread evenly over the plan (index i * size / n), all grid
/// configs. The 20-generator desk pool is desk_subset(enumerate_pool(desk), 17).
PoolPlan desk_subset(const PoolPlan& plan, std::size_t freq_models);
inline constexpr std::size_t kDeskFreqModels = 17;

/// Either family behind one id.
struct PoolMember {
  bool is_grid = false;
  FreqGenModel freq;
  GridGenModel grid;

  std::string name() const { return is_grid ? grid.config().name() : freq.config().name(); }
  /// One generated image from a real source image (freq) or by overlaying noise (grid).
  Tensor3 generate(const Tensor3& source, Rng& rng) const;
};

struct PoolTrainOptions {
  TrainOptions freq;
  GridTrainOptions grid;
  std::size_t jobs = 1;
};

/// Trains every planned model; member i uses only its own data and Rng, so results do
/// not depend on `jobs`.
std::vector<PoolMember> train_pool(const PoolPlan& plan, const std::vector<Tensor3>& images,
                                   const PoolTrainOptions& options);

struct LabeledImage {
  Tensor3 image;
  std::size_t label = 0;
  std::size_t source = 0;  ///< index of the source image
};

/// Random crop of each drawn source image, passed through a uniformly drawn pool member.
std::vector<LabeledImage> synth_dataset(const std::vector<PoolMember>& pool,
                                        const std::vector<Tensor3>& images, std::size_t count,
                                        std::size_t crop, Rng& rng, std::size_t jobs = 1);

Tensor3 random_crop(const Tensor3& img, std::size_t crop, Rng& rng);

/// Power-law colour images used as the default training corpus.
std::vector<Tensor3> power_law_corpus(std::size_t count, std::size_t size, std::uint64_t seed);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace specprint
