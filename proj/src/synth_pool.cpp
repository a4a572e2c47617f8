#include "specprint/synth_pool.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/synthetic_images.hpp"

namespace specprint {

const char* to_string(UpsampleKind k) {
  switch (k) {
    case UpsampleKind::nearest: return "nearest";
    case UpsampleKind::bilinear: return "bilinear";
    case UpsampleKind::deconv: return "deconv";
  }
  return "?";
}

const char* to_string(ActKind k) {
  switch (k) {
    case ActKind::relu: return "relu";
    case ActKind::sigmoid: return "sigmoid";
    case ActKind::tanh: return "tanh";
    case ActKind::none: return "none";
  }
  return "?";
}

const char* to_string(NormKind k) {
  switch (k) {
    case NormKind::batch: return "batch";
    case NormKind::instance: return "instance";
    case NormKind::none: return "none";
  }
  return "?";
}

const char* to_string(BlockOrder k) { return k == BlockOrder::post ? "post" : "pre"; }

std::string BlockConfig::arch_name() const {
  return "L" + std::to_string(layers) + "-" + to_string(order) + "-" + to_string(up) + "-" +
         to_string(act) + "-" + to_string(norm);
}

std::string BlockConfig::name() const { return arch_name() + "-s" + std::to_string(seed); }

std::string GridGenConfig::name() const {
  return "grid" + std::to_string(num_blocks) + "-s" + std::to_string(seed);
}

// ---- frequency-pattern generators ----

namespace {

using nn::Batch;

void check_config(const BlockConfig& c) {
  if (c.layers != 1 && c.layers != 2) throw DataError("block layer count must be 1 or 2");
  if (c.feature_dim == 0 || c.kernel == 0) throw DataError("feature_dim and kernel must be positive");
}

ConvKernel passthrough(std::size_t in, std::size_t out, std::size_t k) {
  ConvKernel kernel(in, out, k);
  const std::size_t a = kernel.anchor();
  for (std::size_t c = 0; c < std::min(in, out); ++c) kernel.w(c, c, a, a) = 1.0;
  return kernel;
}

// Layers are built in a fixed order so the Rng draws, and therefore the weights, depend
// only on the config.
nn::Sequential build_freq_net(const BlockConfig& c, bool identity) {
  Rng rng(c.seed);
  const std::size_t f = c.feature_dim;
  auto conv = [&](std::size_t in, std::size_t out) {
    return identity ? passthrough(in, out, c.kernel) : ConvKernel::random(in, out, c.kernel, rng);
  };

  nn::Sequential net;
  net.add(std::make_unique<nn::AvgPool2>());
  net.add(std::make_unique<nn::Conv>("entry_conv", conv(3, f)));
  for (int l = 1; l <= c.layers; ++l) {
    const std::string idx = std::to_string(l);
    auto add_norm_act = [&] {
      if (c.norm != NormKind::none)
        net.add(std::make_unique<nn::Norm>("norm" + idx + "." + to_string(c.norm),
                                           NormParams::make(c.norm, f)));
      if (c.act != ActKind::none)
        net.add(std::make_unique<nn::Activation>("act" + idx + "." + to_string(c.act), c.act));
    };
    if (c.order == BlockOrder::pre) add_norm_act();
    net.add(std::make_unique<nn::Conv>("conv" + idx, conv(f, f)));
    if (c.order == BlockOrder::post) add_norm_act();
  }
  if (c.up == UpsampleKind::deconv) {
    ConvKernel k(f, f, 4);
    if (identity) {
      for (std::size_t ch = 0; ch < f; ++ch)
        for (std::size_t a = 1; a <= 2; ++a)
          for (std::size_t b = 1; b <= 2; ++b) k.w(ch, ch, a, b) = 1.0;
    } else {
      k = ConvKernel::random(f, f, 4, rng);
    }
    net.add(std::make_unique<nn::Upsample>(UpsampleMode::deconvolution(std::move(k))));
  } else {
    net.add(std::make_unique<nn::Upsample>(c.up == UpsampleKind::nearest ? UpsampleMode::nearest()
                                                                          : UpsampleMode::bilinear()));
  }
  net.add(std::make_unique<nn::Conv>("exit_conv", conv(f, 3)));
  return net;
}

void clip_and_step(nn::Sequential& net, std::vector<double>& grad, double lr, double clip) {
  double norm = 0.0;
  for (double g : grad) norm += g * g;
  norm = std::sqrt(norm);
  const double scale = (clip > 0.0 && norm > clip) ? clip / norm : 1.0;
  std::vector<double> theta = net.get_parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * scale * grad[i];
  net.set_parameters(theta);
}

Batch cyclic_batch(const std::vector<Tensor3>& images, std::size_t& cursor, std::size_t size) {
  Batch b;
  const std::size_t n = std::min(size, images.size());
  for (std::size_t i = 0; i < n; ++i) {
    b.push_back(images[cursor]);
    cursor = (cursor + 1) % images.size();
  }
  return b;
}

}  // namespace

FreqGenModel::FreqGenModel(const BlockConfig& config) : config_(config) {
  check_config(config);
  net_ = build_freq_net(config, false);
}

FreqGenModel FreqGenModel::identity(const BlockConfig& config) {
  check_config(config);
  FreqGenModel m;
  m.config_ = config;
  m.net_ = build_freq_net(config, true);
  return m;
}

Tensor3 FreqGenModel::forward(const Tensor3& img) const {
  if (img.channels() != 3) throw DataError("generator input must have 3 channels");
  return net_.forward({img}).front();
}

std::vector<std::pair<std::string, Tensor3>> FreqGenModel::taps(const Tensor3& img) const {
  if (img.channels() != 3) throw DataError("generator input must have 3 channels");
  auto outs = net_.forward_taps({img});
  std::vector<std::pair<std::string, Tensor3>> named;
  for (std::size_t i = 0; i < outs.size(); ++i)
    named.emplace_back(net_.layer(i).name(), std::move(outs[i].front()));
  return named;
}

double reconstruction_residual(const FreqGenModel& model, const std::vector<Tensor3>& images) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& x : images) {
    const Tensor3 y = model.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) total += std::abs(y.values()[i] - x.values()[i]);
    count += x.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

TrainReport train_freq_generator(FreqGenModel& model, const std::vector<Tensor3>& images,
                                 const TrainOptions& options) {
  if (images.empty()) throw DataError("training needs at least one image");
  TrainReport report;
  nn::Sequential& net = model.net();
  std::size_t cursor = 0;
  Batch batch;
  for (int step = 0; step < options.max_steps; ++step) {
    batch = cyclic_batch(images, cursor, options.batch_size);
    const auto tape = net.forward_train(batch);
    double loss = 0.0;
    std::size_t count = 0;
    for (const auto& x : batch) count += x.size();
    Batch grad_out;
    for (std::size_t n = 0; n < batch.size(); ++n) {
      Tensor3 g(batch[n].channels(), batch[n].height(), batch[n].width());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = tape.output[n].values()[i] - batch[n].values()[i];
        loss += std::abs(d);
        g.values()[i] = (d > 0) - (d < 0);
      }
      for (double& v : g.values()) v /= static_cast<double>(count);
      grad_out.push_back(std::move(g));
    }
    loss /= static_cast<double>(count);
    if (!std::isfinite(loss))
      throw DivergenceError("training diverged for " + model.config().name() + " at step " +
                            std::to_string(step));
    report.history.push_back(loss);
    if (loss <= options.target) break;
    std::vector<double> grad = net.backward(tape, grad_out);
    clip_and_step(net, grad, options.learning_rate, options.clip_norm);
    ++report.steps;
  }
  if (batch.empty()) batch = cyclic_batch(images, cursor, options.batch_size);
  net.freeze(net.forward_train(batch));
  report.final_residual = reconstruction_residual(model, images);
  if (!std::isfinite(report.final_residual))
    throw DivergenceError("training diverged for " + model.config().name());
  model.trained = true;
  model.final_residual = report.final_residual;
  model.steps = report.steps;
  return report;
}

// ---- grid generators ----

GridGenModel::GridGenModel(const GridGenConfig& config) : config_(config) {
  if (config.num_blocks < 1 || config.num_blocks > 12) throw DataError("grid depth out of range");
  if (config.channels == 0) throw DataError("grid channels must be positive");
  Rng rng(config.seed);
  const std::size_t ch = config.channels;
  for (int b = 1; b <= config.num_blocks; ++b) {
    const bool last = b == config.num_blocks;
    net_.add(std::make_unique<nn::Upsample>(
        UpsampleMode::deconvolution(ConvKernel::random(ch, ch, 4, rng))));
    net_.add(std::make_unique<nn::Conv>("conv" + std::to_string(b),
                                        ConvKernel::random(ch, last ? 3 : ch, 3, rng)));
    if (!last) net_.add(std::make_unique<nn::Activation>("act" + std::to_string(b) + ".relu", ActKind::relu));
  }
}

Tensor3 GridGenModel::forward(const Tensor3& z) const {
  if (z.channels() != config_.channels)
    throw DataError("grid input has " + std::to_string(z.channels()) + " channels, expected " +
                    std::to_string(config_.channels));
  return net_.forward({z}).front();
}

Tensor3 GridGenModel::sample_input(std::size_t rows, std::size_t cols, Rng& rng) const {
  const std::size_t f = std::size_t{1} << config_.num_blocks;
  if (rows % f || cols % f || rows == 0 || cols == 0)
    throw DataError("grid output " + std::to_string(rows) + "x" + std::to_string(cols) +
                    " is not divisible by " + std::to_string(f));
  Tensor3 z(config_.channels, rows / f, cols / f);
  for (double& v : z.values()) v = rng.normal();
  return z;
}

Tensor3 GridGenModel::sample(std::size_t rows, std::size_t cols, Rng& rng) const {
  return forward(sample_input(rows, cols, rng));
}

TrainReport train_grid_generator(GridGenModel& model, const GridTrainOptions& options) {
  TrainReport report;
  nn::Sequential& net = model.net();
  Rng rng = Rng::derive(model.config().seed, 0x6772696400ULL);
  auto mean_abs = [](const Batch& out, std::size_t& count) {
    double s = 0.0;
    count = 0;
    for (const auto& t : out) {
      for (double v : t.values()) s += std::abs(v);
      count += t.size();
    }
    return s / static_cast<double>(count);
  };
  for (int step = 0; step < options.max_steps; ++step) {
    Batch z;
    for (std::size_t i = 0; i < options.batch_size; ++i)
      z.push_back(model.sample_input(options.output_size, options.output_size, rng));
    const auto tape = net.forward_train(z);
    std::size_t count = 0;
    const double m = mean_abs(tape.output, count);
    if (!std::isfinite(m))
      throw DivergenceError("training diverged for " + model.config().name() + " at step " +
                            std::to_string(step));
    const double loss = std::abs(m - options.target);
    report.history.push_back(loss);
    if (loss <= options.tolerance) break;
    const double outer = (m > options.target ? 1.0 : -1.0) / static_cast<double>(count);
    Batch grad_out;
    for (const auto& t : tape.output) {
      Tensor3 g(t.channels(), t.height(), t.width());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = t.values()[i];
        g.values()[i] = outer * static_cast<double>((v > 0) - (v < 0));
      }
      grad_out.push_back(std::move(g));
    }
    std::vector<double> grad = net.backward(tape, grad_out);
    clip_and_step(net, grad, options.learning_rate, options.clip_norm);
    ++report.steps;
  }
  // Fresh draws for the recorded magnitude.
  Rng eval = Rng::derive(model.config().seed, 0x6576616cULL);
  Batch z;
  for (std::size_t i = 0; i < options.batch_size; ++i)
    z.push_back(model.sample_input(options.output_size, options.output_size, eval));
  std::size_t count = 0;
  report.final_residual = mean_abs(net.forward(z), count);
  model.trained = true;
  model.final_magnitude = report.final_residual;
  model.steps = report.steps;
  return report;
}

Tensor3 apply_grid_noise(const Tensor3& img, const Tensor3& noise) {
  if (!img.same_shape(noise)) throw DataError("grid noise does not match the image size");
  Tensor3 out = img;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = std::clamp(out.values()[i] + noise.values()[i], 0.0, 1.0);
  return out;
}

Tensor3 apply_grid_noise(const Tensor3& img, const GridGenModel& model, Rng& rng) {
  return apply_grid_noise(img, model.sample(img.height(), img.width(), rng));
}

double lattice_peak_ratio(const Tensor3& noise, int num_blocks) {
  const std::size_t m = noise.height(), n = noise.width();
  const std::size_t f = std::size_t{1} << num_blocks;
  if (m % f || n % f) throw DataError("noise size is not divisible by 2^n");
  const std::size_t pu = m / f, pv = n / f;
  Matrix mag(m, n);
  for (std::size_t c = 0; c < noise.channels(); ++c) {
    const Matrix mc = magnitude(dft2(noise.channel(c)));
    for (std::size_t i = 0; i < mag.size(); ++i) mag.values()[i] += mc.values()[i];
  }
  double on = 0.0;
  std::size_t on_count = 0;
  std::vector<double> off;
  for (std::size_t u = 0; u < m; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      if (u % pu == 0 && v % pv == 0) {
        if (u || v) {
          on += mag(u, v);
          ++on_count;
        }
      } else {
        off.push_back(mag(u, v));
      }
    }
  if (off.empty() || on_count == 0) throw DataError("noise too small for a lattice comparison");
  auto mid = off.begin() + static_cast<std::ptrdiff_t>(off.size() / 2);
  std::nth_element(off.begin(), mid, off.end());
  const double median = *mid;
  const double mean_on = on / static_cast<double>(on_count);
  return median > 0.0 ? mean_on / median : std::numeric_limits<double>::infinity();
}

// ---- pool ----

PoolPlan enumerate_pool(PoolScale scale, std::size_t seeds_per_config, std::uint64_t base_seed) {
  const std::size_t freq_seeds = scale == PoolScale::full ? 20 : seeds_per_config;
  const std::size_t grid_seeds = scale == PoolScale::full ? 500 : seeds_per_config;
  PoolPlan plan;
  std::uint64_t index = 0;
  for (std::size_t s = 0; s < freq_seeds; ++s)
    for (int layers : {1, 2})
      for (auto order : {BlockOrder::post, BlockOrder::pre})
        for (auto up : {UpsampleKind::nearest, UpsampleKind::bilinear, UpsampleKind::deconv})
          for (auto act : {ActKind::relu, ActKind::sigmoid, ActKind::tanh, ActKind::none})
            for (auto norm : {NormKind::batch, NormKind::instance, NormKind::none}) {
              BlockConfig c;
              c.layers = layers;
              c.order = order;
              c.up = up;
              c.act = act;
              c.norm = norm;
              c.seed = splitmix64(base_seed ^ splitmix64(index++));
              plan.freq.push_back(c);
            }
  for (std::size_t s = 0; s < grid_seeds; ++s)
    for (int blocks : {3, 4, 5}) {
      GridGenConfig g;
      g.num_blocks = blocks;
      g.seed = splitmix64(base_seed ^ splitmix64(index++));
      plan.grid.push_back(g);
    }
  return plan;
}

PoolPlan desk_subset(const PoolPlan& plan, std::size_t freq_models) {
  if (freq_models > plan.freq.size()) throw DataError("asked for more freq models than the plan has");
  PoolPlan sub;
  for (std::size_t i = 0; i < freq_models; ++i) sub.freq.push_back(plan.freq[(i * plan.freq.size()) / freq_models]);
  sub.grid = plan.grid;
  return sub;
}

Tensor3 PoolMember::generate(const Tensor3& source, Rng& rng) const {
  if (is_grid) return apply_grid_noise(source, grid, rng);
  Tensor3 out = freq.forward(source);
  for (double& v : out.values()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < jobs; ++t)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

std::vector<PoolMember> train_pool(const PoolPlan& plan, const std::vector<Tensor3>& images,
                                   const PoolTrainOptions& options) {
  std::vector<PoolMember> pool(plan.freq.size() + plan.grid.size());
  parallel_for(pool.size(), options.jobs, [&](std::size_t i) {
    PoolMember& m = pool[i];
    if (i < plan.freq.size()) {
      m.freq = FreqGenModel(plan.freq[i]);
      train_freq_generator(m.freq, images, options.freq);
    } else {
      m.is_grid = true;
      m.grid = GridGenModel(plan.grid[i - plan.freq.size()]);
      train_grid_generator(m.grid, options.grid);
    }
  });
  return pool;
}

Tensor3 random_crop(const Tensor3& img, std::size_t crop, Rng& rng) {
  if (img.height() < crop || img.width() < crop)
    throw DataError("image " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                    " is smaller than the crop size " + std::to_string(crop));
  const std::size_t y0 = rng.below(img.height() - crop + 1);
  const std::size_t x0 = rng.below(img.width() - crop + 1);
  Tensor3 out(img.channels(), crop, crop);
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t y = 0; y < crop; ++y)
      for (std::size_t x = 0; x < crop; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

std::vector<LabeledImage> synth_dataset(const std::vector<PoolMember>& pool,
                                        const std::vector<Tensor3>& images, std::size_t count,
                                        std::size_t crop, Rng& rng, std::size_t jobs) {
  if (pool.empty()) throw DataError("empty model pool");
  if (images.empty()) throw DataError("no source images");
  std::vector<LabeledImage> out(count);
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].source = rng.below(images.size());
    out[i].label = rng.below(pool.size());
    seeds[i] = rng.next_u64();
  }
  parallel_for(count, jobs, [&](std::size_t i) {
    Rng local(seeds[i]);
    const Tensor3 patch = random_crop(images[out[i].source], crop, local);
    out[i].image = pool[out[i].label].generate(patch, local);
  });
  return out;
}

std::vector<Tensor3> power_law_corpus(std::size_t count, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor3> images;
  images.reserve(count);
  for (std::size_t i = 0; i < count; ++i) images.push_back(random_power_law_tensor(3, size, size, rng));
  return images;
}

}  // namespace specprint
