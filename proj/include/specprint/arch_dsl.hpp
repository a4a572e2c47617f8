#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "specprint/conv.hpp"
#include "specprint/error.hpp"
#include "specprint/norm_act.hpp"
#include "specprint/rng.hpp"
#include "specprint/synth_pool.hpp"
#include "specprint/tensor.hpp"
#include "specprint/upsample.hpp"

// Text form of a generator architecture:
//
//   input(3,32,32)                      # channels, height, width
//   block(u=deconv,k=3,ch=16,pad=zero,norm=batch,act=relu,sc=false,seq=post)
//
// u, k and ch are required; pad=zero, norm=none, act=none, sc=false, seq=post otherwise.
// Whitespace is free and '#' starts a comment.
namespace specprint {

enum class PadKind { zero, circular };

struct BlockSpec {
  UpsampleKind u = UpsampleKind::nearest;
  std::size_t k = 3;   ///< odd
  std::size_t ch = 1;  ///< output channels of the block convolution
  PadKind pad = PadKind::zero;
  NormKind norm = NormKind::none;
  ActKind act = ActKind::none;
  bool sc = false;
  BlockOrder seq = BlockOrder::post;

  bool operator==(const BlockSpec&) const = default;
};

struct ArchSpec {
  std::size_t channels = 3, height = 32, width = 32;
  std::vector<BlockSpec> blocks;

  bool operator==(const ArchSpec&) const = default;
};

inline constexpr std::size_t kMaxResolution = 8192;

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& message);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_, column_;
  std::string detail_;
};

ArchSpec parse_arch(std::string_view text);
/// Canonical text: header line, then one line per block with every key. Throws DataError
/// on a spec without blocks.
std::string print_arch(const ArchSpec& spec);

/// Number of taps forward_sim reports: upsample and conv per block, plus norm, activation
/// and shortcut where present.
std::size_t component_count(const ArchSpec& spec);

/// Concrete weights for a spec. Deconvolution keeps the channel count (k = 4); the block
/// convolution maps to `ch`. Normalization uses unit gamma and zero beta.
struct ArchModel {
  ArchSpec spec;
  std::vector<std::optional<ConvKernel>> deconv;
  std::vector<ConvKernel> conv;

  static ArchModel instantiate(const ArchSpec& spec, Rng& rng);
};

struct SimResult {
  Tensor3 output;
  std::vector<std::pair<std::string, Tensor3>> taps;
};

/// Runs the block chain spatially. Normalization uses the statistics of the single input.
/// The shortcut adds the bilinear upsampled block input, or its channel mean when the
/// channel counts differ.
SimResult forward_sim(const ArchModel& model, const Tensor3& input);
SimResult forward_sim(const ArchSpec& spec, const Tensor3& input, Rng& rng);

/// Magnitude-spectrum estimate of the output given the input's mean magnitude spectrum:
/// repeat and multiply by |K_up| per upsample, by the (o, i)-averaged |K| per convolution;
/// normalization rescales to unit variance (no eps) with zero DC; activations pass through; the
/// shortcut adds its bilinear branch.
Matrix predict_spectrum(const ArchModel& model, const Matrix& input_mean_spectrum);

/// Mean over (o, i) of the transfer magnitude of each kernel slice on a rows x cols lattice.
Matrix averaged_transfer_magnitude(const ConvKernel& kernel, std::size_t rows, std::size_t cols);

const char* to_string(PadKind k);

}  // namespace specprint
