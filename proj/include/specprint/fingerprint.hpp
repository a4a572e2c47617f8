#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specprint/conv.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

class FreqGenModel;

/// Elementwise mean of |dft2| over the images. Multichannel images are averaged per
/// channel, then across channels.
Matrix mean_magnitude_spectrum(const std::vector<Tensor3>& images);
Matrix mean_magnitude_spectrum(const std::vector<Matrix>& images);

/// Normalized min-image radius sqrt((u'/(M/2))^2 + (v'/(N/2))^2); 1 at the axis Nyquist.
double normalized_radius(std::size_t u, std::size_t v, std::size_t rows, std::size_t cols);

/// Zeroes bins whose normalized radius is below `cutoff` (0 < cutoff < 1).
Matrix highpass_mask(const Matrix& spectrum, double cutoff);

struct AzimuthalProfile {
  std::vector<double> values;  ///< AI(k) for k = 0 .. S/2 - 1, S = min(M, N)
};

/// AI(k) = sum of |F|^2 over bins with round(min-image radius) = k, radius in bin units.
/// Non-square spectra are restricted to the central S x S block (in shifted terms).
AzimuthalProfile azimuthal_integral(const Matrix& magnitude);
AzimuthalProfile azimuthal_integral(const Spectrum2& f);

struct HpRatio {
  double value = 0.0;
  bool degenerate = false;  ///< all-zero profile; value is 0
};

/// Share of AI in k = S/4 .. S/2 - 1.
HpRatio hp_ratio(const AzimuthalProfile& profile);
HpRatio hp_ratio(const Matrix& magnitude);
HpRatio hp_ratio(const Spectrum2& f);
/// hp_ratio of the channel-mean image of a feature map.
double feature_hp_ratio(const Tensor3& x);

using AttenuationCurve = std::vector<std::pair<std::string, double>>;

/// feature_hp_ratio after every named component.
AttenuationCurve attenuation_curve(const std::vector<std::pair<std::string, Tensor3>>& taps);
AttenuationCurve attenuation_curve(const FreqGenModel& model, const Tensor3& img);

enum class ChannelMode { mean_image, per_channel };

struct Fingerprint {
  std::vector<double> values;  ///< unit L2 norm (all zero only if the masked spectrum is)
  std::size_t rows = 0, cols = 0;
  double cutoff = 0.5;
  std::size_t n_images = 0;
};

inline constexpr double kDefaultCutoff = 0.5;

/// log(1 + mean magnitude spectrum), high-pass masked, flattened, L2 normalized.
Fingerprint extract_fingerprint(const std::vector<Tensor3>& images, double cutoff = kDefaultCutoff,
                                ChannelMode mode = ChannelMode::mean_image);
Fingerprint image_feature(const Tensor3& img, double cutoff = kDefaultCutoff,
                          ChannelMode mode = ChannelMode::mean_image);

double cosine(const Fingerprint& a, const Fingerprint& b);
double cosine(std::span<const double> a, std::span<const double> b);

/// Mean over images of cos(high-passed channel-mean |dft2(out)|, high-passed mean over
/// (o, i) of |dft2(zero-padded K_oi)|).
double kernel_spectrum_similarity(const ConvKernel& kernel, const std::vector<Tensor3>& outputs,
                                  double cutoff = kDefaultCutoff);
/// Masked, averaged kernel magnitude spectrum on a rows x cols lattice.
Matrix kernel_magnitude_spectrum(const ConvKernel& kernel, std::size_t rows, std::size_t cols);
/// |dft2| of the zero-padded mean over (o, i) of K_oi, unmasked. For an input whose channels
/// are identical this is the transfer magnitude of the circular convolution's channel-mean
/// image (up to the factor C_in).
Matrix coherent_kernel_spectrum(const ConvKernel& kernel, std::size_t rows, std::size_t cols);

/// Flattened log(1 + |dft2|) of the channel-mean image; the probe's input.
std::vector<double> log_spectrum_feature(const Tensor3& img);

struct LinearProbe {
  std::size_t classes = 0, rows = 0, cols = 0;
  std::vector<double> weights;  ///< classes x (rows * cols), row major
  std::vector<double> bias;
  /// Per-feature standardization applied before the linear layer.
  std::vector<double> feature_mean, feature_scale;

  std::size_t dims() const { return rows * cols; }
  std::vector<double> scores(std::span<const double> feature) const;
  std::size_t predict(std::span<const double> feature) const;
};

struct ProbeOptions {
  int epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
};

struct ProbeObjective {
  double loss = 0.0;
  std::vector<double> grad_weights, grad_bias;
};

/// Mean softmax cross-entropy plus (l2 / 2) |W|^2, and its gradient.
ProbeObjective probe_objective(const LinearProbe& probe, const std::vector<std::vector<double>>& x,
                               const std::vector<std::size_t>& labels, double l2);

/// Full-batch gradient descent from zero weights.
LinearProbe train_linear_probe(const std::vector<std::vector<double>>& x,
                               const std::vector<std::size_t>& labels, std::size_t rows,
                               std::size_t cols, const ProbeOptions& options = {});

double probe_accuracy(const LinearProbe& probe, const std::vector<std::vector<double>>& x,
                      const std::vector<std::size_t>& labels);

/// Per-class weights in raw feature units (divided by the standardization scale).
std::vector<Matrix> probe_weight_maps(const LinearProbe& probe);

}  // namespace specprint
