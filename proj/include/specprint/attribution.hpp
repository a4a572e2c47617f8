#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "specprint/fingerprint.hpp"
#include "specprint/rng.hpp"
#include "specprint/tensor.hpp"

namespace specprint {

/// Two image sets, given as indices into per-model image lists.
struct VerificationPair {
  std::size_t model_a = 0, model_b = 0;
  std::vector<std::size_t> side_a, side_b;
  bool same = false;
};

/// Positive pairs take two disjoint N_S-subsets of one model's images; negative pairs take
/// one subset from each of two distinct models. Positives come first.
std::vector<VerificationPair> make_pairs(const std::vector<std::size_t>& images_per_model,
                                         std::size_t ns, std::size_t n_pos, std::size_t n_neg,
                                         Rng& rng);

using ModelImages = std::vector<std::vector<Tensor3>>;

double verify_pair(const VerificationPair& pair, const ModelImages& images,
                   double cutoff = kDefaultCutoff);
std::vector<double> verify_pairs(const std::vector<VerificationPair>& pairs,
                                 const ModelImages& images, double cutoff = kDefaultCutoff,
                                 std::size_t jobs = 1);

struct RocCurve {
  /// Ascending; the last entry is +infinity (nothing accepted). Positive means score >= t.
  std::vector<double> thresholds;
  std::vector<double> tpr, fpr;
  double auc = 0.0;
};

/// Trapezoidal AUC over all distinct thresholds (ties get half credit).
RocCurve roc(std::span<const double> scores, const std::vector<bool>& labels);

struct ThresholdChoice {
  double value = 0.0;      ///< accuracy or balanced accuracy at the threshold
  double threshold = 0.0;
};

/// Maximizes (TP + TN) / total; ties go to the lower threshold.
ThresholdChoice best_accuracy(std::span<const double> scores, const std::vector<bool>& labels);
/// Maximizes (TPR + TNR) / 2; ties go to the lower threshold.
ThresholdChoice calibrate_threshold(std::span<const double> scores, const std::vector<bool>& labels);

inline constexpr std::size_t kUnknown = std::numeric_limits<std::size_t>::max();

struct Gallery {
  std::vector<std::size_t> ids;
  std::vector<Fingerprint> prints;
  double threshold = 0.5;
};

struct Identification {
  std::size_t id = kUnknown;       ///< kUnknown when the best score is below the threshold
  std::size_t best_id = kUnknown;  ///< argmax regardless of threshold
  double score = -1.0;
};

Identification identify_open_set(const Fingerprint& probe, const Gallery& gallery);

struct OpenSetMetrics {
  double closed_accuracy = 0.0;  ///< known probes whose argmax id is right
  double auc = 0.0;              ///< known vs unknown by best score; NaN without unknowns
  std::size_t known = 0, unknown = 0;
};

/// truth[i] is the model id of probe i, or kUnknown.
OpenSetMetrics open_set_metrics(const std::vector<Fingerprint>& probes,
                                const std::vector<std::size_t>& truth, const Gallery& gallery);

/// Pairwise cosine matrix.
Matrix lineage_matrix(const std::vector<Fingerprint>& prints);

}  // namespace specprint
