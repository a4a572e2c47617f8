#include "specprint/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "specprint/error.hpp"
#include "specprint/synth_pool.hpp"

namespace specprint {

std::vector<VerificationPair> make_pairs(const std::vector<std::size_t>& images_per_model,
                                         std::size_t ns, std::size_t n_pos, std::size_t n_neg,
                                         Rng& rng) {
  const std::size_t models = images_per_model.size();
  if (ns == 0) throw DataError("N_S must be positive");
  std::vector<std::size_t> pos_models, neg_models;
  for (std::size_t m = 0; m < models; ++m) {
    if (images_per_model[m] >= 2 * ns) pos_models.push_back(m);
    if (images_per_model[m] >= ns) neg_models.push_back(m);
  }
  if (n_pos > 0 && pos_models.empty())
    throw DataError("no model has the " + std::to_string(2 * ns) + " images a positive pair needs");
  if (n_neg > 0 && neg_models.size() < 2)
    throw DataError("negative pairs need two models with at least " + std::to_string(ns) + " images");

  std::vector<VerificationPair> pairs;
  pairs.reserve(n_pos + n_neg);
  for (std::size_t i = 0; i < n_pos; ++i) {
    VerificationPair p;
    p.model_a = p.model_b = pos_models[rng.below(pos_models.size())];
    const auto pick = rng.sample_without_replacement(images_per_model[p.model_a], 2 * ns);
    p.side_a.assign(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(ns));
    p.side_b.assign(pick.begin() + static_cast<std::ptrdiff_t>(ns), pick.end());
    p.same = true;
    pairs.push_back(std::move(p));
  }
  for (std::size_t i = 0; i < n_neg; ++i) {
    VerificationPair p;
    const std::size_t a = rng.below(neg_models.size());
    std::size_t b = rng.below(neg_models.size() - 1);
    if (b >= a) ++b;
    p.model_a = neg_models[a];
    p.model_b = neg_models[b];
    p.side_a = rng.sample_without_replacement(images_per_model[p.model_a], ns);
    p.side_b = rng.sample_without_replacement(images_per_model[p.model_b], ns);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

namespace {

std::vector<Tensor3> gather(const ModelImages& images, std::size_t model,
                            const std::vector<std::size_t>& idx) {
  if (model >= images.size()) throw DataError("pair refers to an unknown model");
  std::vector<Tensor3> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    if (i >= images[model].size()) throw DataError("pair refers to a missing image");
    out.push_back(images[model][i]);
  }
  return out;
}

void check_labels(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  const auto pos = std::count(labels.begin(), labels.end(), true);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw DataError("ROC needs both positive and negative labels");
}

// Candidate thresholds: every distinct score ascending, then +inf. Count of positives and
// negatives with score >= t for each.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> tp, fp;
  std::size_t pos = 0, neg = 0;
};

Sweep sweep(std::span<const double> scores, const std::vector<bool>& labels) {
  check_labels(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Sweep s;
  for (bool l : labels) (l ? s.pos : s.neg) += 1;
  // Descending pass, then reverse.
  std::vector<double> th{std::numeric_limits<double>::infinity()};
  std::vector<std::size_t> tp{0}, fp{0};
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = scores[order[i]];
    std::size_t ctp = tp.back(), cfp = fp.back();
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] ? ctp : cfp) += 1;
      ++i;
    }
    th.push_back(t);
    tp.push_back(ctp);
    fp.push_back(cfp);
  }
  s.thresholds.assign(th.rbegin(), th.rend());
  s.tp.assign(tp.rbegin(), tp.rend());
  s.fp.assign(fp.rbegin(), fp.rend());
  return s;
}

ThresholdChoice pick(const Sweep& s, bool balanced) {
  ThresholdChoice best{-1.0, 0.0};
  const double total = static_cast<double>(s.pos + s.neg);
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    const double tn = static_cast<double>(s.neg - s.fp[i]);
    const double tp = static_cast<double>(s.tp[i]);
    const double v = balanced ? 0.5 * (tp / static_cast<double>(s.pos) + tn / static_cast<double>(s.neg))
                              : (tp + tn) / total;
    if (v > best.value) best = {v, s.thresholds[i]};  // ascending scan keeps the lowest on ties
  }
  return best;
}

}  // namespace

double verify_pair(const VerificationPair& pair, const ModelImages& images, double cutoff) {
  return cosine(extract_fingerprint(gather(images, pair.model_a, pair.side_a), cutoff),
                extract_fingerprint(gather(images, pair.model_b, pair.side_b), cutoff));
}

std::vector<double> verify_pairs(const std::vector<VerificationPair>& pairs,
                                 const ModelImages& images, double cutoff, std::size_t jobs) {
  std::vector<double> scores(pairs.size());
  parallel_for(pairs.size(), jobs, [&](std::size_t i) { scores[i] = verify_pair(pairs[i], images, cutoff); });
  return scores;
}

RocCurve roc(std::span<const double> scores, const std::vector<bool>& labels) {
  const Sweep s = sweep(scores, labels);
  RocCurve r;
  r.thresholds = s.thresholds;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    r.tpr.push_back(static_cast<double>(s.tp[i]) / static_cast<double>(s.pos));
    r.fpr.push_back(static_cast<double>(s.fp[i]) / static_cast<double>(s.neg));
  }
  // Points run from (1, 1) at the lowest threshold to (0, 0) at +inf.
  for (std::size_t i = 0; i + 1 < r.fpr.size(); ++i)
    r.auc += (r.fpr[i] - r.fpr[i + 1]) * 0.5 * (r.tpr[i] + r.tpr[i + 1]);
  return r;
}

ThresholdChoice best_accuracy(std::span<const double> scores, const std::vector<bool>& labels) {
  return pick(sweep(scores, labels), false);
}

ThresholdChoice calibrate_threshold(std::span<const double> scores, const std::vector<bool>& labels) {
  return pick(sweep(scores, labels), true);
}

Identification identify_open_set(const Fingerprint& probe, const Gallery& gallery) {
  if (gallery.prints.empty()) throw DataError("empty gallery");
  if (gallery.ids.size() != gallery.prints.size()) throw DataError("gallery ids and fingerprints differ in count");
  Identification out;
  for (std::size_t i = 0; i < gallery.prints.size(); ++i) {
    const double s = cosine(probe, gallery.prints[i]);
    if (s > out.score || (s == out.score && gallery.ids[i] < out.best_id)) {
      out.score = s;
      out.best_id = gallery.ids[i];
    }
  }
  out.id = out.score >= gallery.threshold ? out.best_id : kUnknown;
  return out;
}

OpenSetMetrics open_set_metrics(const std::vector<Fingerprint>& probes,
                                const std::vector<std::size_t>& truth, const Gallery& gallery) {
  if (probes.size() != truth.size()) throw DataError("probes and truth differ in length");
  OpenSetMetrics m;
  std::vector<double> scores;
  std::vector<bool> known;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Identification id = identify_open_set(probes[i], gallery);
    scores.push_back(id.score);
    known.push_back(truth[i] != kUnknown);
    if (truth[i] != kUnknown) {
      ++m.known;
      hits += id.best_id == truth[i];
    } else {
      ++m.unknown;
    }
  }
  if (m.known == 0) throw DataError("open-set evaluation needs known probes");
  m.closed_accuracy = static_cast<double>(hits) / static_cast<double>(m.known);
  m.auc = m.unknown ? roc(scores, known).auc : std::numeric_limits<double>::quiet_NaN();
  return m;
}

Matrix lineage_matrix(const std::vector<Fingerprint>& prints) {
  if (prints.size() < 2) throw DataError("lineage needs at least two models");
  Matrix m(prints.size(), prints.size());
  for (std::size_t i = 0; i < prints.size(); ++i) {
    m(i, i) = 1.0;
    for (std::size_t j = i + 1; j < prints.size(); ++j) m(i, j) = m(j, i) = cosine(prints[i], prints[j]);
  }
  return m;
}

}  // namespace specprint
