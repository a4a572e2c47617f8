#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "specprint/io.hpp"
#include "specprint/synth_pool.hpp"

namespace specprint {

using Json = nlohmann::ordered_json;

inline constexpr int kManifestVersion = 1;

/// DIR/manifest.json plus DIR/weights/<id>.fpt (state vector: parameters then buffers).
void save_pool(const std::vector<PoolMember>& pool, const fs::path& dir);
/// Rebuilds every model from its config and loads its weights. Missing weight files,
/// duplicate ids and state-length mismatches are DataErrors.
std::vector<PoolMember> load_pool(const fs::path& dir);

Json config_json(const BlockConfig& c);
Json config_json(const GridGenConfig& c);
BlockConfig block_config_from(const Json& j);
GridGenConfig grid_config_from(const Json& j);

struct VerifyRow {
  std::size_t ns = 0, pair = 0;
  std::string model_a, model_b;
  bool label = false;
  double score = 0.0;
};

struct VerifySummary {
  std::size_t ns = 0, pairs = 0;
  double auc = 0.0, accuracy = 0.0, tau = 0.0;
};

/// One summary per distinct N_S, in order of first appearance.
std::vector<VerifySummary> summarize(const std::vector<VerifyRow>& rows);

struct IdentifyRow {
  std::string probe, truth, best, predicted;  ///< truth / predicted are "UNKNOWN" when open
  double score = 0.0;
};

struct IdentifySummary {
  double tau = 0.0;
  std::size_t known = 0, unknown = 0;
  double closed_accuracy = 0.0;  ///< argmax id right, over known probes
  double open_accuracy = 0.0;    ///< thresholded decision right, over all probes
  double auc = 0.0;              ///< known vs unknown by best score
};

IdentifySummary summarize(const std::vector<IdentifyRow>& rows, double tau);

inline constexpr const char* kUnknownLabel = "UNKNOWN";

/// DIR/rows.csv and DIR/summary.json. `params` lands in the summary next to the metrics.
void save_report(const fs::path& dir, const std::vector<VerifyRow>& rows, const Json& params);
void save_report(const fs::path& dir, const std::vector<IdentifyRow>& rows, double tau, const Json& params);

/// Loading recomputes the summary from the rows and fails when it disagrees.
std::vector<VerifyRow> load_verify_report(const fs::path& dir);
std::vector<IdentifyRow> load_identify_report(const fs::path& dir);

Json to_json(const VerifySummary& s);
Json to_json(const IdentifySummary& s);

/// DIR/run.json with the command and every parameter.
void write_run_json(const fs::path& dir, const std::string& command, const Json& params);

/// Two-space indented JSON with a trailing newline.
std::string dump_json(const Json& j);

}  // namespace specprint
