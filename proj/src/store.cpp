#include "specprint/store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "specprint/attribution.hpp"
#include "specprint/error.hpp"

namespace specprint {

namespace {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<E> options) {
  for (E e : options)
    if (s == to_string(e)) return e;
  throw DataError("unknown value '" + s + "' in manifest");
}

// Exact value in JSON; NaN and infinities are not representable there.
Json number(double v) { return std::isfinite(v) ? Json(v) : Json(format_double(v)); }

double number_from(const Json& j) { return j.is_string() ? parse_double(j.get<std::string>()) : j.get<double>(); }

std::vector<std::string> csv_lines(const fs::path& path, const std::string& header) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::string> out;
  if (!std::getline(in, line) || line != header) throw DataError(path.string() + ": unexpected CSV header");
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::vector<std::string> cells(const std::string& line, std::size_t n) {
  auto c = split_csv_line(line);
  if (c.size() != n) throw DataError("CSV row has " + std::to_string(c.size()) + " cells, expected " + std::to_string(n));
  return c;
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("not an integer: '" + s + "'");
  return v;
}

const char* kVerifyHeader = "ns,pair,model_a,model_b,label,score";
const char* kIdentifyHeader = "probe,truth,best,predicted,score";

}  // namespace

Json config_json(const BlockConfig& c) {
  return {{"layers", c.layers},  {"order", to_string(c.order)}, {"up", to_string(c.up)},
          {"act", to_string(c.act)}, {"norm", to_string(c.norm)}, {"seed", c.seed},
          {"feature_dim", c.feature_dim}, {"kernel", c.kernel}};
}

Json config_json(const GridGenConfig& c) {
  return {{"num_blocks", c.num_blocks}, {"seed", c.seed}, {"channels", c.channels}};
}

BlockConfig block_config_from(const Json& j) {
  BlockConfig c;
  c.layers = j.at("layers").get<int>();
  c.order = enum_from(j.at("order").get<std::string>(), {BlockOrder::post, BlockOrder::pre});
  c.up = enum_from(j.at("up").get<std::string>(), {UpsampleKind::nearest, UpsampleKind::bilinear, UpsampleKind::deconv});
  c.act = enum_from(j.at("act").get<std::string>(), {ActKind::relu, ActKind::sigmoid, ActKind::tanh, ActKind::none});
  c.norm = enum_from(j.at("norm").get<std::string>(), {NormKind::batch, NormKind::instance, NormKind::none});
  c.seed = j.at("seed").get<std::uint64_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.kernel = j.at("kernel").get<std::size_t>();
  if (c.layers < 1 || c.layers > 2 || c.feature_dim == 0 || c.kernel == 0) throw DataError("invalid block config in manifest");
  return c;
}

GridGenConfig grid_config_from(const Json& j) {
  GridGenConfig c;
  c.num_blocks = j.at("num_blocks").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.channels = j.at("channels").get<std::size_t>();
  if (c.num_blocks < 1 || c.num_blocks > 8 || c.channels == 0) throw DataError("invalid grid config in manifest");
  return c;
}

void save_pool(const std::vector<PoolMember>& pool, const fs::path& dir) {
  Json models = Json::array();
  std::set<std::string> ids;
  for (const auto& m : pool) {
    const std::string id = m.name();
    if (!ids.insert(id).second) throw DataError("duplicate model id " + id);
    const std::string weights = "weights/" + id + ".fpt";
    Json e{{"id", id}, {"family", m.is_grid ? "grid" : "freq"}};
    if (m.is_grid) {
      e["config"] = config_json(m.grid.config());
      e["seed"] = m.grid.config().seed;
      e["trained"] = m.grid.trained;
      e["steps"] = m.grid.steps;
      e["final_magnitude"] = number(m.grid.final_magnitude);
      save_tensor(TensorFile::from(m.grid.net().get_state()), dir / weights);
    } else {
      e["config"] = config_json(m.freq.config());
      e["seed"] = m.freq.config().seed;
      e["trained"] = m.freq.trained;
      e["steps"] = m.freq.steps;
      e["final_residual"] = number(m.freq.final_residual);
      save_tensor(TensorFile::from(m.freq.net().get_state()), dir / weights);
    }
    e["weights"] = weights;
    models.push_back(std::move(e));
  }
  write_file(dir / "manifest.json", dump_json(Json{{"version", kManifestVersion}, {"models", models}}));
}

std::vector<PoolMember> load_pool(const fs::path& dir) {
  Json manifest;
  try {
    manifest = Json::parse(read_file(dir / "manifest.json"));
  } catch (const Json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<PoolMember> pool;
  std::set<std::string> ids;
  try {
    if (manifest.at("version").get<int>() != kManifestVersion) throw DataError("unsupported manifest version");
    for (const auto& e : manifest.at("models")) {
      const std::string id = e.at("id").get<std::string>();
      if (!ids.insert(id).second) throw DataError("duplicate model id " + id + " in manifest");
      const fs::path weights = dir / e.at("weights").get<std::string>();
      if (!fs::exists(weights)) throw DataError("missing weight file " + weights.string() + " for " + id);
      const TensorFile state = load_tensor(weights);
      PoolMember m;
      const std::string family = e.at("family").get<std::string>();
      nn::Sequential* net = nullptr;
      if (family == "grid") {
        m.is_grid = true;
        m.grid = GridGenModel(grid_config_from(e.at("config")));
        m.grid.trained = e.at("trained").get<bool>();
        m.grid.steps = e.at("steps").get<int>();
        m.grid.final_magnitude = number_from(e.at("final_magnitude"));
        net = &m.grid.net();
      } else if (family == "freq") {
        m.freq = FreqGenModel(block_config_from(e.at("config")));
        m.freq.trained = e.at("trained").get<bool>();
        m.freq.steps = e.at("steps").get<int>();
        m.freq.final_residual = number_from(e.at("final_residual"));
        net = &m.freq.net();
      } else {
        throw DataError("unknown model family '" + family + "'");
      }
      if (m.name() != id) throw DataError("model id " + id + " does not match its config");
      net->set_state(state.values);
      pool.push_back(std::move(m));
    }
  } catch (const Json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
  return pool;
}

std::vector<VerifySummary> summarize(const std::vector<VerifyRow>& rows) {
  std::vector<VerifySummary> out;
  std::vector<std::size_t> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.ns) == order.end()) order.push_back(r.ns);
  for (std::size_t ns : order) {
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& r : rows)
      if (r.ns == ns) {
        scores.push_back(r.score);
        labels.push_back(r.label);
      }
    VerifySummary s;
    s.ns = ns;
    s.pairs = scores.size();
    s.auc = roc(scores, labels).auc;
    const ThresholdChoice best = best_accuracy(scores, labels);
    s.accuracy = best.value;
    s.tau = best.threshold;
    out.push_back(s);
  }
  return out;
}

IdentifySummary summarize(const std::vector<IdentifyRow>& rows, double tau) {
  IdentifySummary s;
  s.tau = tau;
  std::size_t closed = 0, open = 0;
  std::vector<double> scores;
  std::vector<bool> known;
  for (const auto& r : rows) {
    const bool is_known = r.truth != kUnknownLabel;
    (is_known ? s.known : s.unknown) += 1;
    closed += is_known && r.best == r.truth;
    open += r.predicted == r.truth;
    scores.push_back(r.score);
    known.push_back(is_known);
  }
  if (s.known == 0) throw DataError("open-set evaluation needs known probes");
  s.closed_accuracy = static_cast<double>(closed) / static_cast<double>(s.known);
  s.open_accuracy = static_cast<double>(open) / static_cast<double>(rows.size());
  s.auc = s.unknown ? roc(scores, known).auc : std::nan("");
  return s;
}

Json to_json(const VerifySummary& s) {
  return {{"ns", s.ns}, {"pairs", s.pairs}, {"auc", number(s.auc)}, {"accuracy", number(s.accuracy)},
          {"tau", number(s.tau)}};
}

Json to_json(const IdentifySummary& s) {
  return {{"tau", number(s.tau)},
          {"known", s.known},
          {"unknown", s.unknown},
          {"closed_accuracy", number(s.closed_accuracy)},
          {"open_accuracy", number(s.open_accuracy)},
          {"auc", number(s.auc)}};
}

void save_report(const fs::path& dir, const std::vector<VerifyRow>& rows, const Json& params) {
  std::string csv = std::string(kVerifyHeader) + "\n";
  for (const auto& r : rows)
    csv += std::to_string(r.ns) + "," + std::to_string(r.pair) + "," + r.model_a + "," + r.model_b + "," +
           (r.label ? "1" : "0") + "," + format_double(r.score) + "\n";
  write_file(dir / "rows.csv", csv);
  Json experiments = Json::array();
  for (const auto& s : summarize(rows)) experiments.push_back(to_json(s));
  write_file(dir / "summary.json",
             dump_json(Json{{"kind", "verify"}, {"params", params}, {"experiments", experiments}}));
}

void save_report(const fs::path& dir, const std::vector<IdentifyRow>& rows, double tau, const Json& params) {
  std::string csv = std::string(kIdentifyHeader) + "\n";
  for (const auto& r : rows)
    csv += r.probe + "," + r.truth + "," + r.best + "," + r.predicted + "," + format_double(r.score) + "\n";
  write_file(dir / "rows.csv", csv);
  write_file(dir / "summary.json",
             dump_json(Json{{"kind", "identify"}, {"params", params}, {"summary", to_json(summarize(rows, tau))}}));
}

std::vector<VerifyRow> load_verify_report(const fs::path& dir) {
  std::vector<VerifyRow> rows;
  for (const auto& line : csv_lines(dir / "rows.csv", kVerifyHeader)) {
    const auto c = cells(line, 6);
    if (c[4] != "0" && c[4] != "1") throw DataError("label must be 0 or 1");
    rows.push_back({to_size(c[0]), to_size(c[1]), c[2], c[3], c[4] == "1", parse_double(c[5])});
  }
  Json summary;
  try {
    summary = Json::parse(read_file(dir / "summary.json"));
    Json expected = Json::array();
    for (const auto& s : summarize(rows)) expected.push_back(to_json(s));
    if (summary.at("kind") != "verify" || summary.at("experiments") != expected)
      throw DataError((dir / "summary.json").string() + ": summary does not match rows.csv");
  } catch (const Json::exception& e) {
    throw DataError((dir / "summary.json").string() + ": " + e.what());
  }
  return rows;
}

std::vector<IdentifyRow> load_identify_report(const fs::path& dir) {
  std::vector<IdentifyRow> rows;
  for (const auto& line : csv_lines(dir / "rows.csv", kIdentifyHeader)) {
    const auto c = cells(line, 5);
    rows.push_back({c[0], c[1], c[2], c[3], parse_double(c[4])});
  }
  try {
    const Json summary = Json::parse(read_file(dir / "summary.json"));
    const double tau = number_from(summary.at("summary").at("tau"));
    if (summary.at("kind") != "identify" || summary.at("summary") != to_json(summarize(rows, tau)))
      throw DataError((dir / "summary.json").string() + ": summary does not match rows.csv");
  } catch (const Json::exception& e) {
    throw DataError((dir / "summary.json").string() + ": " + e.what());
  }
  return rows;
}

void write_run_json(const fs::path& dir, const std::string& command, const Json& params) {
  write_file(dir / "run.json", dump_json(Json{{"tool", "specprint"}, {"command", command}, {"params", params}}));
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace specprint
