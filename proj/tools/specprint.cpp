// specprint command line tool. Exit codes: 0 success, 1 usage, 2 data error.

#include <algorithm>
#include <iostream>
#include <cstdio>
#include <numeric>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "specprint/arch_dsl.hpp"
#include "specprint/attribution.hpp"
#include "specprint/dft.hpp"
#include "specprint/error.hpp"
#include "specprint/fingerprint.hpp"
#include "specprint/io.hpp"
#include "specprint/store.hpp"
#include "specprint/synth_pool.hpp"

using namespace specprint;

namespace {

// Stream tags for Rng::derive; every random draw in a command comes from --seed and one of these.
constexpr std::uint64_t kCorpusStream = 0x636f72707573;  // "corpus"
constexpr std::uint64_t kSynthStream = 0x73796e7468;     // "synth"
constexpr std::uint64_t kPairStream = 0x7061697273;      // "pairs"
constexpr std::uint64_t kSplitStream = 0x73706c6974;     // "split"
constexpr std::uint64_t kWeightStream = 0x77656967687473;  // "weights"

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }


std::vector<Tensor3> source_images(const std::string& dir, std::size_t count, std::size_t size, std::uint64_t seed) {
  if (!dir.empty()) return load_images(dir);
  return power_law_corpus(count, size, splitmix64(seed ^ kCorpusStream));
}

struct ImageSets {
  std::vector<std::string> names;
  ModelImages images;
};

ImageSets load_image_sets(const fs::path& dir) {
  ImageSets s;
  for (const auto& sub : list_image_sets(dir)) {
    s.names.push_back(sub.filename().string());
    s.images.push_back(load_images(sub));
  }
  if (s.names.empty()) throw DataError("no model subdirectories with images in " + dir.string());
  return s;
}

void write_matrix_csv(const fs::path& path, const Matrix& m, const std::vector<std::string>* names) {
  std::string csv;
  if (names) {
    csv = "model";
    for (const auto& n : *names) csv += "," + n;
    csv += "\n";
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::string line = names ? (*names)[r] : "";
    for (std::size_t c = 0; c < m.cols(); ++c) line += (c || names ? "," : "") + format_double(m(r, c));
    csv += line + "\n";
  }
  write_file(path, csv);
}

// ---- pool train ----

struct PoolTrainArgs {
  std::string scale = "desk", out, images;
  std::uint64_t seed = 0;
  std::size_t freq_models = kDeskFreqModels, corpus = 64, size = 32, seeds_per_config = 1;
  int steps = -1, grid_steps = 500;
};

void pool_train(const PoolTrainArgs& a, std::size_t jobs) {
  const bool full = a.scale == "full";
  PoolPlan plan = enumerate_pool(full ? PoolScale::full : PoolScale::desk, a.seeds_per_config, a.seed);
  if (!full) plan = desk_subset(plan, std::min(a.freq_models, plan.freq.size()));
  const auto images = source_images(a.images, a.corpus, a.size, a.seed);
  PoolTrainOptions opt;
  opt.freq.max_steps = a.steps >= 0 ? a.steps : (full ? 2000 : 100);
  opt.grid.max_steps = a.grid_steps;
  opt.jobs = jobs;
  const auto pool = train_pool(plan, images, opt);
  save_pool(pool, a.out);
  write_run_json(a.out, "pool train",
                 {{"scale", a.scale}, {"seed", a.seed}, {"images", a.images}, {"corpus", a.corpus},
                  {"size", a.size}, {"freq_models", full ? plan.freq.size() : a.freq_models},
                  {"seeds_per_config", a.seeds_per_config}, {"freq_steps", opt.freq.max_steps},
                  {"grid_steps", opt.grid.max_steps}, {"models", pool.size()}});
  std::cout << "trained " << pool.size() << " models into " << a.out << "\n";
}

// ---- synth ----

struct SynthArgs {
  std::string pool, images, out;
  std::size_t n = 1000, crop = 32, corpus = 400, size = 32;
  std::uint64_t seed = 0;
};

void synth(const SynthArgs& a, std::size_t jobs) {
  const auto pool = load_pool(a.pool);
  if (pool.empty()) throw DataError("pool is empty");
  const auto images = source_images(a.images, a.corpus, a.size, splitmix64(a.seed ^ 1));
  Rng rng = Rng::derive(a.seed, kSynthStream);
  const auto data = synth_dataset(pool, images, a.n, a.crop, rng, jobs);
  std::string labels = "file,label,model,source\n";
  std::vector<std::string> files(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.ppm", i);
    files[i] = pool[data[i].label].name() + "/" + name;
    labels += files[i] + "," + std::to_string(data[i].label) + "," + pool[data[i].label].name() + "," +
              std::to_string(data[i].source) + "\n";
  }
  parallel_for(data.size(), jobs, [&](std::size_t i) { save_image(data[i].image, fs::path(a.out) / files[i]); });
  write_file(fs::path(a.out) / "labels.csv", labels);
  write_run_json(a.out, "synth",
                 {{"pool", a.pool}, {"images", a.images}, {"n", a.n}, {"crop", a.crop}, {"corpus", a.corpus},
                  {"size", a.size}, {"seed", a.seed}});
  std::cout << "wrote " << data.size() << " images to " << a.out << "\n";
}

// ---- fingerprint ----

void fingerprint(const std::string& images, double cutoff, bool per_channel, const std::string& out) {
  const Fingerprint f = extract_fingerprint(load_images(images), cutoff,
                                            per_channel ? ChannelMode::per_channel : ChannelMode::mean_image);
  TensorFile t;
  const std::size_t plane = f.rows * f.cols;
  if (f.values.size() == plane)
    t.dims = {static_cast<std::uint32_t>(f.rows), static_cast<std::uint32_t>(f.cols)};
  else
    t.dims = {static_cast<std::uint32_t>(f.values.size() / plane), static_cast<std::uint32_t>(f.rows),
              static_cast<std::uint32_t>(f.cols)};
  t.values = f.values;
  save_tensor(t, out);
  fs::path run = out;
  run += ".run.json";
  write_file(run, dump_json(Json{{"tool", "specprint"},
                                 {"command", "fingerprint"},
                                 {"params", {{"images", images}, {"cutoff", cutoff}, {"per_channel", per_channel},
                                             {"n_images", f.n_images}}}}));
}

// ---- verify ----

struct VerifyArgs {
  std::string images, out;
  std::vector<std::size_t> ns{1, 5, 10};
  std::size_t pairs = 500;
  std::uint64_t seed = 0;
  double cutoff = kDefaultCutoff;
};

void verify(const VerifyArgs& a, std::size_t jobs) {
  const ImageSets sets = load_image_sets(a.images);
  if (sets.names.size() < 2) throw DataError("verification needs at least two models");
  std::vector<std::size_t> sizes;
  for (const auto& s : sets.images) sizes.push_back(s.size());
  std::vector<VerifyRow> rows;
  for (std::size_t ns : a.ns) {
    Rng rng = Rng::derive(a.seed, kPairStream ^ (ns << 40));
    const auto pairs = make_pairs(sizes, ns, a.pairs, a.pairs, rng);
    const auto scores = verify_pairs(pairs, sets.images, a.cutoff, jobs);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      rows.push_back({ns, i, sets.names[pairs[i].model_a], sets.names[pairs[i].model_b], pairs[i].same, scores[i]});
  }
  const Json params{{"images", a.images}, {"ns", a.ns}, {"pairs", a.pairs}, {"seed", a.seed}, {"cutoff", a.cutoff}};
  save_report(a.out, rows, params);
  write_run_json(a.out, "verify", params);
  for (const auto& s : summarize(rows))
    std::cout << "ns=" << s.ns << " auc=" << format_double(s.auc) << " accuracy=" << format_double(s.accuracy)
              << " tau=" << format_double(s.tau) << "\n";
}

// ---- identify ----

struct IdentifyArgs {
  std::string gallery, probes, out;
  std::optional<double> tau;
  double calibration = 0.5;
  std::uint64_t seed = 0;
  double cutoff = kDefaultCutoff;
};

void identify(const IdentifyArgs& a, std::size_t jobs) {
  const ImageSets g = load_image_sets(a.gallery);
  Gallery gallery;
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    gallery.ids.push_back(i);
    gallery.prints.push_back(extract_fingerprint(g.images[i], a.cutoff));
  }
  struct Probe {
    std::string name, truth;
    Tensor3 image;
  };
  std::vector<Probe> probes;
  for (const auto& sub : list_image_sets(a.probes)) {
    const std::string model = sub.filename().string();
    const bool known = std::find(g.names.begin(), g.names.end(), model) != g.names.end();
    for (const auto& p : list_images(sub))
      probes.push_back({model + "/" + p.filename().string(), known ? model : kUnknownLabel, load_image(p)});
  }
  if (probes.empty()) throw DataError("no probe images in " + a.probes);

  std::vector<Identification> ids(probes.size());
  parallel_for(probes.size(), jobs, [&](std::size_t i) {
    ids[i] = identify_open_set(image_feature(probes[i].image, a.cutoff), gallery);
  });

  // Without --tau, a seeded split of the probes calibrates the threshold and only the rest is reported.
  std::vector<bool> report(probes.size(), true);
  double tau = 0.0;
  if (a.tau) {
    tau = *a.tau;
  } else {
    if (!(a.calibration > 0.0 && a.calibration < 1.0)) throw UsageError("--calibration must lie in (0, 1)");
    std::vector<std::size_t> order(probes.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::derive(a.seed, kSplitStream);
    rng.shuffle(std::span<std::size_t>(order));
    const auto n_cal = static_cast<std::size_t>(a.calibration * static_cast<double>(probes.size()));
    std::vector<double> scores;
    std::vector<bool> known;
    for (std::size_t k = 0; k < n_cal; ++k) {
      report[order[k]] = false;
      scores.push_back(ids[order[k]].score);
      known.push_back(probes[order[k]].truth != kUnknownLabel);
    }
    if (std::count(known.begin(), known.end(), true) == 0 || std::count(known.begin(), known.end(), false) == 0)
      throw DataError("calibrating tau needs known and unknown probes in the calibration split; pass --tau");
    tau = calibrate_threshold(scores, known).threshold;
  }
  std::vector<IdentifyRow> rows;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    if (!report[i]) continue;
    const std::string best = g.names[ids[i].best_id];
    rows.push_back({probes[i].name, probes[i].truth, best, ids[i].score >= tau ? best : kUnknownLabel, ids[i].score});
  }
  Json params{{"gallery", a.gallery}, {"probes", a.probes}, {"cutoff", a.cutoff}, {"seed", a.seed}};
  params["tau"] = a.tau ? Json(*a.tau) : Json(nullptr);
  params["tau_source"] = a.tau ? "given" : "calibrated";
  if (!a.tau) params["calibration"] = a.calibration;
  save_report(a.out, rows, tau, params);
  write_run_json(a.out, "identify", params);
  const IdentifySummary s = summarize(rows, tau);
  std::cout << "tau=" << format_double(tau) << " closed_accuracy=" << format_double(s.closed_accuracy)
            << " auc=" << format_double(s.auc) << " open_accuracy=" << format_double(s.open_accuracy) << "\n";
}

// ---- attenuation, lineage, spectrum ----

void attenuation(const std::string& arch, const std::string& input, std::uint64_t seed, const std::string& out) {
  const ArchSpec spec = parse_arch(read_file(arch));
  Rng rng = Rng::derive(seed, kWeightStream);
  const SimResult r = forward_sim(spec, load_image(input), rng);
  std::string csv = "component,hp_ratio\ninput," + format_double(feature_hp_ratio(load_image(input))) + "\n";
  for (const auto& [name, value] : attenuation_curve(r.taps)) csv += name + "," + format_double(value) + "\n";
  write_file(out, csv);
  fs::path run = out;
  run += ".run.json";
  write_file(run, dump_json(Json{{"tool", "specprint"},
                                 {"command", "attenuation"},
                                 {"params", {{"arch", arch}, {"input", input}, {"seed", seed}}}}));
}

void lineage(const std::vector<std::string>& files, const std::string& out) {
  std::vector<Fingerprint> prints;
  std::vector<std::string> names;
  for (const auto& f : files) {
    const TensorFile t = load_tensor(f);
    if (t.dims.size() < 2) throw DataError(f + ": a fingerprint has rank 2 or 3");
    Fingerprint p;
    p.values = t.values;
    p.rows = t.dims[t.dims.size() - 2];
    p.cols = t.dims.back();
    prints.push_back(std::move(p));
    names.push_back(fs::path(f).stem().string());
  }
  write_matrix_csv(out, lineage_matrix(prints), &names);
  fs::path run = out;
  run += ".run.json";
  write_file(run, dump_json(Json{{"tool", "specprint"}, {"command", "lineage"}, {"params", {{"fingerprints", files}}}}));
}

void spectrum(const std::string& image, bool log, bool shifted, const std::string& out) {
  const Spectrum2 f = dft2(load_image(image).channel_mean());
  Matrix m = log ? log_magnitude(f) : magnitude(f);
  if (shifted) m = fftshift_view(m);
  if (fs::path(out).extension() == ".csv")
    write_matrix_csv(out, m, nullptr);
  else
    save_tensor(TensorFile::from(m), out);
  fs::path run = out;
  run += ".run.json";
  write_file(run, dump_json(Json{{"tool", "specprint"},
                                 {"command", "spectrum"},
                                 {"params", {{"image", image}, {"log", log}, {"shifted", shifted}}}}));
}

void error_line(const char* kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral fingerprints of generative models"};
  app.require_subcommand(1);
  std::size_t jobs = default_jobs();
  auto add_jobs = [&](CLI::App* c) { c->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber); };

  auto* pool = app.add_subcommand("pool", "Generator pool");
  pool->require_subcommand(1);
  PoolTrainArgs pt;
  auto* train = pool->add_subcommand("train", "Train a generator pool");
  train->add_option("--scale", pt.scale)->check(CLI::IsMember({"desk", "full"}));
  train->add_option("--out", pt.out)->required();
  train->add_option("--seed", pt.seed);
  train->add_option("--images", pt.images, "Training images (default: power-law corpus)");
  train->add_option("--freq-models", pt.freq_models, "Freq configs in the desk pool");
  train->add_option("--seeds-per-config", pt.seeds_per_config)->check(CLI::PositiveNumber);
  train->add_option("--corpus", pt.corpus, "Power-law corpus size")->check(CLI::PositiveNumber);
  train->add_option("--size", pt.size, "Power-law image size")->check(CLI::PositiveNumber);
  train->add_option("--steps", pt.steps, "Freq training steps (default 100 desk, 2000 full)");
  train->add_option("--grid-steps", pt.grid_steps);
  add_jobs(train);

  SynthArgs sa;
  auto* syn = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  syn->add_option("--pool", sa.pool)->required();
  syn->add_option("--images", sa.images, "Source images (default: power-law corpus)");
  syn->add_option("--n", sa.n)->required()->check(CLI::PositiveNumber);
  syn->add_option("--out", sa.out)->required();
  syn->add_option("--seed", sa.seed);
  syn->add_option("--crop", sa.crop)->check(CLI::PositiveNumber);
  syn->add_option("--corpus", sa.corpus)->check(CLI::PositiveNumber);
  syn->add_option("--size", sa.size)->check(CLI::PositiveNumber);
  add_jobs(syn);

  std::string fp_images, fp_out;
  double fp_cutoff = kDefaultCutoff;
  bool fp_per_channel = false;
  auto* fp = app.add_subcommand("fingerprint", "Extract a fingerprint from an image directory");
  fp->add_option("--images", fp_images)->required();
  fp->add_option("--cutoff", fp_cutoff);
  fp->add_flag("--per-channel", fp_per_channel);
  fp->add_option("--out", fp_out)->required();

  VerifyArgs va;
  auto* ver = app.add_subcommand("verify", "1:1 verification over model image sets");
  ver->add_option("--images", va.images, "Directory with one subdirectory of images per model")->required();
  ver->add_option("--ns", va.ns)->delimiter(',')->check(CLI::PositiveNumber);
  ver->add_option("--pairs", va.pairs, "Positive and negative pairs per N_S")->check(CLI::PositiveNumber);
  ver->add_option("--seed", va.seed);
  ver->add_option("--cutoff", va.cutoff);
  ver->add_option("--out", va.out)->required();
  add_jobs(ver);

  IdentifyArgs ia;
  double tau = 0.0;
  auto* idn = app.add_subcommand("identify", "Open-set identification");
  idn->add_option("--gallery", ia.gallery)->required();
  idn->add_option("--probes", ia.probes)->required();
  auto* tau_opt = idn->add_option("--tau", tau);
  idn->add_option("--calibration", ia.calibration, "Probe share used to pick tau when --tau is absent");
  idn->add_option("--seed", ia.seed);
  idn->add_option("--cutoff", ia.cutoff);
  idn->add_option("--out", ia.out)->required();
  add_jobs(idn);

  std::string at_arch, at_input, at_out;
  std::uint64_t at_seed = 0;
  auto* att = app.add_subcommand("attenuation", "Per-component hp_ratio curve of an architecture");
  att->add_option("--arch", at_arch)->required();
  att->add_option("--input", at_input)->required();
  att->add_option("--seed", at_seed);
  att->add_option("--out", at_out)->required();

  std::vector<std::string> ln_files;
  std::string ln_out;
  auto* lin = app.add_subcommand("lineage", "Pairwise fingerprint similarity");
  lin->add_option("--fingerprints", ln_files)->required()->expected(2, -1);
  lin->add_option("--out", ln_out)->required();

  std::string sp_image, sp_out;
  bool sp_log = false, sp_shifted = false;
  auto* spc = app.add_subcommand("spectrum", "Export a magnitude spectrum");
  spc->add_option("--image", sp_image)->required();
  spc->add_flag("--log", sp_log);
  spc->add_flag("--shifted", sp_shifted);
  spc->add_option("--out", sp_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) pool_train(pt, jobs);
    else if (*syn) synth(sa, jobs);
    else if (*fp) fingerprint(fp_images, fp_cutoff, fp_per_channel, fp_out);
    else if (*ver) verify(va, jobs);
    else if (*idn) {
      if (*tau_opt) ia.tau = tau;
      identify(ia, jobs);
    }
    else if (*att) attenuation(at_arch, at_input, at_seed, at_out);
    else if (*lin) lineage(ln_files, ln_out);
    else if (*spc) spectrum(sp_image, sp_log, sp_shifted, sp_out);
  } catch (const UsageError& e) {
    error_line("usage", e.what());
    return 1;
  } catch (const specprint::Error& e) {
    error_line("data", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    error_line("data", e.what());
    return 2;
  } catch (const nlohmann::json::exception& e) {
    error_line("data", e.what());
    return 2;
  }
  return 0;
}
