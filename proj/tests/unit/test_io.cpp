#include <doctest.h>

#include <cmath>
#include <cstring>

#include "specprint/error.hpp"
#include "specprint/io.hpp"
#include "specprint/store.hpp"
#include "specprint/synthetic_images.hpp"

using namespace specprint;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("specprint_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes(std::initializer_list<int> v) {
  std::string s;
  for (int b : v) s.push_back(static_cast<char>(b));
  return s;
}

}  // namespace

TEST_CASE("P5 scaling rule") {
  const Tensor3 img = decode_image("P5\n2 2\n255\n" + bytes({0, 128, 255, 64}));
  REQUIRE(img.channels() == 1);
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 0, 1) == 128.0 / 255.0);
  CHECK(img.at(0, 1, 0) == 1.0);
  CHECK(img.at(0, 1, 1) == 64.0 / 255.0);
}

TEST_CASE("P6 channel order is RGB") {
  const Tensor3 img = decode_image("P6 # one pixel\n1 1\n255\n" + bytes({10, 20, 30}));
  REQUIRE(img.channels() == 3);
  CHECK(img.at(0, 0, 0) == 10.0 / 255.0);
  CHECK(img.at(1, 0, 0) == 20.0 / 255.0);
  CHECK(img.at(2, 0, 0) == 30.0 / 255.0);
  CHECK(encode_image(img) == "P6\n1 1\n255\n" + bytes({10, 20, 30}));
}

TEST_CASE("save and load round-trip within the quantization bound") {
  const fs::path dir = scratch("roundtrip");
  Rng rng(3);
  for (std::size_t channels : {1, 3}) {
    Tensor3 img(channels, 7, 5);
    for (double& v : img.values()) v = rng.uniform();
    const fs::path p = dir / (channels == 1 ? "a.pgm" : "a.ppm");
    save_image(img, p);
    const Tensor3 back = load_image(p);
    CHECK(max_abs_diff(img, back) <= 1.0 / 510.0 + 1e-15);
  }
  // Round half up and clamping.
  Tensor3 edge(1, 1, 4, std::vector<double>{0.5 / 255.0, 1.5 / 255.0, -0.2, 1.7});
  CHECK(encode_image(edge).substr(11) == bytes({1, 2, 0, 255}));
  CHECK_THROWS_AS(encode_image(Tensor3(2, 1, 1)), DataError);
}

TEST_CASE("malformed images are rejected") {
  CHECK_THROWS_AS(decode_image("P3\n1 1\n255\n" + bytes({1})), DataError);
  CHECK_THROWS_AS(decode_image("P5\n2 2\n255\n" + bytes({1, 2, 3})), DataError);
  CHECK_THROWS_AS(decode_image("P5\n2 2\n65535\n" + bytes({1, 2, 3, 4, 5, 6, 7, 8})), DataError);
  CHECK_THROWS_AS(decode_image("P5\n2 x\n255\n"), DataError);
  CHECK_THROWS_AS(decode_image("P5\n0 2\n255\n"), DataError);
  CHECK_THROWS_AS(decode_image("P5\n1 1\n255"), DataError);
  try {
    decode_image("P5\n2 2\n255\n" + bytes({1}));
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("truncated") != std::string::npos);
  }
  // Smaller maxval rescales.
  CHECK(decode_image("P5 1 1 15 " + bytes({15})).at(0, 0, 0) == 1.0);
}

TEST_CASE("tensor files round-trip bit-exactly") {
  Rng rng(8);
  Tensor3 t(3, 8, 8);
  for (double& v : t.values()) v = rng.normal() * 1e-3 + std::ldexp(1.0, -40);
  const TensorFile back = decode_tensor(encode_tensor(TensorFile::from(t)));
  CHECK(back.dims == std::vector<std::uint32_t>{3, 8, 8});
  CHECK(std::memcmp(back.values.data(), t.storage().data(), t.size() * sizeof(double)) == 0);
  CHECK(back.to_tensor3().same_shape(t));

  TensorFile f32 = TensorFile::from(std::vector<double>{0.1, -2.5});
  f32.dtype = DType::f32;
  const TensorFile f32_back = decode_tensor(encode_tensor(f32));
  CHECK(f32_back.values[0] == static_cast<double>(0.1f));
  CHECK(f32_back.values[1] == -2.5);
}

TEST_CASE("tensor byte layout is little endian") {
  const std::string golden = "FPT1" + bytes({1, 1, 2, 0, 0, 0}) + bytes({0, 0, 0, 0, 0, 0, 0xf0, 0x3f}) +
                             bytes({0, 0, 0, 0, 0, 0, 0x04, 0xc0});
  CHECK(encode_tensor(TensorFile::from(std::vector<double>{1.0, -2.5})) == golden);
  const TensorFile t = decode_tensor(golden);
  CHECK(t.values == std::vector<double>{1.0, -2.5});
  const std::string f32 = "FPT1" + bytes({0, 2, 1, 0, 0, 0, 1, 0, 0, 0}) + bytes({0, 0, 0x80, 0x3f});
  CHECK(decode_tensor(f32).values == std::vector<double>{1.0});
}

TEST_CASE("tensor file errors") {
  const std::string good = encode_tensor(TensorFile::from(std::vector<double>{1.0, 2.0, 3.0}));
  try {
    decode_tensor(good.substr(0, good.size() - 3));
    FAIL("accepted a truncated file");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("length mismatch") != std::string::npos);
  }
  CHECK_THROWS_AS(decode_tensor("FPT2" + good.substr(4)), DataError);
  CHECK_THROWS_AS(decode_tensor(good + "x"), DataError);
  CHECK_THROWS_AS(decode_tensor("FPT1" + bytes({1, 1})), DataError);
  CHECK_THROWS_AS(decode_tensor("FPT1" + bytes({7, 0})), DataError);
  // 2^32-1 on each of three axes overflows.
  CHECK_THROWS_AS(decode_tensor("FPT1" + bytes({1, 3, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255, 255})),
                  DataError);
  CHECK_THROWS_AS(load_tensor(fs::temp_directory_path() / "specprint_no_such_file.fpt"), DataError);
}

TEST_CASE("float formatting is shortest round-trip") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(std::isnan(parse_double(format_double(std::nan("")))));
  CHECK_THROWS_AS(parse_double("1.0x"), DataError);
  CHECK(split_csv_line("a,,b") == std::vector<std::string>{"a", "", "b"});
}

TEST_CASE("image directories") {
  const fs::path dir = scratch("dirs");
  Rng rng(2);
  for (const char* m : {"b", "a"})
    for (int i = 2; i >= 0; --i) save_image(Tensor3::from_matrix(random_power_law_image(8, 8, rng)), dir / m / (std::to_string(i) + ".pgm"));
  write_file(dir / "a" / "notes.txt", "x");
  fs::create_directories(dir / "empty");
  const auto sets = list_image_sets(dir);
  REQUIRE(sets.size() == 2);
  CHECK(sets[0].filename() == "a");
  const auto files = list_images(dir / "a");
  REQUIRE(files.size() == 3);
  CHECK(files[0].filename() == "0.pgm");
  CHECK_THROWS_AS(load_images(dir / "empty"), DataError);
  CHECK_THROWS_AS(list_images(dir / "missing"), DataError);
}

TEST_CASE("pool manifest round-trip") {
  const fs::path dir = scratch("pool");
  PoolPlan plan = desk_subset(enumerate_pool(PoolScale::desk, 1, 4), 2);
  plan.grid.resize(1);
  plan.freq[1].norm = NormKind::batch;
  const auto corpus = power_law_corpus(6, 16, 3);
  PoolTrainOptions opt;
  opt.freq.max_steps = 3;
  opt.grid.max_steps = 3;
  opt.grid.output_size = 16;
  const auto pool = train_pool(plan, corpus, opt);
  save_pool(pool, dir);
  const auto back = load_pool(dir);
  REQUIRE(back.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(back[i].name() == pool[i].name());
    CHECK(back[i].is_grid == pool[i].is_grid);
    Rng a(5), b(5);
    CHECK(max_abs_diff(pool[i].generate(corpus[0], a), back[i].generate(corpus[0], b)) == 0.0);
  }
  CHECK(back[0].freq.final_residual == pool[0].freq.final_residual);
  CHECK(back[0].freq.steps == 3);

  fs::remove(dir / "weights" / (pool[1].name() + ".fpt"));
  try {
    load_pool(dir);
    FAIL("loaded a pool with a missing weight file");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("missing weight file") != std::string::npos);
  }
  CHECK_THROWS_AS(save_pool({pool[0], pool[0]}, scratch("dup")), DataError);
  CHECK_THROWS_AS(load_pool(scratch("none")), DataError);
}

TEST_CASE("reports recompute their summaries on load") {
  const fs::path dir = scratch("report");
  std::vector<VerifyRow> rows;
  Rng rng(4);
  for (std::size_t ns : {1, 5})
    for (std::size_t i = 0; i < 20; ++i) rows.push_back({ns, i, "m" + std::to_string(i % 3), "m0", i % 2 == 0, rng.uniform()});
  save_report(dir, rows, Json{{"seed", 4}});
  const auto back = load_verify_report(dir);
  REQUIRE(back.size() == rows.size());
  CHECK(back[7].score == rows[7].score);
  const auto sums = summarize(back);
  REQUIRE(sums.size() == 2);
  CHECK(sums[0].ns == 1);
  CHECK(sums[1].pairs == 20);

  std::string csv = read_file(dir / "rows.csv");
  csv[csv.rfind(",1,") + 1] = '0';
  write_file(dir / "rows.csv", csv);
  CHECK_THROWS_AS(load_verify_report(dir), DataError);

  const fs::path idir = scratch("identify");
  const std::vector<IdentifyRow> irows{{"p0", "a", "a", "a", 0.9},
                                       {"p1", "b", "a", "UNKNOWN", 0.4},
                                       {"p2", "UNKNOWN", "b", "UNKNOWN", 0.3},
                                       {"p3", "UNKNOWN", "a", "a", 0.8}};
  save_report(idir, irows, 0.5, Json::object());
  CHECK(load_identify_report(idir).size() == 4);
  const IdentifySummary s = summarize(irows, 0.5);
  CHECK(s.closed_accuracy == 0.5);
  CHECK(s.open_accuracy == 0.5);
  CHECK(s.auc == 0.75);
  write_file(idir / "summary.json", "{}");
  CHECK_THROWS_AS(load_identify_report(idir), DataError);
}
