#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <sys/wait.h>

#include "specprint/io.hpp"
#include "specprint/store.hpp"

using namespace specprint;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "specprint_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(SPECPRINT_CLI) + " " + args + " >/dev/null 2>" + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& rel) { return (kRoot / rel).string(); }

// One small pool and dataset shared by the cases below.
void prepare() {
  static bool done = false;
  if (done) return;
  fs::remove_all(kRoot);
  fs::create_directories(kRoot);
  REQUIRE(run("pool train --scale desk --freq-models 3 --steps 5 --grid-steps 5 --corpus 8 --seed 7 --jobs 2 --out " +
              p("pool")) == 0);
  REQUIRE(run("synth --pool " + p("pool") + " --n 240 --corpus 40 --seed 8 --out " + p("data")) == 0);
  done = true;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  fs::create_directories(kRoot);
  CHECK(run("") == 1);
  CHECK(run("verify --out x") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("pool train --scale huge --out x") == 1);
  CHECK(run("--help") == 0);
}

TEST_CASE("data errors exit with 2 and a machine-readable line") {
  fs::create_directories(kRoot);
  CHECK(run("verify --images " + p("missing") + " --out " + p("v")) == 2);
  const std::string err = read_file(kRoot / "stderr.txt");
  const Json j = Json::parse(err);
  CHECK(j["error"] == "data");
  CHECK(j["message"].get<std::string>().find("not a directory") != std::string::npos);

  write_file(kRoot / "bad.arch", "input(1,8,8)\nblock(u=bicubic,k=3,ch=1)\n");
  Tensor3 img(1, 8, 8, 0.5);
  save_image(img, kRoot / "img.pgm");
  CHECK(run("attenuation --arch " + p("bad.arch") + " --input " + p("img.pgm") + " --out " + p("a.csv")) == 2);
  CHECK(read_file(kRoot / "stderr.txt").find("line 2, column 9") != std::string::npos);
}

TEST_CASE("pool train and synth write manifests and run records") {
  prepare();
  const Json manifest = Json::parse(read_file(kRoot / "pool" / "manifest.json"));
  CHECK(manifest["models"].size() == 6);
  CHECK(load_pool(kRoot / "pool").size() == 6);
  const Json run_json = Json::parse(read_file(kRoot / "pool" / "run.json"));
  CHECK(run_json["command"] == "pool train");
  CHECK(run_json["params"]["seed"] == 7);
  CHECK(list_image_sets(kRoot / "data").size() <= 6);
  CHECK(fs::exists(kRoot / "data" / "labels.csv"));

  // Same seed, different worker count: identical pool.
  REQUIRE(run("pool train --scale desk --freq-models 3 --steps 5 --grid-steps 5 --corpus 8 --seed 7 --jobs 1 --out " +
              p("pool_again")) == 0);
  CHECK(read_file(kRoot / "pool" / "manifest.json") == read_file(kRoot / "pool_again" / "manifest.json"));
  for (const auto& e : manifest["models"]) {
    const std::string w = e["weights"];
    CHECK(read_file(kRoot / "pool" / w) == read_file(kRoot / "pool_again" / w));
  }
}

TEST_CASE("verify emits one summary per N_S and reruns byte-identically") {
  prepare();
  const std::string args = "verify --images " + p("data") + " --ns 1,2,4 --pairs 30 --seed 3 --out ";
  REQUIRE(run(args + p("v1")) == 0);
  REQUIRE(run(args + p("v2") + " --jobs 3") == 0);
  const Json summary = Json::parse(read_file(kRoot / "v1" / "summary.json"));
  REQUIRE(summary["experiments"].size() == 3);
  CHECK(summary["experiments"][2]["ns"] == 4);
  CHECK(summary["experiments"][0]["pairs"] == 60);
  CHECK(read_file(kRoot / "v1" / "rows.csv") == read_file(kRoot / "v2" / "rows.csv"));
  CHECK(read_file(kRoot / "v1" / "summary.json") == read_file(kRoot / "v2" / "summary.json"));
  CHECK(load_verify_report(kRoot / "v1").size() == 180);
}

TEST_CASE("identify, fingerprint, lineage, attenuation and spectrum") {
  prepare();
  const auto sets = list_image_sets(kRoot / "data");
  REQUIRE(sets.size() >= 3);
  fs::create_directories(kRoot / "gallery");
  for (std::size_t i = 0; i + 1 < sets.size(); ++i)
    fs::create_directory_symlink(sets[i], kRoot / "gallery" / sets[i].filename());
  REQUIRE(run("identify --gallery " + p("gallery") + " --probes " + p("data") + " --seed 2 --out " + p("id")) == 0);
  const Json s = Json::parse(read_file(kRoot / "id" / "summary.json"));
  CHECK(s["params"]["tau_source"] == "calibrated");
  CHECK(load_identify_report(kRoot / "id").size() > 0);
  REQUIRE(run("identify --gallery " + p("gallery") + " --probes " + p("data") + " --tau 0.5 --out " + p("id2")) == 0);
  CHECK(Json::parse(read_file(kRoot / "id2" / "summary.json"))["summary"]["tau"] == 0.5);

  REQUIRE(run("fingerprint --images " + sets[0].string() + " --out " + p("fp/a.fpt")) == 0);
  REQUIRE(run("fingerprint --images " + sets[1].string() + " --out " + p("fp/b.fpt")) == 0);
  CHECK(load_tensor(kRoot / "fp" / "a.fpt").dims == std::vector<std::uint32_t>{32, 32});
  REQUIRE(run("lineage --fingerprints " + p("fp/a.fpt") + " " + p("fp/b.fpt") + " --out " + p("lin.csv")) == 0);
  const std::string lin = read_file(kRoot / "lin.csv");
  CHECK(lin.rfind("model,a,b\na,1,", 0) == 0);

  write_file(kRoot / "a.arch", "input(3,32,32)\nblock(u=bilinear,k=3,ch=4,act=relu)\nblock(u=nearest,k=1,ch=3)\n");
  const std::string img = list_images(sets[0]).front().string();
  REQUIRE(run("attenuation --arch " + p("a.arch") + " --input " + img + " --out " + p("att.csv")) == 0);
  const std::string att = read_file(kRoot / "att.csv");
  CHECK(att.rfind("component,hp_ratio\ninput,", 0) == 0);
  CHECK(att.find("b2.up.nearest,") != std::string::npos);
  CHECK(fs::exists(kRoot / "att.csv.run.json"));

  REQUIRE(run("spectrum --image " + img + " --log --shifted --out " + p("s.fpt")) == 0);
  CHECK(load_tensor(kRoot / "s.fpt").dims == std::vector<std::uint32_t>{32, 32});
  REQUIRE(run("spectrum --image " + img + " --out " + p("s.csv")) == 0);
  const std::string csv = read_file(kRoot / "s.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 32);
}
