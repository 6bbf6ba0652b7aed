#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "cellseg/cli/commands.hpp"
#include "cellseg/gtprep.hpp"
#include "cellseg/io.hpp"
#include "cellseg/synth.hpp"
#include "cellseg/weights.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cellseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "cellseg");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Small scene with one touching pair, written as a label PNG.
fs::path write_scene(const fs::path& dir) {
  InstanceMap g = InstanceMap::Zero(24, 30);
  g.block(4, 3, 12, 10) = 1;
  g.block(4, 13, 12, 10) = 2;
  const fs::path p = dir / "gt.png";
  write_label_map(p, g);
  return p;
}

}  // namespace

TEST_CASE("gt2sem uses k = 2 by default and writes a sidecar") {
  const fs::path dir = testing::scratch_dir("cli_gt2sem");
  const fs::path gt = write_scene(dir);
  const Outcome r = run({"gt2sem", "--in", gt.string(), "--out", (dir / "sem.png").string()});
  REQUIRE(r.code == 0);
  const SemanticMap h = read_semantic_map(dir / "sem.png");
  CHECK((h == instance_to_semantic(read_label_map(gt))).all());
  const json meta = read_json(dir / "sem.png.meta.json");
  CHECK(meta["command"] == "gt2sem");
  CHECK(meta["config"]["k"] == 2);

  const Outcome k3 = run({"gt2sem", "--in", gt.string(), "--out", (dir / "sem3.png").string(), "--k", "3"});
  REQUIRE(k3.code == 0);
  CHECK((read_semantic_map(dir / "sem3.png") == instance_to_semantic(read_label_map(gt), NeighborhoodSpec(3))).all());
}

TEST_CASE("usage errors exit with 2") {
  const fs::path dir = testing::scratch_dir("cli_usage");
  const fs::path gt = write_scene(dir);
  CHECK(run({"gt2sem", "--in", gt.string(), "--out", (dir / "s.png").string(), "--k", "0"}).code == 2);
  CHECK(run({"gt2sem", "--in", gt.string()}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);

  const std::string missing = (dir / "absent.png").string();
  const Outcome r = run({"gt2sem", "--in", missing, "--out", (dir / "s.png").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find(missing) != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "s.png"));
}

TEST_CASE("validation errors exit with 3") {
  const fs::path dir = testing::scratch_dir("cli_validation");
  const fs::path gt = write_scene(dir);
  const Outcome r = run({"weights", "--gt", gt.string(), "--out", (dir / "w.npy").string(), "--beta", "-1"});
  CHECK(r.code == 3);
  CHECK_FALSE(r.err.empty());
  CHECK_FALSE(fs::exists(dir / "w.npy"));

  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"k": 2, "w3": {"beta": 30, "gamma": 1}, "colour": "red"})";
  const Outcome c = run({"--config", cfg.string(), "gt2sem", "--in", gt.string(), "--out", (dir / "s.png").string()});
  CHECK(c.code == 3);
  CHECK(c.err.find("w3.gamma") != std::string::npos);
  CHECK(c.err.find("colour") != std::string::npos);

  const fs::path not_json = dir / "broken.json";
  std::ofstream(not_json) << "{k: ";
  CHECK(run({"--config", not_json.string(), "gt2sem", "--in", gt.string(), "--out", (dir / "s.png").string()}).code == 3);
}

TEST_CASE("weights command matches the library") {
  const fs::path dir = testing::scratch_dir("cli_weights");
  const fs::path gt = write_scene(dir);
  REQUIRE(run({"weights", "--gt", gt.string(), "--out", (dir / "w.npy").string(), "--beta", "12"}).code == 0);
  const InstanceMap g = read_label_map(gt);
  const WeightMap want = w3_weight_map(g, instance_to_semantic(g), W3Params{12.0, 1.0, 5.0});
  const FloatArray got = read_array(dir / "w.npy");
  REQUIRE(got.channels() == 1);
  CHECK(((got[0].cast<double>() - want).abs() <= 1e-6 * want.abs()).all());
  CHECK(read_json(dir / "w.npy.meta.json")["config"]["w3"]["beta"] == 12.0);
}

TEST_CASE("decode and eval round trip") {
  const fs::path dir = testing::scratch_dir("cli_decode");
  fs::create_directories(dir / "gt");
  fs::create_directories(dir / "pred");
  SynthSpec spec;
  spec.rows = spec.cols = 64;
  const InstanceMap truth = generate_scene(spec, 3).instances;
  write_label_map(dir / "gt" / "a.png", truth);
  const ProbabilityMap z = oracle_probability_map(instance_to_semantic(truth), 1.5);
  write_array(dir / "a.npy", z.cast<float>());

  const fs::path pred = dir / "pred" / "a.png";
  const Outcome d = run({"decode", "--in", (dir / "a.npy").string(), "--out", pred.string(), "--strategy", "wt"});
  REQUIRE(d.code == 0);
  const json meta = read_json(pred.string() + ".meta.json");
  CHECK(meta["config"]["decode"]["strategy"] == "wt");
  CHECK(meta["config"]["decode"]["tau0"] == 0.8);
  CHECK(meta["config"]["decode"]["tau1"] == 0.8);

  CHECK(run({"decode", "--in", (dir / "a.npy").string(), "--out", pred.string(), "--strategy", "crf"}).code == 3);
  CHECK(run({"decode", "--in", (dir / "a.npy").string(), "--out", (dir / "x.png").string(), "--strategy", "th",
             "--gamma1", "0.5"}).code == 3);

  const fs::path report = dir / "report.json";
  const Outcome e = run({"eval", "--gt", (dir / "gt").string(), "--pred", (dir / "pred").string(), "--out",
                         report.string(), "--csv", (dir / "report.csv").string()});
  REQUIRE(e.code == 0);
  const json j = read_json(report);
  CHECK(j["pooled"]["pq"].get<double>() > 0.9);
  CHECK(j["pooled"]["pq"].get<double>() == doctest::Approx(j["pooled"]["rq"].get<double>() * j["pooled"]["sq"].get<double>()));
  CHECK(fs::exists(dir / "report.csv"));
}

TEST_CASE("loss and combine") {
  const fs::path dir = testing::scratch_dir("cli_loss");
  SemanticMap h = SemanticMap::Zero(4, 4);
  h.block(1, 1, 2, 2) = kCell;
  write_semantic_map(dir / "h.png", h);
  write_array(dir / "w.npy", FloatArray({Grid<float>::Ones(4, 4)}));
  write_array(dir / "z.npy", one_hot(h).cast<float>());
  const Outcome r = run({"loss", "--target", (dir / "h.png").string(), "--prob", (dir / "z.npy").string(),
                         "--weights", (dir / "w.npy").string()});
  REQUIRE(r.code == 0);
  CHECK(json::parse(r.out)["total"] == 0.0);

  write_array(dir / "u.npy", ProbabilityMap(3, 4, 4, 1.0 / 3.0).cast<float>());
  REQUIRE(run({"combine", "--in", (dir / "z.npy").string(), (dir / "u.npy").string(), "--out",
               (dir / "c.npy").string()}).code == 0);
  const FloatArray c = read_array(dir / "c.npy");
  CHECK(c.channels() == 3);
  CHECK(run({"combine", "--in", (dir / "z.npy").string(), "--out", (dir / "c.npy").string()}).code == 2);
}

TEST_CASE("pipeline on the bundled dataset is accurate, deterministic and read-only") {
  const fs::path data = CELLSEG_DATASET;
  std::map<fs::path, std::string> before;
  for (const auto& e : fs::recursive_directory_iterator(data)) {
    if (e.is_regular_file()) before[e.path()] = slurp(e.path());
  }
  const fs::path a = testing::scratch_dir("cli_pipeline_a");
  const fs::path b = testing::scratch_dir("cli_pipeline_b");
  const fs::path cfg = data / "config.json";
  REQUIRE(run({"--config", cfg.string(), "pipeline", "--data", data.string(), "--out", a.string()}).code == 0);
  REQUIRE(run({"--config", cfg.string(), "--threads", "3", "pipeline", "--data", data.string(), "--out",
               b.string()}).code == 0);

  const json ra = read_json(a / "report.json");
  CHECK(ra["pooled"]["pq"].get<double>() > 0.95);
  CHECK(slurp(a / "report.json") == slurp(b / "report.json"));
  for (const auto& e : fs::recursive_directory_iterator(a / "pred")) {
    if (e.is_regular_file()) CHECK(slurp(e.path()) == slurp(b / "pred" / e.path().filename()));
  }
  for (const auto& e : fs::recursive_directory_iterator(a / "weights")) {
    if (e.is_regular_file()) CHECK(slurp(e.path()) == slurp(b / "weights" / e.path().filename()));
  }

  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(data)) {
    if (!e.is_regular_file()) continue;
    ++files;
    REQUIRE(before.count(e.path()) == 1);
    CHECK(before[e.path()] == slurp(e.path()));
  }
  CHECK(files == before.size());
}

TEST_CASE("augment writes the requested draws with a manifest") {
  const fs::path dir = testing::scratch_dir("cli_augment");
  SynthSpec spec;
  spec.rows = spec.cols = 48;
  spec.clusters = 1;
  const SynthScene s = generate_scene(spec, 9);
  write_gray_image(dir / "img.png", s.image);
  write_label_map(dir / "gt.png", s.instances);
  const Outcome r = run({"--seed", "7", "augment", "--image", (dir / "img.png").string(), "--gt",
                         (dir / "gt.png").string(), "--out", (dir / "aug").string(), "--count", "3"});
  REQUIRE(r.code == 0);
  const json m = read_json(dir / "aug" / "manifest.json");
  CHECK(m["config"]["seed"] == 7);
  CHECK(fs::exists(dir / "aug" / "aug_0002_weights.npy"));
  CHECK_FALSE(fs::exists(dir / "aug" / "aug_0003_weights.npy"));
}
