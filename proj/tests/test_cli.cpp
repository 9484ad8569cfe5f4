#include <doctest.h>

#include <sstream>

#include "json.hpp"
#include "test_support.hpp"
#include "urbanvis/cli.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/pipeline.hpp"

using namespace urbanvis;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "urbanvis");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
  const Run none = cli({});
  CHECK(none.code == 1);

  const Run unknown = cli({"frobnicate"});
  CHECK(unknown.code == 1);
  CHECK((unknown.out + unknown.err).find("sample") != std::string::npos);

  CHECK(cli({"split", "--task", "quality"}).code == 1);
  CHECK(cli({"train", "--bogus-flag"}).code == 1);
  CHECK(cli({"--help"}).code == 0);

  test::TempDir dir;
  io::write_file(dir.file("labels.jsonl"), "");
  CHECK(cli({"split", "--labels", dir.file("labels.jsonl"), "--task", "beauty", "--out", dir.file("s.csv")}).code == 1);
  CHECK(cli({"features", "--out", dir.file("f.csv")}).code == 1);
  CHECK(cli({"serve", "--listen", "nowhere", "--manifest", "m", "--labels", "l"}).code == 1);
}

TEST_CASE("data errors exit 2") {
  test::TempDir dir;
  const Run missing = cli({"sample", "--network", dir.file("absent.geojson"), "--out", dir.file("p.csv")});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("error") != std::string::npos);

  io::write_file(dir.file("bad.csv"), "extractor_id,x\na,1,2\nb,1\n");
  CHECK(cli({"features", "--import", dir.file("bad.csv"), "--out", dir.file("f.csv")}).code == 2);
}

TEST_CASE("pipeline chain on a small synthetic corpus") {
  test::TempDir dir;
  const auto f = [&](const char* name) { return dir.file(name); };
  REQUIRE(cli({"synth", "--out", f("corpus"), "--n-images", "64", "--width", "48", "--height", "32"}).code == 0);

  REQUIRE(cli({"sample", "--network", f("corpus/network.geojson"), "--out", f("points.csv")}).code == 0);
  CHECK(io::read_file(f("points.csv")) == io::read_file(f("corpus/points.csv")));

  REQUIRE(cli({"codebook", "--manifest", f("corpus/images.csv"), "--k", "16", "--max-descriptors", "2000", "--seed",
               "3", "--out", f("codebook.json")})
              .code == 0);
  REQUIRE(cli({"features", "--manifest", f("corpus/images.csv"), "--codebook", f("codebook.json"), "--out",
               f("features.csv")})
              .code == 0);
  CHECK(read_features_csv(f("features.csv")).vectors.size() == 64);

  for (const char* task : {"qualification", "quality", "continuity"}) {
    const std::string split = dir.file(std::string("split_") + task + ".csv");
    const std::string model = dir.file(std::string(task) + ".fsvm");
    REQUIRE(cli({"split", "--labels", f("corpus/labels.jsonl"), "--task", task, "--per-class-dev", "2",
                 "--per-class-test", "2", "--seed", "5", "--out", split})
                .code == 0);
    const Run train = cli({"train", "--labels", f("corpus/labels.jsonl"), "--task", task, "--features",
                           f("features.csv"), "--split", split, "--lambda-grid", "1e-3,1e-2", "--seed", "2", "--out",
                           model, "--report", dir.file(std::string(task) + ".json")});
    REQUIRE(train.code == 0);
    const auto report = nlohmann::json::parse(io::read_file(dir.file(std::string(task) + ".json")));
    CHECK(report["grid"].size() == 2);
    CHECK(report["test"]["n"].get<int>() > 0);
    const Run eval = cli({"evaluate", "--model", model, "--labels", f("corpus/labels.jsonl"), "--features",
                          f("features.csv"), "--split", split});
    CHECK(eval.code == 0);
    CHECK(eval.out.rfind("model,positive_class,", 0) == 0);
    CHECK(eval.out.find(std::string(task) + " test,") != std::string::npos);
  }

  REQUIRE(cli({"screen", "--manifest", f("corpus/images.csv"), "--model", f("qualification.fsvm"), "--features",
               f("features.csv"), "--out", f("qualified.csv"), "--rejected", f("rejected.csv")})
              .code == 0);
  CHECK(read_manifest(f("qualified.csv")).size() + read_manifest(f("rejected.csv")).size() == 64);

  REQUIRE(cli({"score", "--manifest", f("qualified.csv"), "--quality-model", f("quality.fsvm"), "--continuity-model",
               f("continuity.fsvm"), "--features", f("features.csv"), "--out", f("scores.csv"), "--predictions",
               f("predictions.csv")})
              .code == 0);
  const auto scores = pipeline::read_scores_csv(f("scores.csv"));
  CHECK(io::read_file(f("predictions.csv")).rfind("image_id,task,predicted,decision_values\n", 0) == 0);

  REQUIRE(cli({"map", "--scores", f("scores.csv"), "--network", f("corpus/network.geojson"), "--out", f("map.geojson")})
              .code == 0);
  const auto map = nlohmann::json::parse(io::read_file(f("map.geojson")));
  CHECK(map["type"] == "FeatureCollection");
  CHECK(map["features"].size() == scores.size());

  const Run validation = cli({"validate", "--scores", f("scores.csv"), "--survey", f("corpus/survey.csv")});
  REQUIRE(validation.code == 0);
  CHECK(validation.out.rfind("feature,spearman_r,n_segments\n", 0) == 0);
  CHECK(validation.out.find("\nquality,") != std::string::npos);
  CHECK(validation.out.find("\ncontinuity,") != std::string::npos);

  CHECK(cli({"evaluate", "--model", f("quality.fsvm"), "--labels", f("corpus/labels.jsonl"), "--features",
             f("features.csv"), "--split", f("split_quality.csv"), "--mse-out", f("mse.csv")})
            .code == 0);
  CHECK(io::read_file(f("mse.csv")).rfind("MSE,Training set,Development set,Test set\n", 0) == 0);
}

}  // TEST_SUITE
