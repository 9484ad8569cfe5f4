#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "test_support.hpp"
#include "urbanvis/dataset.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"

using namespace urbanvis;

TEST_SUITE("dataset") {

TEST_CASE("label value domains") {
  CHECK(valid_label_value(Task::Quality, 1));
  CHECK(valid_label_value(Task::Quality, 4));
  CHECK_FALSE(valid_label_value(Task::Quality, 0));
  CHECK_FALSE(valid_label_value(Task::Quality, 5));
  CHECK(valid_label_value(Task::Qualification, 0));
  CHECK_FALSE(valid_label_value(Task::Continuity, 2));
  CHECK(parse_task("continuity") == Task::Continuity);
  CHECK_FALSE(parse_task("beauty").has_value());
}

TEST_CASE("append_label is append-only and validates") {
  test::TempDir dir;
  const auto path = dir.file("labels.jsonl");
  LabelStore store(path);
  store.append({"img1", Task::Quality, 3, "A", 100});
  CHECK(store.size() == 1);
  try {
    store.append({"img1", Task::Quality, 5, "A", 101});
    FAIL("expected InvalidValue");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidValue);
  }
  CHECK(store.size() == 1);
  store.append({"img1", Task::Quality, 2, "A", 102});
  CHECK(store.size() == 2);

  const auto on_disk = read_labels(path);
  REQUIRE(on_disk.size() == 2);
  CHECK(on_disk[0] == LabelRecord{"img1", Task::Quality, 3, "A", 100});
  CHECK(io::lines(io::read_file(path)).size() == 2);

  // Reopen: existing records are loaded.
  LabelStore reopened(path);
  CHECK(reopened.size() == 2);
}

TEST_CASE("torn trailing line is ignored and trimmed") {
  test::TempDir dir;
  const auto path = dir.file("labels.jsonl");
  {
    std::ofstream out(path);
    out << R"({"image_id":"a","task":"quality","value":3,"rater_id":"r","ts":1})" << "\n"
        << R"({"image_id":"b","task":"qual)";
  }
  LabelStore store(path);
  CHECK(store.size() == 1);
  store.append({"c", Task::Quality, 1, "r", 2});
  CHECK(read_labels(path).size() == 2);
}

TEST_CASE("resolve_labels majority, recency and last-write rules") {
  std::vector<LabelRecord> recs{
      {"x", Task::Quality, 3, "A", 1}, {"x", Task::Quality, 3, "B", 2}, {"x", Task::Quality, 2, "C", 3},
      {"y", Task::Quality, 2, "A", 1}, {"y", Task::Quality, 4, "B", 5},
      {"z", Task::Quality, 1, "A", 1},
      // within one rater, last write wins
      {"w", Task::Quality, 1, "A", 1}, {"w", Task::Quality, 4, "A", 9},
      // equal timestamps: lexicographic rater_id breaks the tie
      {"v", Task::Quality, 1, "A", 7}, {"v", Task::Quality, 2, "B", 7},
      {"x", Task::Continuity, 1, "A", 1},
  };
  const auto q = resolve_labels(recs, Task::Quality);
  CHECK(q.at("x") == 3);
  CHECK(q.at("y") == 4);
  CHECK(q.at("z") == 1);
  CHECK(q.at("w") == 4);
  CHECK(q.at("v") == 2);
  CHECK(q.size() == 5);
  CHECK(resolve_labels(recs, Task::Continuity).size() == 1);
  CHECK(resolve_labels({}, Task::Quality).empty());

  // Order-insensitive and idempotent.
  auto reversed = recs;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(resolve_labels(reversed, Task::Quality) == q);
}

TEST_CASE("stratified_split counts, disjointness and determinism") {
  std::map<std::string, int> labels;
  int id = 0;
  for (int cls = 1; cls <= 4; ++cls) {
    for (int i = 0; i < 120 + cls * 7; ++i) labels["img" + std::to_string(id++)] = cls;
  }
  const Split s = stratified_split(labels, 40, 60, 2016);
  CHECK(s.dev_ids.size() == 160);
  CHECK(s.test_ids.size() == 240);
  CHECK(s.train_ids.size() + s.dev_ids.size() + s.test_ids.size() == labels.size());

  std::set<std::string> seen;
  for (const auto* part : {&s.train_ids, &s.dev_ids, &s.test_ids}) {
    for (const auto& x : *part) CHECK(seen.insert(x).second);
  }
  std::map<int, int> dev_per_class;
  for (const auto& x : s.dev_ids) ++dev_per_class[labels.at(x)];
  for (const auto& [cls, n] : dev_per_class) CHECK(n == 40);

  CHECK(stratified_split(labels, 40, 60, 2016) == s);
  CHECK_FALSE(stratified_split(labels, 40, 60, 2017) == s);

  const Split none = stratified_split(labels, 0, 0, 1);
  CHECK(none.train_ids.size() == labels.size());
  CHECK(none.dev_ids.empty());

  try {
    stratified_split(labels, 100, 60, 1);
    FAIL("expected InsufficientClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientClass);
  }

  test::TempDir dir;
  write_split_csv(dir.file("split.csv"), s);
  CHECK(read_split_csv(dir.file("split.csv")) == s);
}

TEST_CASE("split is pinned across platforms") {
  // mt19937_64 output is fixed by the standard, so this draw is portable.
  std::map<std::string, int> labels{{"a", 0}, {"b", 0}, {"c", 0}, {"d", 1}, {"e", 1}, {"f", 1}};
  const Split s = stratified_split(labels, 1, 1, 42);
  CHECK(s.train_ids == std::vector<std::string>{"a", "e"});
  CHECK(s.dev_ids == std::vector<std::string>{"b", "f"});
  CHECK(s.test_ids == std::vector<std::string>{"c", "d"});
}

TEST_CASE("reference shares sum to 100") {
  for (Task t : {Task::Qualification, Task::Quality, Task::Continuity}) {
    double sum = 0.0;
    for (const auto& [cls, share] : reference_shares(t)) sum += share;
    CHECK(sum == doctest::Approx(100.0).epsilon(1e-3));
  }
  CHECK(reference_shares(Task::Quality).at(4) == 18.8);
  CHECK(reference_shares(Task::Quality).at(1) == 7.8);
}

TEST_CASE("manifest round trip resolves relative raster paths") {
  test::TempDir dir;
  write_manifest(dir.file("images.csv"), {{"i1", "p1", "s1", "img/i1.png", 800, 500}});
  const auto m = read_manifest(dir.file("images.csv"));
  REQUIRE(m.size() == 1);
  CHECK(m[0].raster_path == dir.file("img/i1.png"));
  CHECK(m[0].width_px == 800);
}

}  // TEST_SUITE
