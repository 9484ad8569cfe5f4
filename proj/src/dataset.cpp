#include "urbanvis/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "json.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/rng.hpp"

namespace urbanvis {

using nlohmann::json;

std::string_view task_name(Task t) noexcept {
  switch (t) {
    case Task::Qualification: return "qualification";
    case Task::Quality: return "quality";
    case Task::Continuity: return "continuity";
  }
  return "";
}

std::optional<Task> parse_task(std::string_view s) noexcept {
  if (s == "qualification") return Task::Qualification;
  if (s == "quality") return Task::Quality;
  if (s == "continuity") return Task::Continuity;
  return std::nullopt;
}

std::vector<int> task_classes(Task t) {
  if (t == Task::Quality) return {1, 2, 3, 4};
  return {0, 1};
}

bool valid_label_value(Task t, int value) noexcept {
  if (t == Task::Quality) return value >= 1 && value <= 4;
  return value == 0 || value == 1;
}

std::map<int, double> reference_shares(Task t) {
  switch (t) {
    case Task::Qualification: return {{0, 26.4}, {1, 73.6}};
    case Task::Quality: return {{1, 7.8}, {2, 31.4}, {3, 41.9}, {4, 18.8}};
    case Task::Continuity: return {{0, 58.5}, {1, 41.5}};
  }
  return {};
}

std::vector<ImageRecord> read_manifest(const std::string& path) {
  const auto rows = io::lines(io::read_file(path));
  if (rows.empty() || rows[0] != "image_id,point_id,segment_id,raster_path,width,height") {
    throw Error(Errc::MalformedHeader, path);
  }
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ImageRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split_csv_line(rows[i]);
    if (f.size() != 6) throw Error(Errc::MalformedRow, path + " line " + std::to_string(i + 1));
    ImageRecord r{f[0], f[1], f[2], f[3], static_cast<int>(io::parse_int(f[4])),
                  static_cast<int>(io::parse_int(f[5]))};
    if (r.width_px <= 0 || r.height_px <= 0) {
      throw Error(Errc::InvalidValue, "non-positive image size for " + r.image_id);
    }
    std::filesystem::path raster(r.raster_path);
    if (raster.is_relative() && !base.empty()) r.raster_path = (base / raster).string();
    out.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<ImageRecord>& images) {
  std::string out = "image_id,point_id,segment_id,raster_path,width,height\n";
  for (const auto& r : images) {
    out += r.image_id + ',' + r.point_id + ',' + r.segment_id + ',' + r.raster_path + ',' +
           std::to_string(r.width_px) + ',' + std::to_string(r.height_px) + '\n';
  }
  io::write_file(path, out);
}

void validate(const LabelRecord& rec) {
  if (rec.image_id.empty()) throw Error(Errc::InvalidValue, "empty image_id");
  if (!valid_label_value(rec.task, rec.value)) {
    throw Error(Errc::InvalidValue, "value " + std::to_string(rec.value) + " out of range for task " +
                                        std::string(task_name(rec.task)));
  }
}

std::string to_json_line(const LabelRecord& rec) {
  json j = {{"image_id", rec.image_id},
            {"task", task_name(rec.task)},
            {"value", rec.value},
            {"rater_id", rec.rater_id},
            {"ts", rec.timestamp}};
  return j.dump();
}

LabelRecord label_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedRow, e.what());
  }
  try {
    const auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw Error(Errc::InvalidValue, "unknown task " + j.at("task").dump());
    LabelRecord rec{j.at("image_id").get<std::string>(), *task, j.at("value").get<int>(),
                    j.value("rater_id", std::string()), j.value("ts", std::int64_t{0})};
    validate(rec);
    return rec;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRow, e.what());
  }
}

namespace {

// Records from every complete line. A final line without '\n' is a torn append.
std::vector<LabelRecord> parse_store(const std::string& text, const std::string& path) {
  std::vector<LabelRecord> out;
  std::size_t start = 0;
  std::size_t lineno = 0;
  while (start < text.size()) {
    const auto pos = text.find('\n', start);
    if (pos == std::string::npos) break;
    ++lineno;
    std::string_view line(text.data() + start, pos - start);
    start = pos + 1;
    if (line.empty() || line == "\r") continue;
    try {
      out.push_back(label_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<LabelRecord> read_labels(const std::string& path) {
  return parse_store(io::read_file(path), path);
}

LabelStore::LabelStore(std::string path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    const auto text = io::read_file(path_);
    records_ = parse_store(text, path_);
    if (!text.empty() && text.back() != '\n') {
      // Drop the torn tail so the next append starts on a fresh line.
      std::filesystem::resize_file(path_, text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1);
    }
  }
}

void LabelStore::append(const LabelRecord& rec) {
  validate(rec);
  const std::string line = to_json_line(rec) + '\n';
  std::unique_lock lock(mutex_);
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::StorageFailure, "cannot open " + path_);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
  out.flush();
  if (!out) throw Error(Errc::StorageFailure, "append failed for " + path_);
  records_.push_back(rec);
}

std::vector<LabelRecord> LabelStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return records_;
}

std::size_t LabelStore::size() const {
  std::shared_lock lock(mutex_);
  return records_.size();
}

std::map<std::string, int> resolve_labels(const std::vector<LabelRecord>& records, Task task) {
  struct Vote {
    int value;
    std::int64_t ts;
    std::string rater;
  };
  // image -> rater -> latest vote; ties on timestamp fall to the later record.
  std::map<std::string, std::map<std::string, Vote>> votes;
  for (const auto& r : records) {
    if (r.task != task) continue;
    auto& per_rater = votes[r.image_id];
    auto it = per_rater.find(r.rater_id);
    if (it == per_rater.end()) {
      per_rater.emplace(r.rater_id, Vote{r.value, r.timestamp, r.rater_id});
    } else if (r.timestamp >= it->second.ts) {
      it->second = Vote{r.value, r.timestamp, r.rater_id};
    }
  }

  std::map<std::string, int> out;
  for (const auto& [image, per_rater] : votes) {
    std::map<int, std::size_t> count;
    std::map<int, const Vote*> newest;
    for (const auto& [rater, v] : per_rater) {
      ++count[v.value];
      const Vote*& n = newest[v.value];
      if (!n || std::tie(v.ts, v.rater) > std::tie(n->ts, n->rater)) n = &v;
    }
    int best = count.begin()->first;
    for (const auto& [value, c] : count) {
      const std::size_t bc = count[best];
      if (c > bc) {
        best = value;
      } else if (c == bc && value != best) {
        const Vote* a = newest[value];
        const Vote* b = newest[best];
        if (std::tie(a->ts, a->rater) > std::tie(b->ts, b->rater)) best = value;
      }
    }
    out.emplace(image, best);
  }
  return out;
}

Split stratified_split(const std::map<std::string, int>& labels, std::size_t per_class_dev,
                       std::size_t per_class_test, std::uint64_t seed) {
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& [id, value] : labels) by_class[value].push_back(id);

  for (const auto& [cls, members] : by_class) {
    const std::size_t need = per_class_dev + per_class_test;
    if (members.size() < need) {
      throw Error(Errc::InsufficientClass, "class " + std::to_string(cls) + " has " +
                                               std::to_string(members.size()) + ", need " + std::to_string(need));
    }
  }

  Split split;
  split.seed = seed;
  Rng rng(seed);
  for (auto& [cls, members] : by_class) {
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& dest = i < per_class_dev ? split.dev_ids
                   : i < per_class_dev + per_class_test ? split.test_ids
                                                          : split.train_ids;
      dest.push_back(members[i]);
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.dev_ids.begin(), split.dev_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

void write_split_csv(const std::string& path, const Split& split) {
  std::string out = "image_id,subset\n";
  std::vector<std::pair<std::string, std::string_view>> rows;
  for (const auto& id : split.train_ids) rows.emplace_back(id, "train");
  for (const auto& id : split.dev_ids) rows.emplace_back(id, "dev");
  for (const auto& id : split.test_ids) rows.emplace_back(id, "test");
  std::sort(rows.begin(), rows.end());
  out += "#seed," + std::to_string(split.seed) + '\n';
  for (const auto& [id, subset] : rows) out += id + ',' + std::string(subset) + '\n';
  io::write_file(path, out);
}

Split read_split_csv(const std::string& path) {
  const auto rows = io::lines(io::read_file(path));
  if (rows.empty() || rows[0] != "image_id,subset") throw Error(Errc::MalformedHeader, path);
  Split split;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split_csv_line(rows[i]);
    if (f.size() != 2) throw Error(Errc::MalformedRow, path + " line " + std::to_string(i + 1));
    if (f[0] == "#seed") {
      split.seed = static_cast<std::uint64_t>(std::stoull(f[1]));
    } else if (f[1] == "train") {
      split.train_ids.push_back(f[0]);
    } else if (f[1] == "dev") {
      split.dev_ids.push_back(f[0]);
    } else if (f[1] == "test") {
      split.test_ids.push_back(f[0]);
    } else {
      throw Error(Errc::MalformedRow, path + ": unknown subset '" + f[1] + "'");
    }
  }
  return split;
}

}  // namespace urbanvis
