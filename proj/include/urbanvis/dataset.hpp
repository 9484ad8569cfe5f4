#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace urbanvis {

/// The three rating tasks. Value domains:
///   qualification  0 = unqualified ("street image"), 1 = qualified ("building image")
///   quality        1..4 points
///   continuity     0 = discontinuous, 1 = continuous
enum class Task { Qualification, Quality, Continuity };

std::string_view task_name(Task t) noexcept;
std::optional<Task> parse_task(std::string_view s) noexcept;
std::vector<int> task_classes(Task t);
bool valid_label_value(Task t, int value) noexcept;

/// Expert rating distribution reported for the original Beijing corpus, in percent,
/// keyed by class value. Shown next to live statistics; never enforced.
std::map<int, double> reference_shares(Task t);

struct ImageRecord {
  std::string image_id;
  std::string point_id;
  std::string segment_id;
  std::string raster_path;
  int width_px = 0;
  int height_px = 0;
};

/// Reads images.csv. Relative raster paths are resolved against the manifest's directory.
std::vector<ImageRecord> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<ImageRecord>& images);

struct LabelRecord {
  std::string image_id;
  Task task = Task::Quality;
  int value = 0;
  std::string rater_id;
  std::int64_t timestamp = 0;  // UTC seconds

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

/// Throws InvalidValue when the record violates its task's value domain.
void validate(const LabelRecord& rec);

std::string to_json_line(const LabelRecord& rec);
LabelRecord label_from_json(std::string_view line);

/// Append-only JSONL label store.
///
/// One writer per process: appends serialize on an internal mutex and each record
/// is written as a single line. Readers get a snapshot copy of the records.
/// A trailing partial line (torn write) is ignored when the file is opened.
class LabelStore {
 public:
  explicit LabelStore(std::string path);

  void append(const LabelRecord& rec);
  std::vector<LabelRecord> snapshot() const;
  std::size_t size() const;
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  mutable std::shared_mutex mutex_;
  std::vector<LabelRecord> records_;
};

std::vector<LabelRecord> read_labels(const std::string& path);

/// One value per image for the task.
///
/// Within a rater the latest record wins (timestamp, then file order). Across raters
/// the majority value wins; a tie goes to the value whose newest vote is most recent,
/// ordering votes by (timestamp, rater_id).
std::map<std::string, int> resolve_labels(const std::vector<LabelRecord>& records, Task task);

struct Split {
  std::vector<std::string> train_ids;
  std::vector<std::string> dev_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;

  friend bool operator==(const Split&, const Split&) = default;
};

/// Draws exactly per_class_dev and per_class_test members of every class without
/// replacement; everything else goes to train. Classes are visited in ascending order,
/// members in image_id order, with one seeded generator shared across classes.
/// Throws InsufficientClass when a class is too small.
Split stratified_split(const std::map<std::string, int>& labels, std::size_t per_class_dev,
                       std::size_t per_class_test, std::uint64_t seed);

void write_split_csv(const std::string& path, const Split& split);
Split read_split_csv(const std::string& path);

}  // namespace urbanvis
