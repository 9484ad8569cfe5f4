#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "urbanvis/dataset.hpp"
#include "urbanvis/features.hpp"
#include "urbanvis/svm.hpp"

namespace urbanvis::labelsvc {

enum class Strategy { Sequential, Uncertain };

std::optional<Strategy> parse_strategy(std::string_view s) noexcept;

struct Progress {
  std::size_t labeled = 0;  // images this rater has labeled for the task
  std::size_t total = 0;
};

struct NextItem {
  std::string image_id;
  std::string image_url;
  Task task = Task::Quality;
  Progress progress;
  std::optional<std::string> warning;  // set when the uncertain strategy fell back to sequential
};

struct TaskSummary {
  Task task = Task::Quality;
  std::size_t labeled = 0;  // images with at least one label
  std::size_t total = 0;
};

struct Stats {
  Task task = Task::Quality;
  std::map<int, std::size_t> counts;       // over resolved labels, every class present
  std::map<int, double> shares;            // percent; 0 when there are no labels
  std::map<int, double> reference_shares;  // percent
};

struct Submission {
  std::string image_id;
  std::string task;
  int value = 0;
  std::string rater_id;
};

using Clock = std::function<std::int64_t()>;

/// UTC seconds from the system clock.
std::int64_t system_clock_seconds();

// Serves rating items over a fixed corpus and records ratings in a LabelStore.
//
// Every image in the manifest is a candidate for every task. Within a (rater, task)
// session an image is served at most once until every image the rater has not yet
// labeled has been served; then the session starts over. Thread-safe.
class LabelService {
 public:
  LabelService(std::vector<ImageRecord> corpus, LabelStore& store, Clock clock = system_clock_seconds);

  /// Enables the uncertain strategy for the model's task.
  void set_model(svm::SvmModel model, std::shared_ptr<const FeatureSet> features);
  bool has_model(Task task) const;

  // Sequential: lowest image_id not labeled by the rater. Uncertain: the candidate
  // with the smallest |decision| (binary) or top-two decision gap (quality), ties to
  // the lowest image_id; images without a feature vector come after all scored ones.
  // Without a model for the task, uncertain falls back to sequential and sets warning
  // "NoModelLoaded". Throws CorpusExhausted when the rater has labeled every image.
  NextItem next_item(Task task, const std::string& rater_id, Strategy strategy);

  // Validates and stores a rating, stamped with the service clock.
  // Throws InvalidArgument (empty rater), InvalidValue (bad task or value domain),
  // UnknownImage.
  LabelRecord submit(const Submission& submission);

  Stats stats(Task task) const;
  std::vector<TaskSummary> tasks() const;

  /// nullptr when the image is not in the corpus.
  const ImageRecord* find_image(const std::string& image_id) const;

 private:
  struct Model {
    svm::SvmModel model;
    std::shared_ptr<const FeatureSet> features;
  };

  std::optional<double> uncertainty(const Model& m, const std::string& image_id) const;

  std::map<std::string, ImageRecord> corpus_;
  LabelStore& store_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<Task, Model> models_;
  std::map<std::pair<std::string, Task>, std::set<std::string>> served_;
};

// HTTP front end:
//   GET  /api/tasks                              [{task, labeled, total}]
//   GET  /api/next?task=T&rater=R&strategy=S     {image_id, image_url, task, progress[, warning]}
//   POST /api/labels {image_id, task, value, rater_id}   201 {..., ts}
//   GET  /api/stats?task=T                       {task, counts, shares, reference_shares}
//   GET  /images/{image_id}                      raster bytes
//   static files under / when ui_dir is set
// Errors carry {error, message}: 400 malformed request, 404 unknown image,
// 410 corpus exhausted, 422 invalid label.
class HttpServer {
 public:
  HttpServer(LabelService& service, std::string ui_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds host:port (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace urbanvis::labelsvc
