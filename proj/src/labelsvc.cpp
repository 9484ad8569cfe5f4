#include "urbanvis/labelsvc.hpp"

#include <chrono>

#include "httplib.h"
#include "json.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/raster.hpp"

namespace urbanvis::labelsvc {

using nlohmann::json;

std::optional<Strategy> parse_strategy(std::string_view s) noexcept {
  if (s == "sequential") return Strategy::Sequential;
  if (s == "uncertain") return Strategy::Uncertain;
  return std::nullopt;
}

std::int64_t system_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

LabelService::LabelService(std::vector<ImageRecord> corpus, LabelStore& store, Clock clock)
    : store_(store), clock_(std::move(clock)) {
  if (corpus.empty()) throw Error(Errc::EmptyInput, "labeling corpus is empty");
  for (auto& img : corpus) {
    const std::string id = img.image_id;
    corpus_.emplace(id, std::move(img));
  }
}

void LabelService::set_model(svm::SvmModel model, std::shared_ptr<const FeatureSet> features) {
  std::lock_guard lock(mutex_);
  const Task task = model.task;
  models_[task] = Model{std::move(model), std::move(features)};
}

bool LabelService::has_model(Task task) const {
  std::lock_guard lock(mutex_);
  return models_.contains(task);
}

std::optional<double> LabelService::uncertainty(const Model& m, const std::string& image_id) const {
  const auto it = m.features->vectors.find(image_id);
  if (it == m.features->vectors.end() || it->second.values.size() != m.model.dimension()) return std::nullopt;
  Eigen::VectorXd d = svm::decision_values(m.model, it->second.values);
  if (d.size() == 1) return std::abs(d(0));
  std::sort(d.begin(), d.end(), std::greater<>());
  return d(0) - d(1);
}

NextItem LabelService::next_item(Task task, const std::string& rater_id, Strategy strategy) {
  const auto records = store_.snapshot();
  std::set<std::string> labeled;
  for (const auto& r : records) {
    if (r.task == task && r.rater_id == rater_id && corpus_.contains(r.image_id)) labeled.insert(r.image_id);
  }
  const Progress progress{labeled.size(), corpus_.size()};
  if (labeled.size() == corpus_.size()) {
    throw Error(Errc::CorpusExhausted, "rater " + rater_id + " has labeled every image for " +
                                           std::string(task_name(task)));
  }

  std::lock_guard lock(mutex_);
  auto& served = served_[{rater_id, task}];
  std::vector<std::string> fresh;
  for (const auto& [id, img] : corpus_) {
    if (!labeled.contains(id) && !served.contains(id)) fresh.push_back(id);
  }
  if (fresh.empty()) {
    served.clear();
    for (const auto& [id, img] : corpus_) {
      if (!labeled.contains(id)) fresh.push_back(id);
    }
  }

  NextItem item;
  item.task = task;
  item.progress = progress;
  item.image_id = fresh.front();
  if (strategy == Strategy::Uncertain) {
    const auto m = models_.find(task);
    if (m == models_.end()) {
      item.warning = std::string(errc_name(Errc::NoModelLoaded));
    } else {
      std::optional<double> best;
      for (const auto& id : fresh) {
        const auto u = uncertainty(m->second, id);
        if (u && (!best || *u < *best)) {
          best = u;
          item.image_id = id;
        }
      }
    }
  }
  served.insert(item.image_id);
  item.image_url = "/images/" + item.image_id;
  return item;
}

LabelRecord LabelService::submit(const Submission& submission) {
  const auto task = parse_task(submission.task);
  if (!task) throw Error(Errc::InvalidValue, "unknown task '" + submission.task + "'");
  if (submission.rater_id.empty()) throw Error(Errc::InvalidArgument, "rater_id is required");
  if (!corpus_.contains(submission.image_id)) throw Error(Errc::UnknownImage, "unknown image " + submission.image_id);
  LabelRecord rec{submission.image_id, *task, submission.value, submission.rater_id, clock_()};
  store_.append(rec);
  return rec;
}

Stats LabelService::stats(Task task) const {
  Stats s;
  s.task = task;
  s.reference_shares = reference_shares(task);
  for (int c : task_classes(task)) {
    s.counts[c] = 0;
    s.shares[c] = 0.0;
  }
  std::size_t total = 0;
  for (const auto& [id, value] : resolve_labels(store_.snapshot(), task)) {
    if (!corpus_.contains(id)) continue;
    ++s.counts[value];
    ++total;
  }
  if (total > 0) {
    for (auto& [c, share] : s.shares) share = 100.0 * static_cast<double>(s.counts[c]) / static_cast<double>(total);
  }
  return s;
}

std::vector<TaskSummary> LabelService::tasks() const {
  const auto records = store_.snapshot();
  std::vector<TaskSummary> out;
  for (Task t : {Task::Qualification, Task::Quality, Task::Continuity}) {
    std::set<std::string> labeled;
    for (const auto& r : records) {
      if (r.task == t && corpus_.contains(r.image_id)) labeled.insert(r.image_id);
    }
    out.push_back({t, labeled.size(), corpus_.size()});
  }
  return out;
}

const ImageRecord* LabelService::find_image(const std::string& image_id) const {
  const auto it = corpus_.find(image_id);
  return it == corpus_.end() ? nullptr : &it->second;
}

// ---- HTTP -------------------------------------------------------------------

namespace {

json class_map(const auto& m) {
  json out = json::object();
  for (const auto& [k, v] : m) out[std::to_string(k)] = v;
  return out;
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

int status_for(Errc code) {
  switch (code) {
    case Errc::UnknownImage: return 404;
    case Errc::CorpusExhausted: return 410;
    case Errc::InvalidValue: return 422;
    case Errc::InvalidArgument: return 400;
    default: return 500;
  }
}

std::optional<Task> task_param(const httplib::Request& req, httplib::Response& res) {
  const auto task = parse_task(req.get_param_value("task"));
  if (!task) send_error(res, 400, "InvalidArgument", "query parameter task must be qualification, quality or continuity");
  return task;
}

}  // namespace

struct HttpServer::Impl {
  LabelService& service;
  httplib::Server server;

  explicit Impl(LabelService& s) : service(s) {}

  // Runs a handler, mapping library errors to HTTP statuses.
  template <typename Fn>
  auto guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), errc_name(e.code()), e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "InternalError", e.what());
      }
    };
  }

  void routes() {
    server.Get("/api/tasks", guarded([this](const httplib::Request&, httplib::Response& res) {
      json out = json::array();
      for (const auto& t : service.tasks()) {
        out.push_back({{"task", task_name(t.task)}, {"labeled", t.labeled}, {"total", t.total}});
      }
      send_json(res, 200, out);
    }));

    server.Get("/api/next", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto task = task_param(req, res);
      if (!task) return;
      const std::string rater = req.get_param_value("rater");
      if (rater.empty()) return send_error(res, 400, "InvalidArgument", "query parameter rater is required");
      const std::string strategy_name = req.has_param("strategy") ? req.get_param_value("strategy") : "sequential";
      const auto strategy = parse_strategy(strategy_name);
      if (!strategy) return send_error(res, 400, "InvalidArgument", "strategy must be sequential or uncertain");
      const NextItem item = service.next_item(*task, rater, *strategy);
      json out = {{"image_id", item.image_id},
                  {"image_url", item.image_url},
                  {"task", task_name(item.task)},
                  {"progress", {{"labeled", item.progress.labeled}, {"total", item.progress.total}}}};
      if (item.warning) out["warning"] = *item.warning;
      send_json(res, 200, out);
    }));

    server.Post("/api/labels", guarded([this](const httplib::Request& req, httplib::Response& res) {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        return send_error(res, 400, "InvalidArgument", std::string("body is not JSON: ") + e.what());
      }
      if (!body.is_object() || !body.contains("image_id") || !body["image_id"].is_string() ||
          !body.contains("task") || !body["task"].is_string() || !body.contains("rater_id") ||
          !body["rater_id"].is_string() || !body.contains("value")) {
        return send_error(res, 400, "InvalidArgument", "body needs string image_id, task, rater_id and a value");
      }
      if (!body["value"].is_number_integer()) {
        return send_error(res, 422, "InvalidValue", "value must be an integer");
      }
      const LabelRecord rec = service.submit({body["image_id"].get<std::string>(), body["task"].get<std::string>(),
                                              body["value"].get<int>(), body["rater_id"].get<std::string>()});
      send_json(res, 201, json::parse(to_json_line(rec)));
    }));

    server.Get("/api/stats", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto task = task_param(req, res);
      if (!task) return;
      const Stats s = service.stats(*task);
      send_json(res, 200,
                {{"task", task_name(s.task)},
                 {"counts", class_map(s.counts)},
                 {"shares", class_map(s.shares)},
                 {"reference_shares", class_map(s.reference_shares)}});
    }));

    server.Get(R"(/images/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const ImageRecord* img = service.find_image(req.matches[1]);
      if (!img) return send_error(res, 404, "UnknownImage", "unknown image " + std::string(req.matches[1]));
      res.set_content(io::read_file(img->raster_path), content_type_for(img->raster_path));
    }));
  }
};

HttpServer::HttpServer(LabelService& service, std::string ui_dir) : impl_(std::make_unique<Impl>(service)) {
  impl_->routes();
  if (!ui_dir.empty() && !impl_->server.set_mount_point("/", ui_dir)) {
    throw Error(Errc::InvalidArgument, "UI directory does not exist: " + ui_dir);
  }
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace urbanvis::labelsvc
