#include "urbanvis/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "json.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/parallel.hpp"
#include "urbanvis/raster.hpp"
#include "urbanvis/rng.hpp"

namespace urbanvis::pipeline {

using nlohmann::json;

namespace {

std::vector<ImageRecord> sorted_by_id(std::vector<ImageRecord> images) {
  std::sort(images.begin(), images.end(),
            [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
  return images;
}

const FeatureVector& feature_of(const FeatureSet& features, const std::string& id) {
  const auto it = features.vectors.find(id);
  if (it == features.vectors.end()) throw Error(Errc::MissingFeature, "no feature vector for image " + id);
  return it->second;
}

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXi y;
};

Design design(const std::map<std::string, int>& labels, const FeatureSet& features,
              const std::vector<std::string>& ids) {
  Design d{Eigen::MatrixXd(static_cast<Eigen::Index>(ids.size()), features.dimension()),
           Eigen::VectorXi(static_cast<Eigen::Index>(ids.size()))};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto it = labels.find(ids[i]);
    if (it == labels.end()) throw Error(Errc::UnknownImage, "split names unlabeled image " + ids[i]);
    const auto& fv = feature_of(features, ids[i]);
    if (fv.values.size() != d.X.cols()) throw Error(Errc::DimensionMismatch, "feature dimension of " + ids[i]);
    d.X.row(static_cast<Eigen::Index>(i)) = fv.values.transpose();
    d.y(static_cast<Eigen::Index>(i)) = it->second;
  }
  return d;
}

svm::SvmModel fit(Task task, const Design& d, const svm::Hyperparams& hyper, const std::string& extractor_id) {
  if (task == Task::Quality) return svm::train_ovr(d.X, d.y, hyper, task, extractor_id);
  return svm::train_binary(d.X, d.y, hyper, task, extractor_id);
}

Eigen::VectorXi predict_rows(const svm::SvmModel& model, const Eigen::MatrixXd& X) {
  Eigen::VectorXi out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = svm::predict(model, X.row(i).transpose());
  return out;
}

metrics::MetricsReport report(Task task, const Eigen::VectorXi& y_true, const Eigen::VectorXi& y_pred) {
  if (task == Task::Quality) return metrics::evaluate_multiclass(y_true, y_pred, task_classes(task));
  return metrics::evaluate_binary(y_true, y_pred, 1);
}

json report_json(const metrics::MetricsReport& r) {
  json per_class = json::array();
  for (const auto& c : r.per_class) {
    per_class.push_back({{"label", c.label}, {"precision", c.prf.precision}, {"recall", c.prf.recall},
                         {"f1", c.prf.f1}});
  }
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"positive_class", r.positive_class ? json(*r.positive_class) : json(nullptr)},
          {"mse", r.mse ? json(*r.mse) : json(nullptr)},
          {"per_class", std::move(per_class)}};
}

std::string optional_field(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

}  // namespace

RowMatrix sample_descriptors(const std::vector<ImageRecord>& images, std::size_t max_descriptors,
                             std::uint64_t seed, unsigned threads) {
  if (images.empty()) throw Error(Errc::EmptyInput, "no images to sample descriptors from");
  if (max_descriptors == 0) throw Error(Errc::InvalidArgument, "max_descriptors must be positive");
  const auto sorted = sorted_by_id(images);
  const std::size_t per_image = (max_descriptors + sorted.size() - 1) / sorted.size();

  std::vector<DescriptorMatrix> picked(sorted.size());
  parallel_for(sorted.size(), threads, [&](std::size_t i) {
    const DescriptorMatrix d = dense_descriptors(load_image(sorted[i].raster_path));
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      if (d.row(r).squaredNorm() > 0.0) rows.push_back(r);
    }
    Rng rng(mix_seed(seed ^ mix_seed(i)));
    rng.shuffle(rows);
    if (rows.size() > per_image) rows.resize(per_image);
    std::sort(rows.begin(), rows.end());
    picked[i].resize(static_cast<Eigen::Index>(rows.size()), kDescriptorDim);
    for (std::size_t r = 0; r < rows.size(); ++r) picked[i].row(static_cast<Eigen::Index>(r)) = d.row(rows[r]);
  });

  Eigen::Index total = 0;
  for (const auto& p : picked) total += p.rows();
  RowMatrix all(total, kDescriptorDim);
  Eigen::Index at = 0;
  for (const auto& p : picked) {
    all.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  if (static_cast<std::size_t>(total) <= max_descriptors) return all;

  std::vector<Eigen::Index> keep(static_cast<std::size_t>(total));
  std::iota(keep.begin(), keep.end(), Eigen::Index{0});
  Rng rng(mix_seed(seed));
  rng.shuffle(keep);
  keep.resize(max_descriptors);
  std::sort(keep.begin(), keep.end());
  RowMatrix out(static_cast<Eigen::Index>(max_descriptors), kDescriptorDim);
  for (std::size_t r = 0; r < keep.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = all.row(keep[r]);
  return out;
}

FeatureSet extract_features(const std::vector<ImageRecord>& images, const Codebook& codebook, unsigned threads) {
  std::vector<FeatureVector> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    out[i] = extract_bovw(images[i].image_id, load_image(images[i].raster_path), codebook);
  });
  FeatureSet set = to_feature_set(std::move(out));
  set.extractor_id = codebook.extractor_id;
  return set;
}

TrainResult train_task(Task task, const std::map<std::string, int>& labels, const FeatureSet& features,
                       const svm::Hyperparams& hyper, const Split& split, const std::vector<double>& lambda_grid) {
  svm::validate(hyper);
  if (!lambda_grid.empty() && split.dev_ids.empty()) {
    throw Error(Errc::InvalidArgument, "a lambda grid needs a non-empty development set");
  }
  const Design train = design(labels, features, split.train_ids);
  TrainResult result;

  if (lambda_grid.empty()) {
    result.model = fit(task, train, hyper, features.extractor_id);
  } else {
    const Design dev = design(labels, features, split.dev_ids);
    std::optional<std::size_t> best;
    for (double lambda : lambda_grid) {
      svm::Hyperparams h = hyper;
      h.lambda = lambda;
      svm::SvmModel model = fit(task, train, h, features.extractor_id);
      const auto r = report(task, dev.y, predict_rows(model, dev.X));
      const double score = task == Task::Quality ? *r.mse : r.f1;
      result.grid.push_back({lambda, score});
      const bool better = !best || (task == Task::Quality ? score < result.grid[*best].dev_score
                                                          : score > result.grid[*best].dev_score);
      if (better) {
        best = result.grid.size() - 1;
        result.model = std::move(model);
      }
    }
  }

  result.train = report(task, train.y, predict_rows(result.model, train.X));
  if (!split.dev_ids.empty()) {
    const Design dev = design(labels, features, split.dev_ids);
    result.dev = report(task, dev.y, predict_rows(result.model, dev.X));
  }
  if (!split.test_ids.empty()) {
    const Design test = design(labels, features, split.test_ids);
    result.test = report(task, test.y, predict_rows(result.model, test.X));
  }
  return result;
}

TrainResult train_task(Task task, const std::map<std::string, int>& labels, const FeatureSet& features,
                       const svm::Hyperparams& hyper, const SplitSpec& split_spec,
                       const std::vector<double>& lambda_grid) {
  const Split split = stratified_split(labels, split_spec.per_class_dev, split_spec.per_class_test, split_spec.seed);
  return train_task(task, labels, features, hyper, split, lambda_grid);
}

metrics::MetricsReport evaluate(const svm::SvmModel& model, const std::map<std::string, int>& labels,
                                const FeatureSet& features, const std::vector<std::string>& ids) {
  const Design d = design(labels, features, ids);
  return report(model.task, d.y, predict_rows(model, d.X));
}

std::string train_report_json(Task task, const TrainResult& result) {
  json grid = json::array();
  for (const auto& g : result.grid) grid.push_back({{"lambda", g.lambda}, {"dev_score", g.dev_score}});
  const auto& h = result.model.hyper;
  json doc = {{"task", task_name(task)},
              {"extractor_id", result.model.extractor_id},
              {"lambda", h.lambda},
              {"epochs", h.epochs},
              {"seed", h.seed},
              {"normalize", svm::normalization_name(h.normalize)},
              {"grid", std::move(grid)},
              {"train", report_json(result.train)},
              {"dev", result.dev ? report_json(*result.dev) : json(nullptr)},
              {"test", result.test ? report_json(*result.test) : json(nullptr)}};
  return doc.dump(2) + "\n";
}

std::vector<Prediction> predict_images(const svm::SvmModel& model, const std::vector<std::string>& image_ids,
                                       const FeatureSet& features, unsigned threads) {
  std::vector<std::string> ids = image_ids;
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) feature_of(features, id);
  std::vector<Prediction> out(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    Eigen::VectorXd d = svm::decision_values(model, features.vectors.at(ids[i]).values);
    out[i] = {ids[i], model.task, svm::predict_from_decisions(model, d), std::move(d)};
  });
  return out;
}

std::string predictions_csv(std::vector<Prediction> predictions) {
  std::sort(predictions.begin(), predictions.end(), [](const Prediction& a, const Prediction& b) {
    return std::tie(a.image_id, a.task) < std::tie(b.image_id, b.task);
  });
  std::string out = "image_id,task,predicted,decision_values\n";
  for (const auto& p : predictions) {
    out += p.image_id + ',' + std::string(task_name(p.task)) + ',' + std::to_string(p.predicted);
    for (double d : p.decisions) out += ',' + io::format_double(d);
    out += '\n';
  }
  return out;
}

ScreenResult screen_qualified(const std::vector<ImageRecord>& images, const svm::SvmModel& qualification_model,
                              const FeatureSet& features, unsigned threads) {
  if (qualification_model.task != Task::Qualification) {
    throw Error(Errc::InvalidArgument, "screening needs a qualification model");
  }
  const auto sorted = sorted_by_id(images);
  std::vector<std::string> ids;
  for (const auto& img : sorted) ids.push_back(img.image_id);
  const auto preds = predict_images(qualification_model, ids, features, threads);
  ScreenResult out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    (preds[i].predicted == 1 ? out.qualified : out.rejected).push_back(sorted[i]);
  }
  return out;
}

std::vector<SegmentScore> aggregate_segments(const std::vector<ImageRecord>& images,
                                             const std::map<std::string, int>& quality,
                                             const std::map<std::string, int>& continuity) {
  struct Acc {
    double quality_sum = 0.0;
    std::size_t continuous = 0;
    std::size_t n = 0;
  };
  std::map<std::string, Acc> by_segment;
  for (const auto& img : images) {
    const auto q = quality.find(img.image_id);
    const auto c = continuity.find(img.image_id);
    if (q == quality.end() || c == continuity.end()) {
      throw Error(Errc::UnknownImage, "no prediction for image " + img.image_id);
    }
    Acc& a = by_segment[img.segment_id];
    a.quality_sum += q->second;
    a.continuous += c->second == 1;
    ++a.n;
  }
  std::vector<SegmentScore> out;
  for (const auto& [segment, a] : by_segment) {
    const double n = static_cast<double>(a.n);
    out.push_back({segment, a.quality_sum / n, static_cast<double>(a.continuous) / n, a.n});
  }
  return out;
}

std::vector<SegmentScore> score_segments(const std::vector<ImageRecord>& qualified, const svm::SvmModel& quality_model,
                                         const svm::SvmModel& continuity_model, const FeatureSet& features,
                                         unsigned threads, std::vector<Prediction>* predictions) {
  if (quality_model.task != Task::Quality || continuity_model.task != Task::Continuity) {
    throw Error(Errc::InvalidArgument, "scoring needs a quality model and a continuity model");
  }
  std::vector<std::string> ids;
  for (const auto& img : qualified) ids.push_back(img.image_id);
  auto q = predict_images(quality_model, ids, features, threads);
  auto c = predict_images(continuity_model, ids, features, threads);
  std::map<std::string, int> quality, continuity;
  for (const auto& p : q) quality[p.image_id] = p.predicted;
  for (const auto& p : c) continuity[p.image_id] = p.predicted;
  if (predictions) {
    predictions->insert(predictions->end(), std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
    predictions->insert(predictions->end(), std::make_move_iterator(c.begin()), std::make_move_iterator(c.end()));
  }
  return aggregate_segments(qualified, quality, continuity);
}

void write_scores_csv(const std::string& path, const std::vector<SegmentScore>& scores) {
  std::string out = "segment_id,quality_mean,continuity_share,n_images\n";
  for (const auto& s : scores) {
    out += s.segment_id + ',' + optional_field(s.quality_mean) + ',' + optional_field(s.continuity_share) + ',' +
           std::to_string(s.n_images) + '\n';
  }
  io::write_file(path, out);
}

std::vector<SegmentScore> read_scores_csv(const std::string& path) {
  const auto rows = io::lines(io::read_file(path));
  if (rows.empty() || rows[0] != "segment_id,quality_mean,continuity_share,n_images") {
    throw Error(Errc::MalformedHeader, path);
  }
  std::vector<SegmentScore> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split_csv_line(rows[i]);
    if (f.size() != 4) throw Error(Errc::MalformedRow, path + " line " + std::to_string(i + 1));
    SegmentScore s{f[0], std::nullopt, std::nullopt, 0};
    if (!f[1].empty()) s.quality_mean = io::parse_double(f[1]);
    if (!f[2].empty()) s.continuity_share = io::parse_double(f[2]);
    const long long n = io::parse_int(f[3]);
    if (n < 0) throw Error(Errc::MalformedRow, path + " line " + std::to_string(i + 1));
    s.n_images = static_cast<std::size_t>(n);
    out.push_back(std::move(s));
  }
  return out;
}

void validate(const SurveyRecord& rec) {
  if (rec.rating < 1 || rec.rating > 5) {
    throw Error(Errc::InvalidValue, "survey rating must be 1..5, got " + std::to_string(rec.rating));
  }
  if (rec.feature == Task::Qualification) throw Error(Errc::InvalidValue, "survey feature must be quality or continuity");
}

std::vector<SurveyRecord> parse_survey_csv(const std::string& text) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw Error(Errc::MalformedHeader, "empty survey file");
  const auto header = io::split_csv_line(rows[0]);
  if (header.size() < 2 || header[0] != "segment_id" || header[1] != "rating") {
    throw Error(Errc::MalformedHeader, "survey header must start with segment_id,rating");
  }
  static const std::vector<std::string> optional_columns{"gender", "age_band", "residence", "education", "feature"};
  for (std::size_t c = 2; c < header.size(); ++c) {
    if (std::find(optional_columns.begin(), optional_columns.end(), header[c]) == optional_columns.end()) {
      throw Error(Errc::MalformedHeader, "unknown survey column " + header[c]);
    }
  }

  std::vector<SurveyRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split_csv_line(rows[i]);
    const std::string where = "survey line " + std::to_string(i + 1);
    if (f.size() != header.size()) throw Error(Errc::MalformedRow, where);
    SurveyRecord rec;
    rec.segment_id = f[0];
    rec.rating = static_cast<int>(io::parse_int(f[1]));
    for (std::size_t c = 2; c < header.size(); ++c) {
      if (f[c].empty()) continue;
      if (header[c] == "gender") rec.gender = f[c];
      if (header[c] == "age_band") rec.age_band = f[c];
      if (header[c] == "residence") rec.residence = f[c];
      if (header[c] == "education") rec.education = f[c];
      if (header[c] == "feature") {
        rec.feature = parse_task(f[c]);
        if (!rec.feature) throw Error(Errc::MalformedRow, where + ": unknown feature " + f[c]);
      }
    }
    validate(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SurveyRecord> read_survey_csv(const std::string& path) { return parse_survey_csv(io::read_file(path)); }

std::vector<metrics::ValidationReport> validate_against_survey(const std::vector<SegmentScore>& scores,
                                                               const std::vector<SurveyRecord>& surveys) {
  std::vector<metrics::ValidationReport> out;
  for (Task feature : {Task::Quality, Task::Continuity}) {
    std::map<std::string, std::pair<double, std::size_t>> survey_sum;
    for (const auto& s : surveys) {
      validate(s);
      if (s.feature && *s.feature != feature) continue;
      auto& acc = survey_sum[s.segment_id];
      acc.first += s.rating;
      ++acc.second;
    }
    if (survey_sum.empty()) continue;

    std::map<std::string, double> machine;
    for (const auto& s : scores) {
      const auto& v = feature == Task::Quality ? s.quality_mean : s.continuity_share;
      if (v) machine[s.segment_id] = *v;
    }
    std::vector<double> m, h;
    for (const auto& [segment, value] : machine) {
      const auto it = survey_sum.find(segment);
      if (it == survey_sum.end()) continue;
      m.push_back(value);
      h.push_back(it->second.first / static_cast<double>(it->second.second));
    }
    const Eigen::Map<const Eigen::VectorXd> mv(m.data(), static_cast<Eigen::Index>(m.size()));
    const Eigen::Map<const Eigen::VectorXd> hv(h.data(), static_cast<Eigen::Index>(h.size()));
    out.push_back({feature, metrics::spearman(mv, hv), m.size()});
  }
  return out;
}

}  // namespace urbanvis::pipeline
