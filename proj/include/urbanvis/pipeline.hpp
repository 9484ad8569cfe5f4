#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "urbanvis/dataset.hpp"
#include "urbanvis/features.hpp"
#include "urbanvis/metrics.hpp"
#include "urbanvis/segment_score.hpp"
#include "urbanvis/svm.hpp"

namespace urbanvis::pipeline {

// ---- features -------------------------------------------------------------

/// Codebook training sample: non-zero descriptors drawn from every image, at most
/// ceil(max_descriptors / n_images) per image, then capped at max_descriptors.
/// Each image draws from its own generator seeded from (seed, position in image_id
/// order), so the sample does not depend on thread scheduling.
RowMatrix sample_descriptors(const std::vector<ImageRecord>& images, std::size_t max_descriptors,
                             std::uint64_t seed, unsigned threads = 0);

/// BoVW histograms for every image, keyed by image_id.
FeatureSet extract_features(const std::vector<ImageRecord>& images, const Codebook& codebook,
                            unsigned threads = 0);

// ---- training -------------------------------------------------------------

struct SplitSpec {
  std::size_t per_class_dev = 40;
  std::size_t per_class_test = 60;
  std::uint64_t seed = 0;
};

struct GridPoint {
  double lambda = 0.0;
  double dev_score = 0.0;  // dev F1 for binary tasks, dev MSE for quality
};

struct TrainResult {
  svm::SvmModel model;
  metrics::MetricsReport train;
  std::optional<metrics::MetricsReport> dev;
  std::optional<metrics::MetricsReport> test;
  std::vector<GridPoint> grid;
};

// Trains on the split's train ids and reports train/dev/test metrics.
//
// With a lambda grid each value is trained on train and scored on dev; the best
// dev F1 (binary tasks) or lowest dev MSE (quality) wins, ties to the earlier grid
// entry. The test ids are evaluated once, with the selected model. An empty grid
// uses hyper.lambda as-is.
//
// Throws UnknownImage for split ids without a label, MissingFeature for labeled
// split ids without a feature vector, InvalidArgument for a grid without dev ids.
TrainResult train_task(Task task, const std::map<std::string, int>& labels, const FeatureSet& features,
                       const svm::Hyperparams& hyper, const Split& split, const std::vector<double>& lambda_grid = {});

TrainResult train_task(Task task, const std::map<std::string, int>& labels, const FeatureSet& features,
                       const svm::Hyperparams& hyper, const SplitSpec& split_spec,
                       const std::vector<double>& lambda_grid = {});

/// Metrics of the model on the given ids against their labels.
metrics::MetricsReport evaluate(const svm::SvmModel& model, const std::map<std::string, int>& labels,
                                const FeatureSet& features, const std::vector<std::string>& ids);

std::string train_report_json(Task task, const TrainResult& result);

// ---- prediction and scoring ----------------------------------------------

struct Prediction {
  std::string image_id;
  Task task = Task::Quality;
  int predicted = 0;
  Eigen::VectorXd decisions;
};

/// Predictions in image_id order. Throws MissingFeature naming the first image
/// without a feature vector.
std::vector<Prediction> predict_images(const svm::SvmModel& model, const std::vector<std::string>& image_ids,
                                       const FeatureSet& features, unsigned threads = 0);

/// predictions.csv: image_id,task,predicted,decision_values... (one trailing
/// column per decision value), rows ordered by (image_id, task).
std::string predictions_csv(std::vector<Prediction> predictions);

struct ScreenResult {
  std::vector<ImageRecord> qualified;
  std::vector<ImageRecord> rejected;
};

/// Partitions images by the qualification model's prediction (1 = qualified).
ScreenResult screen_qualified(const std::vector<ImageRecord>& images, const svm::SvmModel& qualification_model,
                              const FeatureSet& features, unsigned threads = 0);

/// Per-segment aggregation of per-image predicted classes; segments without images are omitted.
std::vector<SegmentScore> aggregate_segments(const std::vector<ImageRecord>& images,
                                             const std::map<std::string, int>& quality,
                                             const std::map<std::string, int>& continuity);

/// Scores qualified images and aggregates them per segment, ordered by segment_id.
std::vector<SegmentScore> score_segments(const std::vector<ImageRecord>& qualified, const svm::SvmModel& quality_model,
                                         const svm::SvmModel& continuity_model, const FeatureSet& features,
                                         unsigned threads = 0, std::vector<Prediction>* predictions = nullptr);

/// scores.csv: segment_id,quality_mean,continuity_share,n_images (absent values empty).
void write_scores_csv(const std::string& path, const std::vector<SegmentScore>& scores);
std::vector<SegmentScore> read_scores_csv(const std::string& path);

// ---- survey validation ----------------------------------------------------

struct SurveyRecord {
  std::string segment_id;
  int rating = 0;  // 1..5
  std::optional<std::string> gender;
  std::optional<std::string> age_band;
  std::optional<std::string> residence;
  std::optional<std::string> education;
  // Which machine score the rating is about; unset applies to both.
  std::optional<Task> feature;
};

/// Throws InvalidValue unless rating is in 1..5.
void validate(const SurveyRecord& rec);

/// survey.csv: segment_id,rating[,gender,age_band,residence,education][,feature].
/// Optional columns are matched by header name; empty cells are absent.
std::vector<SurveyRecord> parse_survey_csv(const std::string& text);
std::vector<SurveyRecord> read_survey_csv(const std::string& path);

// Spearman r between machine scores and per-segment survey means, over the segments
// present in both, for each feature that has survey records (quality, then continuity).
// Scores lacking a value for a feature do not count as present for it.
// Throws TooFewPoints (fewer than 3 shared segments) or ConstantInput.
std::vector<metrics::ValidationReport> validate_against_survey(const std::vector<SegmentScore>& scores,
                                                               const std::vector<SurveyRecord>& surveys);

}  // namespace urbanvis::pipeline
