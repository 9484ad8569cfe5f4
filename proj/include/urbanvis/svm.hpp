#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "urbanvis/dataset.hpp"
#include "urbanvis/features.hpp"

namespace urbanvis::svm {

enum class Normalization { None, L2, Standardize };

std::string_view normalization_name(Normalization n) noexcept;
std::optional<Normalization> parse_normalization(std::string_view s) noexcept;

struct Hyperparams {
  double lambda = 1e-4;
  int epochs = 30;
  std::uint64_t seed = 0;
  Normalization normalize = Normalization::L2;
};

/// Throws InvalidArgument unless lambda > 0 and epochs >= 1.
void validate(const Hyperparams& h);

struct NormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // zero-variance dimensions are stored as 1
};

/// Linear classifier. Binary models hold one weight row and classes {0, 1};
/// one-vs-rest models hold one row per class, classes ascending.
struct SvmModel {
  Task task = Task::Qualification;
  std::string extractor_id;
  std::vector<int> classes;
  Eigen::MatrixXd weights;  // rows: per-class weight vectors
  Eigen::VectorXd bias;
  Hyperparams hyper;
  std::optional<NormStats> norm_stats;

  bool binary() const noexcept { return weights.rows() == 1; }
  Eigen::Index dimension() const noexcept { return weights.cols(); }
};

// Objective minimized by the trainer, with y in {-1, +1}:
//   lambda/2 * (|w|^2 + b^2) + mean_i max(0, 1 - y_i (w.x_i + b))
// The bias is regularized with the weights (the input is augmented with a constant 1).
double objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, const Eigen::VectorXd& y_pm,
                 double lambda);

struct Subgradient {
  Eigen::VectorXd w;
  double b = 0.0;
};

/// Subgradient of lambda/2 (|w|^2 + b^2) + max(0, 1 - y (w.x + b)) for one example.
/// At the kink (margin exactly 1) the hinge term contributes zero.
Subgradient hinge_subgradient(const Eigen::VectorXd& w, double b, const Eigen::VectorXd& x, double y,
                              double lambda);

/// Regularized objective of the epoch-averaged iterate, one entry per epoch.
struct TrainingTrace {
  std::vector<double> epoch_objective;
};

// Primal subgradient descent with step 1/(lambda t), one pass per epoch over a seeded
// shuffle; t counts steps across epochs. The returned weights are the average of the
// iterates visited during the final epoch.
//
// X holds one example per row, y is {0, 1}. Throws LengthMismatch, SingleClassInput,
// InvalidValue (label outside {0,1}), NonFiniteFeature or InvalidArgument (hyperparams).
SvmModel train_binary(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, const Hyperparams& hyper,
                      Task task = Task::Qualification, std::string extractor_id = {}, TrainingTrace* trace = nullptr);

/// One binary model per distinct label (that class vs the rest), sharing one normalization.
SvmModel train_ovr(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, const Hyperparams& hyper,
                   Task task = Task::Quality, std::string extractor_id = {});

/// Stacks vectors into rows; throws DimensionMismatch on ragged input.
Eigen::MatrixXd stack(const std::vector<FeatureVector>& vectors);

SvmModel train_binary(const std::vector<FeatureVector>& X, const std::vector<int>& y, const Hyperparams& hyper,
                      Task task = Task::Qualification);
SvmModel train_ovr(const std::vector<FeatureVector>& X, const std::vector<int>& y, const Hyperparams& hyper,
                   Task task = Task::Quality);

/// The input under the model's stored normalization.
Eigen::VectorXd normalized(const SvmModel& model, const Eigen::VectorXd& x);

/// w_c . x~ + b_c per class (a single value for binary models). Throws DimensionMismatch.
Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::VectorXd& x);

/// Binary: class 1 iff the decision value is >= 0. Multiclass: argmax, ties to the
/// earliest class in order.
int predict_from_decisions(const SvmModel& model, const Eigen::VectorXd& decisions);
int predict(const SvmModel& model, const Eigen::VectorXd& x);

// Model file: "FSVM" magic, u32 format version, u32 payload length, payload,
// u32 CRC-32 of every preceding byte. All integers and IEEE doubles little-endian.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const SvmModel& model);
/// Throws CorruptModelFile on bad magic, unknown version, truncation or checksum mismatch.
SvmModel deserialize(const std::vector<std::uint8_t>& bytes);

void save_model(const SvmModel& model, const std::string& path);
SvmModel load_model(const std::string& path);

}  // namespace urbanvis::svm
