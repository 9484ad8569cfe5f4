#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "urbanvis/dataset.hpp"
#include "urbanvis/error.hpp"

namespace urbanvis::metrics {

namespace detail {

template <typename A, typename B>
void check_pair(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() == 0) throw Error(Errc::EmptyInput, "no pairs to evaluate");
}

}  // namespace detail

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  std::size_t p = 0;  // labeled positives, tp + fn

  std::size_t n() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Counts with `positive` as the positive class; any other value is negative.
template <typename A, typename B>
ConfusionCounts confusion(const Eigen::DenseBase<A>& y_true, const Eigen::DenseBase<B>& y_pred, int positive = 1) {
  detail::check_pair(y_true, y_pred);
  ConfusionCounts c;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) {
    const bool t = static_cast<int>(y_true(i)) == positive;
    const bool p = static_cast<int>(y_pred(i)) == positive;
    if (t && p) ++c.tp;
    else if (!t && p) ++c.fp;
    else if (t && !p) ++c.fn;
    else ++c.tn;
  }
  c.p = c.tp + c.fn;
  return c;
}

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Recall = TP/P, Precision = TP/(TP+FP), F1 = 2TP/(2TP+FN+FP).
/// Each is 0 when its denominator is 0.
PrecisionRecallF1 prf1(const ConfusionCounts& c) noexcept;

/// Harmonic mean of precision and recall; 0 when both are 0. Works on any scale (e.g. percent).
double f1_from(double precision, double recall) noexcept;

/// Share of exact matches.
template <typename A, typename B>
double accuracy(const Eigen::DenseBase<A>& y_true, const Eigen::DenseBase<B>& y_pred) {
  detail::check_pair(y_true, y_pred);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < y_true.size(); ++i) hit += (y_true(i) == y_pred(i)) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

/// MSE = 1/n * sum (y_i - t_i)^2, y the machine rating and t the expert rating.
template <typename A, typename B>
double mse(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& t) {
  detail::check_pair(y, t);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = static_cast<double>(y(i)) - static_cast<double>(t(i));
    acc += d * d;
  }
  return acc / static_cast<double>(y.size());
}

/// 1-based ranks; tied values share the mean of the positions they occupy.
template <typename A>
Eigen::VectorXd average_ranks(const Eigen::DenseBase<A>& v) {
  const auto n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::VectorXd ranks(n);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v(order[j]) == v(order[i])) ++j;
    const double mean_pos = 0.5 * static_cast<double>(i + 1 + j);  // mean of positions i+1..j
    for (std::size_t k = i; k < j; ++k) ranks(order[k]) = mean_pos;
    i = j;
  }
  return ranks;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Spearman's r as the Pearson correlation of average ranks.
/// Throws LengthMismatch, TooFewPoints (n < 3) or ConstantInput.
template <typename A, typename B>
double spearman(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() < 3) throw Error(Errc::TooFewPoints, "spearman needs at least 3 pairs");
  if (a.maxCoeff() == a.minCoeff() || b.maxCoeff() == b.minCoeff()) {
    throw Error(Errc::ConstantInput, "spearman input is constant");
  }
  return std::clamp(pearson(average_ranks(a), average_ranks(b)), -1.0, 1.0);
}

struct ClassMetrics {
  int label = 0;
  PrecisionRecallF1 prf;
};

/// Accuracy plus P/R/F1 with an explicit positive class. Multiclass reports hold the
/// one-vs-rest scores per class and their macro average in precision/recall/f1.
struct MetricsReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<int> positive_class;  // nullopt for macro averages
  std::optional<double> mse;
  std::vector<ClassMetrics> per_class;
};

MetricsReport evaluate_binary(const Eigen::VectorXi& y_true, const Eigen::VectorXi& y_pred, int positive = 1);
MetricsReport evaluate_multiclass(const Eigen::VectorXi& y_true, const Eigen::VectorXi& y_pred,
                                  const std::vector<int>& classes);

struct ValidationReport {
  Task feature = Task::Quality;
  double spearman_r = 0.0;
  std::size_t n_segments = 0;
};

/// Rows of (variant, report) rendered as Accuracy,Precision,Recall,F1 in percent, 2 decimals.
std::string classification_table_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows);

/// Rows of (variant, {train, dev, test} MSE), 3 decimals.
struct MseRow {
  std::string variant;
  double train = 0.0;
  double dev = 0.0;
  double test = 0.0;
};
std::string mse_table_csv(const std::vector<MseRow>& rows);

std::string validation_csv(const std::vector<ValidationReport>& reports);

/// MSE of predicting the mean of y for every element, i.e. the population variance.
double constant_mean_mse(const Eigen::VectorXd& y);

/// F1 of predicting `positive` for every element.
double always_positive_f1(const Eigen::VectorXi& y_true, int positive = 1);

}  // namespace urbanvis::metrics
