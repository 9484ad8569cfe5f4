#include "urbanvis/metrics.hpp"

#include <cstdio>

namespace urbanvis::metrics {

PrecisionRecallF1 prf1(const ConfusionCounts& c) noexcept {
  PrecisionRecallF1 r;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) r.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.p > 0) r.recall = tp / static_cast<double>(c.p);
  const std::size_t denom = 2 * c.tp + c.fn + c.fp;
  if (denom > 0) r.f1 = 2.0 * tp / static_cast<double>(denom);
  return r;
}

double f1_from(double precision, double recall) noexcept {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (denom == 0.0) throw Error(Errc::ConstantInput, "zero variance");
  return ca.dot(cb) / denom;
}

MetricsReport evaluate_binary(const Eigen::VectorXi& y_true, const Eigen::VectorXi& y_pred, int positive) {
  MetricsReport r;
  r.n = static_cast<std::size_t>(y_true.size());
  r.accuracy = accuracy(y_true, y_pred);
  const auto pr = prf1(confusion(y_true, y_pred, positive));
  r.precision = pr.precision;
  r.recall = pr.recall;
  r.f1 = pr.f1;
  r.positive_class = positive;
  return r;
}

MetricsReport evaluate_multiclass(const Eigen::VectorXi& y_true, const Eigen::VectorXi& y_pred,
                                  const std::vector<int>& classes) {
  MetricsReport r;
  r.n = static_cast<std::size_t>(y_true.size());
  r.accuracy = accuracy(y_true, y_pred);
  r.mse = mse(y_pred, y_true);
  for (int c : classes) {
    const auto pr = prf1(confusion(y_true, y_pred, c));
    r.per_class.push_back({c, pr});
    r.precision += pr.precision;
    r.recall += pr.recall;
    r.f1 += pr.f1;
  }
  if (!classes.empty()) {
    const auto k = static_cast<double>(classes.size());
    r.precision /= k;
    r.recall /= k;
    r.f1 /= k;
  }
  return r;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

}  // namespace

std::string classification_table_csv(const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  std::string out = "model,positive_class,Accuracy (%),Precision (%),Recall (%),F1 (%)\n";
  for (const auto& [variant, r] : rows) {
    out += variant + ',' + (r.positive_class ? std::to_string(*r.positive_class) : std::string("macro")) + ',' +
           fixed(100.0 * r.accuracy, 2) + ',' + fixed(100.0 * r.precision, 2) + ',' + fixed(100.0 * r.recall, 2) +
           ',' + fixed(100.0 * r.f1, 2) + '\n';
  }
  return out;
}

std::string mse_table_csv(const std::vector<MseRow>& rows) {
  std::string out = "MSE,Training set,Development set,Test set\n";
  for (const auto& r : rows) {
    out += r.variant + ',' + fixed(r.train, 3) + ',' + fixed(r.dev, 3) + ',' + fixed(r.test, 3) + '\n';
  }
  return out;
}

std::string validation_csv(const std::vector<ValidationReport>& reports) {
  std::string out = "feature,spearman_r,n_segments\n";
  for (const auto& r : reports) {
    out += std::string(task_name(r.feature)) + ',' + fixed(r.spearman_r, 4) + ',' + std::to_string(r.n_segments) +
           '\n';
  }
  return out;
}

double constant_mean_mse(const Eigen::VectorXd& y) {
  if (y.size() == 0) throw Error(Errc::EmptyInput, "constant_mean_mse: empty input");
  return (y.array() - y.mean()).square().mean();
}

double always_positive_f1(const Eigen::VectorXi& y_true, int positive) {
  return prf1(confusion(y_true, Eigen::VectorXi::Constant(y_true.size(), positive), positive)).f1;
}

}  // namespace urbanvis::metrics
