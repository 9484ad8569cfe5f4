#include "urbanvis/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include <zlib.h>

#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/rng.hpp"

namespace urbanvis::svm {

std::string_view normalization_name(Normalization n) noexcept {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::L2: return "l2";
    case Normalization::Standardize: return "standardize";
  }
  return "";
}

std::optional<Normalization> parse_normalization(std::string_view s) noexcept {
  if (s == "none") return Normalization::None;
  if (s == "l2") return Normalization::L2;
  if (s == "standardize") return Normalization::Standardize;
  return std::nullopt;
}

void validate(const Hyperparams& h) {
  if (!(h.lambda > 0.0) || !std::isfinite(h.lambda)) throw Error(Errc::InvalidArgument, "lambda must be > 0");
  if (h.epochs < 1) throw Error(Errc::InvalidArgument, "epochs must be >= 1");
}

namespace {

Eigen::VectorXd apply_norm(Normalization mode, const std::optional<NormStats>& stats, const Eigen::VectorXd& x) {
  switch (mode) {
    case Normalization::None: return x;
    case Normalization::L2: {
      const double n = x.norm();
      return n > 0.0 ? Eigen::VectorXd(x / n) : x;
    }
    case Normalization::Standardize:
      return ((x - stats->mean).array() / stats->stddev.array()).matrix();
  }
  return x;
}

std::optional<NormStats> fit_norm(Normalization mode, const Eigen::MatrixXd& X) {
  if (mode != Normalization::Standardize) return std::nullopt;
  NormStats s;
  s.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - s.mean.transpose();
  s.stddev = (centered.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < s.stddev.size(); ++j) {
    if (!(s.stddev(j) > 0.0)) s.stddev(j) = 1.0;
  }
  return s;
}

Eigen::MatrixXd normalize_rows(Normalization mode, const std::optional<NormStats>& stats, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.row(i) = apply_norm(mode, stats, X.row(i).transpose()).transpose();
  return out;
}

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXi& y) {
  if (X.rows() != y.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(X.rows()) + " examples vs " + std::to_string(y.size()) + " labels");
  }
  if (X.rows() < 2) throw Error(Errc::SingleClassInput, "need at least two examples");
  if (!X.allFinite()) throw Error(Errc::NonFiniteFeature, "training features contain NaN or infinity");
}

struct Fit {
  Eigen::VectorXd w;
  double b = 0.0;
};

Fit fit_pegasos(const Eigen::MatrixXd& X, const Eigen::VectorXd& y_pm, const Hyperparams& hyper,
                TrainingTrace* trace) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(X.cols());
  double b = 0.0;
  Fit avg{Eigen::VectorXd::Zero(X.cols()), 0.0};

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(hyper.seed);
  std::uint64_t t = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    avg.w.setZero();
    avg.b = 0.0;
    for (Eigen::Index i : order) {
      ++t;
      const double eta = 1.0 / (hyper.lambda * static_cast<double>(t));
      const Subgradient g = hinge_subgradient(w, b, X.row(i).transpose(), y_pm(i), hyper.lambda);
      w -= eta * g.w;
      b -= eta * g.b;
      avg.w += w;
      avg.b += b;
    }
    avg.w /= static_cast<double>(n);
    avg.b /= static_cast<double>(n);
    if (trace) trace->epoch_objective.push_back(objective(avg.w, avg.b, X, y_pm, hyper.lambda));
  }
  return avg;
}

}  // namespace

double objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, const Eigen::VectorXd& y_pm,
                 double lambda) {
  const Eigen::VectorXd margins = (y_pm.array() * ((X * w).array() + b)).matrix();
  const double hinge = (1.0 - margins.array()).max(0.0).mean();
  return 0.5 * lambda * (w.squaredNorm() + b * b) + hinge;
}

Subgradient hinge_subgradient(const Eigen::VectorXd& w, double b, const Eigen::VectorXd& x, double y, double lambda) {
  Subgradient g{lambda * w, lambda * b};
  if (y * (w.dot(x) + b) < 1.0) {
    g.w -= y * x;
    g.b -= y;
  }
  return g;
}

SvmModel train_binary(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, const Hyperparams& hyper, Task task,
                      std::string extractor_id, TrainingTrace* trace) {
  validate(hyper);
  check_inputs(X, y);
  bool has0 = false;
  bool has1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) == 0) has0 = true;
    else if (y(i) == 1) has1 = true;
    else throw Error(Errc::InvalidValue, "binary labels must be 0 or 1, got " + std::to_string(y(i)));
  }
  if (!has0 || !has1) throw Error(Errc::SingleClassInput, "binary training needs both classes");

  SvmModel m;
  m.task = task;
  m.extractor_id = std::move(extractor_id);
  m.classes = {0, 1};
  m.hyper = hyper;
  m.norm_stats = fit_norm(hyper.normalize, X);
  const Eigen::MatrixXd Xn = normalize_rows(hyper.normalize, m.norm_stats, X);
  const Eigen::VectorXd y_pm = (2 * y.array() - 1).cast<double>().matrix();
  const Fit fit = fit_pegasos(Xn, y_pm, hyper, trace);
  m.weights = fit.w.transpose();
  m.bias = Eigen::VectorXd::Constant(1, fit.b);
  return m;
}

SvmModel train_ovr(const Eigen::MatrixXd& X, const Eigen::VectorXi& y, const Hyperparams& hyper, Task task,
                   std::string extractor_id) {
  validate(hyper);
  check_inputs(X, y);
  const std::set<int> distinct(y.data(), y.data() + y.size());
  if (distinct.size() < 2) throw Error(Errc::SingleClassInput, "one-vs-rest training needs >= 2 classes");

  SvmModel m;
  m.task = task;
  m.extractor_id = std::move(extractor_id);
  m.classes.assign(distinct.begin(), distinct.end());
  m.hyper = hyper;
  m.norm_stats = fit_norm(hyper.normalize, X);
  const Eigen::MatrixXd Xn = normalize_rows(hyper.normalize, m.norm_stats, X);
  m.weights.resize(static_cast<Eigen::Index>(m.classes.size()), X.cols());
  m.bias.resize(static_cast<Eigen::Index>(m.classes.size()));
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    const Eigen::VectorXd y_pm = (y.array() == m.classes[c]).select(Eigen::VectorXd::Ones(y.size()), -1.0);
    const Fit fit = fit_pegasos(Xn, y_pm, hyper, nullptr);
    m.weights.row(static_cast<Eigen::Index>(c)) = fit.w.transpose();
    m.bias(static_cast<Eigen::Index>(c)) = fit.b;
  }
  return m;
}

Eigen::MatrixXd stack(const std::vector<FeatureVector>& vectors) {
  if (vectors.empty()) return {};
  const Eigen::Index d = vectors.front().values.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(vectors.size()), d);
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != d) {
      throw Error(Errc::DimensionMismatch, "feature vector for " + vectors[i].image_id + " has dimension " +
                                               std::to_string(vectors[i].values.size()) + ", expected " +
                                               std::to_string(d));
    }
    X.row(static_cast<Eigen::Index>(i)) = vectors[i].values.transpose();
  }
  return X;
}

namespace {

Eigen::VectorXi to_labels(const std::vector<int>& y) {
  return Eigen::Map<const Eigen::VectorXi>(y.data(), static_cast<Eigen::Index>(y.size()));
}

std::string extractor_of(const std::vector<FeatureVector>& X) { return X.empty() ? std::string() : X.front().extractor_id; }

}  // namespace

SvmModel train_binary(const std::vector<FeatureVector>& X, const std::vector<int>& y, const Hyperparams& hyper,
                      Task task) {
  return train_binary(stack(X), to_labels(y), hyper, task, extractor_of(X));
}

SvmModel train_ovr(const std::vector<FeatureVector>& X, const std::vector<int>& y, const Hyperparams& hyper,
                   Task task) {
  return train_ovr(stack(X), to_labels(y), hyper, task, extractor_of(X));
}

Eigen::VectorXd normalized(const SvmModel& model, const Eigen::VectorXd& x) {
  return apply_norm(model.hyper.normalize, model.norm_stats, x);
}

Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dimension()) {
    throw Error(Errc::DimensionMismatch, "input has dimension " + std::to_string(x.size()) + ", model expects " +
                                             std::to_string(model.dimension()));
  }
  return model.weights * normalized(model, x) + model.bias;
}

int predict_from_decisions(const SvmModel& model, const Eigen::VectorXd& decisions) {
  if (model.binary()) return decisions(0) >= 0.0 ? model.classes.back() : model.classes.front();
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < decisions.size(); ++c) {
    if (decisions(c) > decisions(best)) best = c;
  }
  return model.classes[static_cast<std::size_t>(best)];
}

int predict(const SvmModel& model, const Eigen::VectorXd& x) {
  return predict_from_decisions(model, decision_values(model, x));
}

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 0; s < 64; s += 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t>& bytes() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int s = 0; s < 32; s += 8) v |= static_cast<std::uint32_t>(*p_++) << s;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int s = 0; s < 64; s += 8) v |= static_cast<std::uint64_t>(*p_++) << s;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }

 private:
  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end_ - p_) < n) throw Error(Errc::CorruptModelFile, "payload truncated");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace

std::vector<std::uint8_t> serialize(const SvmModel& m) {
  Writer payload;
  payload.u8(static_cast<std::uint8_t>(m.task));
  payload.str(m.extractor_id);
  payload.u8(static_cast<std::uint8_t>(m.hyper.normalize));
  payload.f64(m.hyper.lambda);
  payload.i32(m.hyper.epochs);
  payload.u64(m.hyper.seed);
  payload.u32(static_cast<std::uint32_t>(m.classes.size()));
  for (int c : m.classes) payload.i32(c);
  payload.u32(static_cast<std::uint32_t>(m.weights.rows()));
  payload.u32(static_cast<std::uint32_t>(m.weights.cols()));
  for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.weights.cols(); ++c) payload.f64(m.weights(r, c));
  }
  for (Eigen::Index r = 0; r < m.bias.size(); ++r) payload.f64(m.bias(r));
  payload.u8(m.norm_stats ? 1 : 0);
  if (m.norm_stats) {
    for (Eigen::Index j = 0; j < m.weights.cols(); ++j) payload.f64(m.norm_stats->mean(j));
    for (Eigen::Index j = 0; j < m.weights.cols(); ++j) payload.f64(m.norm_stats->stddev(j));
  }

  Writer file;
  for (char ch : std::string_view("FSVM")) file.u8(static_cast<std::uint8_t>(ch));
  file.u32(kModelFormatVersion);
  file.u32(static_cast<std::uint32_t>(payload.bytes().size()));
  auto& out = file.bytes();
  out.insert(out.end(), payload.bytes().begin(), payload.bytes().end());
  file.u32(crc_of(out.data(), out.size()));
  return std::move(out);
}

SvmModel deserialize(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t header = 12;
  if (bytes.size() < header + 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "FSVM") {
    throw Error(Errc::CorruptModelFile, "missing FSVM header");
  }
  Reader head(bytes.data() + 4, 8);
  const std::uint32_t version = head.u32();
  if (version != kModelFormatVersion) {
    throw Error(Errc::CorruptModelFile, "unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t len = head.u32();
  if (bytes.size() != header + len + 4) throw Error(Errc::CorruptModelFile, "file length does not match header");
  Reader trailer(bytes.data() + header + len, 4);
  if (trailer.u32() != crc_of(bytes.data(), header + len)) throw Error(Errc::CorruptModelFile, "checksum mismatch");

  Reader r(bytes.data() + header, len);
  SvmModel m;
  const std::uint8_t task = r.u8();
  if (task > 2) throw Error(Errc::CorruptModelFile, "bad task tag");
  m.task = static_cast<Task>(task);
  m.extractor_id = r.str();
  const std::uint8_t norm = r.u8();
  if (norm > 2) throw Error(Errc::CorruptModelFile, "bad normalization tag");
  m.hyper.normalize = static_cast<Normalization>(norm);
  m.hyper.lambda = r.f64();
  m.hyper.epochs = r.i32();
  m.hyper.seed = r.u64();
  const std::uint32_t n_classes = r.u32();
  if (n_classes > len) throw Error(Errc::CorruptModelFile, "bad class count");
  for (std::uint32_t i = 0; i < n_classes; ++i) m.classes.push_back(r.i32());
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  if (static_cast<std::uint64_t>(rows) * cols * 8 > len) throw Error(Errc::CorruptModelFile, "bad weight shape");
  m.weights.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m.weights(i, j) = r.f64();
  }
  m.bias.resize(rows);
  for (std::uint32_t i = 0; i < rows; ++i) m.bias(i) = r.f64();
  if (r.u8() != 0) {
    NormStats s{Eigen::VectorXd(cols), Eigen::VectorXd(cols)};
    for (std::uint32_t j = 0; j < cols; ++j) s.mean(j) = r.f64();
    for (std::uint32_t j = 0; j < cols; ++j) s.stddev(j) = r.f64();
    m.norm_stats = std::move(s);
  }
  if (!r.done()) throw Error(Errc::CorruptModelFile, "trailing payload bytes");
  const bool shape_ok = (rows == 1 && n_classes == 2) || (rows >= 2 && rows == n_classes);
  if (!shape_ok || !m.weights.allFinite() || !m.bias.allFinite()) {
    throw Error(Errc::CorruptModelFile, "inconsistent model contents");
  }
  if (m.hyper.normalize == Normalization::Standardize && !m.norm_stats) {
    throw Error(Errc::CorruptModelFile, "standardized model lacks normalization statistics");
  }
  return m;
}

void save_model(const SvmModel& model, const std::string& path) {
  const auto bytes = serialize(model);
  io::write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

SvmModel load_model(const std::string& path) {
  const std::string data = io::read_file(path);
  try {
    return deserialize(std::vector<std::uint8_t>(data.begin(), data.end()));
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

}  // namespace urbanvis::svm
