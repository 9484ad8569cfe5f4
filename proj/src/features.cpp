#include "urbanvis/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/rng.hpp"

namespace urbanvis {

using nlohmann::json;

DescriptorMatrix dense_descriptors(const GrayImage& gray) {
  const auto h = static_cast<int>(gray.rows());
  const auto w = static_cast<int>(gray.cols());
  if (h < kPatchSize || w < kPatchSize) {
    throw Error(Errc::ImageTooSmall, std::to_string(w) + "x" + std::to_string(h) + " is below 16 px");
  }

  // Per 4x4 pixel block, an 8-bin magnitude-weighted orientation histogram.
  const int blocks_x = w / kCellSize;
  const int blocks_y = h / kCellSize;
  Eigen::Matrix<double, Eigen::Dynamic, kOrientationBins, Eigen::RowMajor> blocks =
      Eigen::Matrix<double, Eigen::Dynamic, kOrientationBins, Eigen::RowMajor>::Zero(blocks_x * blocks_y,
                                                                                    kOrientationBins);
  constexpr double bin_width = 2.0 * std::numbers::pi / kOrientationBins;
  for (int y = 0; y < blocks_y * kCellSize; ++y) {
    const int yu = std::max(y - 1, 0);
    const int yd = std::min(y + 1, h - 1);
    for (int x = 0; x < blocks_x * kCellSize; ++x) {
      const double gx = gray(y, std::min(x + 1, w - 1)) - gray(y, std::max(x - 1, 0));
      const double gy = gray(yd, x) - gray(yu, x);
      if (gx == 0.0 && gy == 0.0) continue;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += 2.0 * std::numbers::pi;
      const int bin = static_cast<int>(std::floor(theta / bin_width + 0.5)) % kOrientationBins;
      blocks((y / kCellSize) * blocks_x + x / kCellSize, bin) += std::hypot(gx, gy);
    }
  }

  constexpr int cells = kPatchSize / kCellSize;
  const int patches_x = (w - kPatchSize) / kPatchStride + 1;
  const int patches_y = (h - kPatchSize) / kPatchStride + 1;
  DescriptorMatrix out(static_cast<Eigen::Index>(patches_x) * patches_y, kDescriptorDim);
  Eigen::Index row = 0;
  for (int py = 0; py < patches_y; ++py) {
    for (int px = 0; px < patches_x; ++px, ++row) {
      const int by0 = py * kPatchStride / kCellSize;
      const int bx0 = px * kPatchStride / kCellSize;
      auto d = out.row(row);
      for (int cr = 0; cr < cells; ++cr) {
        for (int cc = 0; cc < cells; ++cc) {
          d.segment<kOrientationBins>((cr * cells + cc) * kOrientationBins) =
              blocks.row((by0 + cr) * blocks_x + bx0 + cc);
        }
      }
      const double n = d.norm();
      if (n == 0.0) continue;
      d /= n;
      d = d.cwiseMin(kDescriptorClamp);
      d /= d.norm();
    }
  }
  return out;
}

DescriptorMatrix dense_descriptors(const Raster& image) { return dense_descriptors(to_gray(image)); }

Codebook build_codebook(const RowMatrix& sample, int k, std::uint64_t seed, const KMeansOptions& opts) {
  if (k < 2) throw Error(Errc::InvalidArgument, "codebook needs k >= 2");
  const Eigen::Index n = sample.rows();
  if (n < k) {
    throw Error(Errc::TooFewDescriptors, std::to_string(n) + " descriptors for k=" + std::to_string(k));
  }
  Rng rng(seed);

  // k-means++ seeding.
  RowMatrix centroids(k, sample.cols());
  Eigen::VectorXd d2(n);
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = sample.row(first);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = (sample.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    if (!(total > 0.0)) {
      throw Error(Errc::TooFewDescriptors, "fewer than k=" + std::to_string(k) + " distinct descriptors");
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    Eigen::Index pick = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (d2(i) <= 0.0) continue;
      acc += d2(i);
      pick = i;
      if (acc > target) break;
    }
    centroids.row(c) = sample.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2(i) = std::min(d2(i), (sample.row(i) - centroids.row(c)).squaredNorm());
    }
  }

  // Lloyd iterations.
  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n));
  RowMatrix sums(k, sample.cols());
  Eigen::VectorXd counts(k);
  int iter = 0;
  while (iter < opts.max_iterations) {
    ++iter;
    sums.setZero();
    counts.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = nearest_centroid(centroids, sample.row(i));
      assign[static_cast<std::size_t>(i)] = a;
      sums.row(a) += sample.row(i);
      counts(a) += 1.0;
    }
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts(c) == 0.0) continue;
      const Eigen::RowVectorXd next = sums.row(c) / counts(c);
      shift = std::max(shift, (next - centroids.row(c)).norm());
      centroids.row(c) = next;
    }
    if (shift < opts.tolerance) break;
  }

  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    inertia += (sample.row(i) - centroids.row(nearest_centroid(centroids, sample.row(i)))).squaredNorm();
  }
  return {bovw_extractor_id(k), std::move(centroids), seed, inertia, iter};
}

std::string bovw_extractor_id(Eigen::Index k) { return "bovw-k" + std::to_string(k) + "-v1"; }

Eigen::VectorXd bovw_histogram(const DescriptorMatrix& descriptors, const Codebook& codebook) {
  if (codebook.descriptor_dim() != kDescriptorDim || codebook.k() < 2) {
    throw Error(Errc::DimensionMismatch, "codebook is not a 128-d descriptor vocabulary");
  }
  Eigen::VectorXd hist = Eigen::VectorXd::Zero(codebook.k());
  double used = 0.0;
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    if (descriptors.row(i).squaredNorm() == 0.0) continue;
    hist(nearest_centroid(codebook.centroids, descriptors.row(i))) += 1.0;
    used += 1.0;
  }
  if (used > 0.0) hist /= used;
  return hist;
}

FeatureVector extract_bovw(const std::string& image_id, const Raster& image, const Codebook& codebook) {
  return {image_id, codebook.extractor_id, bovw_histogram(dense_descriptors(image), codebook)};
}

void save_codebook(const std::string& path, const Codebook& codebook) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < codebook.k(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < codebook.descriptor_dim(); ++c) row.push_back(codebook.centroids(r, c));
    rows.push_back(std::move(row));
  }
  json doc = {{"extractor_id", codebook.extractor_id},
              {"k", codebook.k()},
              {"descriptor_dim", codebook.descriptor_dim()},
              {"build_seed", codebook.build_seed},
              {"inertia", codebook.inertia},
              {"iterations", codebook.iterations},
              {"centroids", std::move(rows)}};
  io::write_file(path, doc.dump() + "\n");
}

Codebook load_codebook(const std::string& path) {
  try {
    const json doc = json::parse(io::read_file(path));
    Codebook cb;
    cb.extractor_id = doc.at("extractor_id").get<std::string>();
    cb.build_seed = doc.at("build_seed").get<std::uint64_t>();
    cb.inertia = doc.value("inertia", 0.0);
    cb.iterations = doc.value("iterations", 0);
    const auto k = doc.at("k").get<Eigen::Index>();
    const auto d = doc.at("descriptor_dim").get<Eigen::Index>();
    const auto& rows = doc.at("centroids");
    if (k < 2 || static_cast<Eigen::Index>(rows.size()) != k) throw Error(Errc::MalformedRow, path + ": bad k");
    cb.centroids.resize(k, d);
    for (Eigen::Index r = 0; r < k; ++r) {
      if (static_cast<Eigen::Index>(rows[r].size()) != d) throw Error(Errc::DimensionMismatch, path);
      for (Eigen::Index c = 0; c < d; ++c) cb.centroids(r, c) = rows[r][c].get<double>();
    }
    if (!cb.centroids.allFinite()) throw Error(Errc::NonFiniteValue, path);
    return cb;
  } catch (const json::exception& e) {
    throw Error(Errc::MalformedRow, path + ": " + e.what());
  }
}

std::vector<FeatureVector> parse_embeddings(const std::string& text) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw Error(Errc::MalformedHeader, "empty embedding file");
  const auto header = io::split_csv_line(rows[0]);
  if (header.size() != 2 || header[0] != "extractor_id" || header[1].empty()) {
    throw Error(Errc::MalformedHeader, "expected 'extractor_id,<id>', got '" + rows[0] + "'");
  }
  const std::string& extractor = header[1];

  std::vector<FeatureVector> out;
  Eigen::Index dim = -1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const std::size_t lineno = i + 1;
    const auto f = io::split_csv_line(rows[i]);
    if (f.size() < 2 || f[0].empty()) throw Error(Errc::MalformedRow, "row " + std::to_string(lineno));
    const auto n = static_cast<Eigen::Index>(f.size() - 1);
    if (dim < 0) dim = n;
    if (n != dim) {
      throw Error(Errc::DimensionMismatch, "row " + std::to_string(lineno) + " has " + std::to_string(n) +
                                               " values, expected " + std::to_string(dim));
    }
    FeatureVector fv{f[0], extractor, Eigen::VectorXd(n)};
    for (Eigen::Index c = 0; c < n; ++c) {
      double v;
      try {
        v = io::parse_double(f[static_cast<std::size_t>(c) + 1]);
      } catch (const Error& e) {
        throw Error(Errc::MalformedRow, "row " + std::to_string(lineno) + " col " + std::to_string(c) + ": " + e.what());
      }
      if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteValue, "row " + std::to_string(lineno) + " col " + std::to_string(c));
      }
      fv.values(c) = v;
    }
    out.push_back(std::move(fv));
  }
  return out;
}

std::vector<FeatureVector> import_embeddings(const std::string& path) {
  try {
    return parse_embeddings(io::read_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::StorageFailure) throw;
    throw Error(e.code(), path + ": " + e.what());
  }
}

FeatureSet to_feature_set(std::vector<FeatureVector> vectors) {
  FeatureSet set;
  for (auto& v : vectors) {
    if (set.vectors.empty()) {
      set.extractor_id = v.extractor_id;
    } else if (v.values.size() != set.dimension()) {
      throw Error(Errc::DimensionMismatch, "vector for " + v.image_id + " has a different dimension");
    }
    if (!set.vectors.emplace(v.image_id, v).second) {
      throw Error(Errc::MalformedRow, "duplicate feature row for " + v.image_id);
    }
  }
  return set;
}

void write_features_csv(const std::string& path, const FeatureSet& features) {
  std::string out = "extractor_id," + features.extractor_id + "\n";
  for (const auto& [id, fv] : features.vectors) {
    out += id;
    for (Eigen::Index c = 0; c < fv.values.size(); ++c) out += ',' + io::format_double(fv.values(c));
    out += '\n';
  }
  io::write_file(path, out);
}

FeatureSet read_features_csv(const std::string& path) {
  auto vectors = import_embeddings(path);
  auto set = to_feature_set(std::move(vectors));
  if (set.extractor_id.empty()) {
    const auto header = io::split_csv_line(io::lines(io::read_file(path)).at(0));
    set.extractor_id = header.at(1);
  }
  return set;
}

}  // namespace urbanvis
