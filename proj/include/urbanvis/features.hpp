#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "urbanvis/raster.hpp"

namespace urbanvis {

inline constexpr int kDescriptorDim = 128;
inline constexpr int kPatchSize = 16;
inline constexpr int kPatchStride = 8;
inline constexpr int kCellSize = 4;
inline constexpr int kOrientationBins = 8;
inline constexpr double kDescriptorClamp = 0.2;

/// One descriptor per row.
using DescriptorMatrix = Eigen::Matrix<double, Eigen::Dynamic, kDescriptorDim, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FeatureVector {
  std::string image_id;
  std::string extractor_id;
  Eigen::VectorXd values;
};

/// Feature vectors keyed by image_id; all vectors share one extractor and dimension.
struct FeatureSet {
  std::string extractor_id;
  std::map<std::string, FeatureVector> vectors;

  Eigen::Index dimension() const { return vectors.empty() ? 0 : vectors.begin()->second.values.size(); }
};

// Dense gradient-orientation descriptors: 16x16 patches on a stride-8 grid, each
// split into 4x4 cells of 4x4 pixels with 8 magnitude-weighted orientation bins
// (bin k centered on k*45 degrees, hard assignment). Layout: (cell_row*4 + cell_col)*8 + bin.
// Each descriptor is L2-normalized, clamped at 0.2, and renormalized; zero-gradient
// patches stay all-zero. Gradients are central differences with replicated borders.
// Throws ImageTooSmall when either side is under 16 px.
DescriptorMatrix dense_descriptors(const GrayImage& gray);
DescriptorMatrix dense_descriptors(const Raster& image);

struct Codebook {
  std::string extractor_id;
  RowMatrix centroids;  // k x d
  std::uint64_t build_seed = 0;
  double inertia = 0.0;
  int iterations = 0;

  Eigen::Index k() const { return centroids.rows(); }
  Eigen::Index descriptor_dim() const { return centroids.cols(); }
};

/// Index of the nearest centroid in Euclidean distance; ties go to the lowest index.
template <typename DerivedC, typename DerivedX>
Eigen::Index nearest_centroid(const Eigen::MatrixBase<DerivedC>& centroids, const Eigen::MatrixBase<DerivedX>& x) {
  Eigen::Index best = 0;
  double best_d = (centroids.row(0) - x).squaredNorm();
  for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

struct KMeansOptions {
  int max_iterations = 50;
  double tolerance = 1e-6;  // stop once every centroid moves less than this
};

/// Lloyd k-means with k-means++ seeding. Deterministic in (sample row order, k, seed).
/// Empty clusters keep their previous centroid. Throws TooFewDescriptors when the
/// sample has fewer than k distinct rows, InvalidArgument when k < 2.
Codebook build_codebook(const RowMatrix& sample, int k, std::uint64_t seed, const KMeansOptions& opts = {});

std::string bovw_extractor_id(Eigen::Index k);

/// Word histogram over non-zero descriptors, L1-normalized. All-zero when the image
/// has no gradient anywhere.
Eigen::VectorXd bovw_histogram(const DescriptorMatrix& descriptors, const Codebook& codebook);
FeatureVector extract_bovw(const std::string& image_id, const Raster& image, const Codebook& codebook);

void save_codebook(const std::string& path, const Codebook& codebook);
Codebook load_codebook(const std::string& path);

/// Embedding CSV: line 1 `extractor_id,<id>`, then `image_id,v0,v1,...`.
/// Throws MalformedHeader, DimensionMismatch (row) or NonFiniteValue (row, col).
std::vector<FeatureVector> parse_embeddings(const std::string& text);
std::vector<FeatureVector> import_embeddings(const std::string& path);

/// Same CSV layout, rows ordered by image_id, values printed round-trip exact.
void write_features_csv(const std::string& path, const FeatureSet& features);
FeatureSet read_features_csv(const std::string& path);
FeatureSet to_feature_set(std::vector<FeatureVector> vectors);

}  // namespace urbanvis
