#include <doctest.h>

#include <set>

#include "test_support.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/features.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/rng.hpp"

using namespace urbanvis;

namespace {

Raster solid(int w, int h, std::uint8_t v) {
  return {w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, v)};
}

Raster noise(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  Raster r = solid(w, h, 0);
  for (auto& b : r.rgb) b = static_cast<std::uint8_t>(rng.below(256));
  return r;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::InvalidArgument;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("descriptor grid arithmetic and zero-gradient images") {
  const auto d = dense_descriptors(solid(800, 500, 128));
  CHECK(d.rows() == 99 * 61);
  CHECK(d.cols() == 128);
  CHECK(d.isZero(0.0));
  CHECK(code_of([] { dense_descriptors(solid(15, 40, 0)); }) == Errc::ImageTooSmall);
}

TEST_CASE("vertical step edge puts all mass in the horizontal-gradient bins") {
  // Columns < 20 are black, >= 20 white. Central differences are 255 in columns
  // 19 and 20 with zero vertical gradient, so theta = 0 (bin 0); mirrored, theta = pi (bin 4).
  for (bool mirrored : {false, true}) {
    GrayImage g(48, 48);
    for (int x = 0; x < 48; ++x) g.col(x).setConstant((x >= 20) != mirrored ? 255.0 : 0.0);
    const auto d = dense_descriptors(g);
    const int expected_bin = mirrored ? 4 : 0;
    int touched = 0;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const int px = static_cast<int>(r % 5) * 8;  // 5 patches per row
      const bool covers_edge = px <= 19 && px + 16 > 20;
      if (!covers_edge) {
        CHECK(d.row(r).isZero(0.0));
        continue;
      }
      ++touched;
      CHECK(d.row(r).norm() == doctest::Approx(1.0));
      for (int i = 0; i < 128; ++i) {
        if (i % 8 != expected_bin) CHECK(d(r, i) == 0.0);
      }
    }
    CHECK(touched == 5 * 2);
  }
}

TEST_CASE("descriptors are unit length after clamping") {
  const auto d = dense_descriptors(noise(64, 48, 3));
  for (Eigen::Index r = 0; r < d.rows(); ++r) CHECK(d.row(r).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("codebook with k equal to the sample size reproduces the sample") {
  RowMatrix sample(5, 3);
  sample << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 1, 1;
  const Codebook cb = build_codebook(sample, 5, 11);
  CHECK(cb.inertia == 0.0);
  std::set<std::vector<double>> want, got;
  for (int i = 0; i < 5; ++i) {
    want.insert({sample(i, 0), sample(i, 1), sample(i, 2)});
    got.insert({cb.centroids(i, 0), cb.centroids(i, 1), cb.centroids(i, 2)});
  }
  CHECK(want == got);
  CHECK(cb.extractor_id == "bovw-k5-v1");
}

TEST_CASE("codebook errors") {
  RowMatrix three(3, 2);
  three << 0, 0, 1, 1, 2, 2;
  CHECK(code_of([&] { build_codebook(three, 4, 1); }) == Errc::TooFewDescriptors);
  RowMatrix dup(4, 2);
  dup << 0, 0, 0, 0, 1, 1, 1, 1;
  CHECK(code_of([&] { build_codebook(dup, 3, 1); }) == Errc::TooFewDescriptors);
  CHECK(code_of([&] { build_codebook(three, 1, 1); }) == Errc::InvalidArgument);
}

TEST_CASE("k-means recovers two separated blobs and is deterministic") {
  constexpr int per_blob = 200;
  constexpr double sigma = 1.0;
  Rng rng(99);
  RowMatrix sample(2 * per_blob, 2);
  Eigen::RowVector2d centers[2] = {{0.0, 0.0}, {10.0, 10.0}};
  for (int i = 0; i < 2 * per_blob; ++i) {
    const auto& c = centers[i % 2];
    sample(i, 0) = c(0) + sigma * rng.normal();
    sample(i, 1) = c(1) + sigma * rng.normal();
  }
  // Oracle: with blobs this far apart the Lloyd fixed point is each blob's sample mean.
  Eigen::RowVector2d sample_mean[2] = {Eigen::RowVector2d::Zero(), Eigen::RowVector2d::Zero()};
  for (int i = 0; i < 2 * per_blob; ++i) sample_mean[i % 2] += sample.row(i) / per_blob;

  const Codebook cb = build_codebook(sample, 2, 5);
  for (int c = 0; c < 2; ++c) {
    const int blob = cb.centroids(c, 0) < 5.0 ? 0 : 1;
    CHECK((cb.centroids.row(c) - sample_mean[blob]).norm() < 1e-9);
    CHECK((cb.centroids.row(c) - centers[blob]).cwiseAbs().maxCoeff() < 3.0 * sigma / std::sqrt(double(per_blob)));
  }
  const Codebook again = build_codebook(sample, 2, 5);
  CHECK(again.centroids == cb.centroids);
}

TEST_CASE("bag of words histogram") {
  const Raster img = noise(96, 64, 21);
  const auto d = dense_descriptors(img);

  SUBCASE("single-word image") {
    Codebook cb;
    cb.extractor_id = bovw_extractor_id(8);
    cb.centroids = RowMatrix::Constant(8, 128, 0.0);
    for (int c = 0; c < 8; ++c) cb.centroids.row(c).setConstant(-10.0 - c);
    cb.centroids.row(7) = d.colwise().mean();
    const auto fv = extract_bovw("img", img, cb);
    CHECK(fv.values.size() == 8);
    CHECK(fv.values(7) == 1.0);
    CHECK(fv.values.sum() == 1.0);
    CHECK(fv.extractor_id == "bovw-k8-v1");
  }

  RowMatrix sample = d.topRows(40);
  const Codebook cb = build_codebook(sample, 6, 1);

  SUBCASE("uniform image gives the zero vector") {
    CHECK(extract_bovw("u", solid(64, 48, 90), cb).values.isZero(0.0));
  }

  SUBCASE("normalization, permutation invariance and nearest-word assignment") {
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Raster r = noise(40 + 8 * static_cast<int>(s), 32, 100 + s);
      const auto desc = dense_descriptors(r);
      const auto h = bovw_histogram(desc, cb);
      CHECK(std::abs(h.sum() - 1.0) <= 1e-9);

      std::vector<Eigen::Index> perm(static_cast<std::size_t>(desc.rows()));
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(s);
      rng.shuffle(perm);
      DescriptorMatrix shuffled(desc.rows(), 128);
      for (std::size_t i = 0; i < perm.size(); ++i) shuffled.row(static_cast<Eigen::Index>(i)) = desc.row(perm[i]);
      CHECK(bovw_histogram(shuffled, cb) == h);

      for (Eigen::Index i = 0; i < desc.rows(); ++i) {
        const auto w = nearest_centroid(cb.centroids, desc.row(i));
        for (Eigen::Index c = 0; c < cb.k(); ++c) {
          CHECK((desc.row(i) - cb.centroids.row(w)).squaredNorm() <= (desc.row(i) - cb.centroids.row(c)).squaredNorm());
        }
      }
    }
  }

  SUBCASE("codebook file round trip") {
    test::TempDir dir;
    save_codebook(dir.file("cb.json"), cb);
    const Codebook back = load_codebook(dir.file("cb.json"));
    CHECK(back.centroids == cb.centroids);
    CHECK(back.extractor_id == cb.extractor_id);
    CHECK(back.build_seed == cb.build_seed);
  }
}

TEST_CASE("nearest centroid ties go to the lowest index") {
  RowMatrix c(3, 1);
  c << 1.0, -1.0, 1.0;
  Eigen::RowVectorXd x(1);
  x << 0.0;
  CHECK(nearest_centroid(c, x) == 0);
}

TEST_CASE("import_embeddings") {
  const auto ok = parse_embeddings("extractor_id,googlenet-pool5\nimg1,0.5,1,2,3\nimg2,1e-3,-2,0,4\n");
  REQUIRE(ok.size() == 2);
  CHECK(ok[0].extractor_id == "googlenet-pool5");
  CHECK(ok[1].values(0) == 1e-3);
  CHECK(ok[1].values.size() == 4);

  CHECK(code_of([] { parse_embeddings("extractor_id,x\na,1,2,3,4\nb,1,2,3,4,5\n"); }) == Errc::DimensionMismatch);
  CHECK(code_of([] { parse_embeddings("extractor_id,x\na,1,NaN,3\n"); }) == Errc::NonFiniteValue);
  CHECK(code_of([] { parse_embeddings("extractor_id,x\na,1,inf,3\n"); }) == Errc::NonFiniteValue);
  CHECK(code_of([] { parse_embeddings("image_id,v0\na,1\n"); }) == Errc::MalformedHeader);
  CHECK(code_of([] { parse_embeddings(""); }) == Errc::MalformedHeader);
  CHECK(code_of([] { parse_embeddings("extractor_id,x\na,1,zz\n"); }) == Errc::MalformedRow);

  test::TempDir dir;
  io::write_file(dir.file("e.csv"), "extractor_id,alexnet-fc7\nb,0.1,0.2\na,0.3,0.4\n");
  const FeatureSet set = read_features_csv(dir.file("e.csv"));
  CHECK(set.extractor_id == "alexnet-fc7");
  CHECK(set.dimension() == 2);
  write_features_csv(dir.file("f.csv"), set);
  CHECK(io::read_file(dir.file("f.csv")) == "extractor_id,alexnet-fc7\na,0.3,0.4\nb,0.1,0.2\n");
}

}  // TEST_SUITE
