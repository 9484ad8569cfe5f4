#include <doctest.h>

#include "urbanvis/error.hpp"
#include "urbanvis/metrics.hpp"
#include "urbanvis/rng.hpp"

using namespace urbanvis;
using namespace urbanvis::metrics;

namespace {

Eigen::VectorXi vi(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd vd(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
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

TEST_SUITE("metrics") {

TEST_CASE("confusion counts") {
  CHECK(confusion(vi({1, 1, 0}), vi({1, 1, 0})) == ConfusionCounts{2, 0, 0, 1, 2});
  // Hand tabulation: (1,1) tp, (1,0) fn, (0,1) fp, (0,0) tn.
  CHECK(confusion(vi({1, 1, 0, 0}), vi({1, 0, 1, 0})) == ConfusionCounts{1, 1, 1, 1, 2});
  CHECK(confusion(vi({0, 0, 0}), vi({0, 0, 0})) == ConfusionCounts{0, 0, 0, 3, 0});
  CHECK(code_of([] { confusion(vi({1}), vi({1, 0})); }) == Errc::LengthMismatch);
  CHECK(code_of([] { confusion(Eigen::VectorXi(), Eigen::VectorXi()); }) == Errc::EmptyInput);
}

TEST_CASE("precision, recall and F1") {
  const auto zero = prf1(ConfusionCounts{});
  CHECK(zero.precision == 0.0);
  CHECK(zero.recall == 0.0);
  CHECK(zero.f1 == 0.0);

  const auto r = prf1(ConfusionCounts{3, 1, 2, 4, 5});
  CHECK(r.precision == 0.75);
  CHECK(r.recall == 0.6);
  CHECK(r.f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35).epsilon(1e-15));

  // Printed precision/recall pairs against their printed F1 (percent, two decimals).
  CHECK(std::abs(f1_from(48.13, 86.31) - 61.79) <= 0.02);
  CHECK(std::abs(f1_from(45.06, 71.28) - 55.22) <= 0.02);
  CHECK(std::abs(f1_from(48.23, 85.94) - 61.78) <= 0.02);
  CHECK(f1_from(0.0, 0.0) == 0.0);
}

TEST_CASE("two F1 forms agree on random counts") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    ConfusionCounts c{rng.below(50), rng.below(50), rng.below(50), rng.below(50), 0};
    c.p = c.tp + c.fn;
    const auto r = prf1(c);
    if (r.precision + r.recall > 0.0) CHECK(std::abs(r.f1 - f1_from(r.precision, r.recall)) <= 1e-12);
  }
}

TEST_CASE("accuracy") {
  CHECK(accuracy(vi({1, 2, 3}), vi({1, 2, 3})) == 1.0);
  CHECK(accuracy(vi({0, 1, 0}), vi({1, 0, 1})) == 0.0);
  CHECK(accuracy(vi({1, 2, 3, 4}), vi({1, 2, 3, 1})) == 0.75);
  CHECK(code_of([] { accuracy(vi({1}), vi({})); }) == Errc::LengthMismatch);
}

TEST_CASE("mean squared error") {
  CHECK(mse(vd({1, 2, 3}), vd({1, 2, 3})) == 0.0);
  CHECK(mse(vd({4, 3}), vd({3, 3})) == 0.5);
  const Eigen::VectorXd y = vd({1.5, 2.0, 4.0});
  const Eigen::VectorXd t = vd({1.0, 3.0, 2.0});
  CHECK(mse(y.array() + 7.0, t.array() + 7.0) == doctest::Approx(mse(y, t)).epsilon(1e-15));
  CHECK(code_of([] { mse(Eigen::VectorXd(), Eigen::VectorXd()); }) == Errc::EmptyInput);
}

TEST_CASE("average ranks") {
  const auto r = average_ranks(vd({10, 20, 20, 5}));
  CHECK(r == vd({2, 3.5, 3.5, 1}));
}

TEST_CASE("spearman") {
  const Eigen::VectorXd a = vd({1, 2, 3, 4});
  CHECK(spearman(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(a, a.reverse()) == doctest::Approx(-1.0).epsilon(1e-15));
  // 1 - 6 * (0 + 1 + 1 + 0) / (4 * 15)
  CHECK(spearman(a, vd({1, 3, 2, 4})) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(spearman(vd({1, 3, 2, 4}), a) == spearman(a, vd({1, 3, 2, 4})));
  CHECK(spearman(a, (-a).eval()) == doctest::Approx(-1.0).epsilon(1e-15));

  CHECK(code_of([] { spearman(vd({1, 2}), vd({1, 2})); }) == Errc::TooFewPoints);
  CHECK(code_of([] { spearman(vd({1, 2, 3}), vd({1, 2})); }) == Errc::LengthMismatch);
  CHECK(code_of([] { spearman(vd({1, 1, 1}), vd({1, 2, 3})); }) == Errc::ConstantInput);
}

TEST_CASE("spearman is invariant to strictly increasing transforms") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.below(18));
    Eigen::VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a(i) = static_cast<double>(rng.below(8));
      b(i) = rng.normal();
    }
    if (a.maxCoeff() == a.minCoeff()) continue;
    const double r = spearman(a, b);
    // Scalar maps: Eigen's packet exp can round equal inputs differently from its scalar tail.
    const Eigen::VectorXd ta = a.unaryExpr([](double v) { return std::exp(0.5 * v) + 3.0; });
    const Eigen::VectorXd tb = b.unaryExpr([](double v) { return 2.0 * v * v * v - 1.0; });
    CHECK(std::abs(spearman(ta, tb) - r) <= 1e-12);
    CHECK(std::abs(spearman(b, a) - r) <= 1e-12);
  }
}

TEST_CASE("multiclass report labels classes and averages") {
  const auto rep = evaluate_multiclass(vi({1, 2, 3, 4}), vi({1, 2, 3, 1}), {1, 2, 3, 4});
  CHECK(rep.accuracy == 0.75);
  CHECK(rep.mse.value() == doctest::Approx(9.0 / 4));
  CHECK(rep.per_class.size() == 4);
  CHECK_FALSE(rep.positive_class.has_value());
  const auto bin = evaluate_binary(vi({1, 1, 0, 0}), vi({1, 0, 1, 0}));
  CHECK(bin.precision == 0.5);
  CHECK(bin.positive_class == 1);
  const auto csv = classification_table_csv({{"bovw+svm test", bin}});
  CHECK(csv == "model,positive_class,Accuracy (%),Precision (%),Recall (%),F1 (%)\nbovw+svm test,1,50.00,50.00,50.00,50.00\n");
  CHECK(mse_table_csv({{"bovw+svm", 0.358, 0.841, 0.835}}) ==
        "MSE,Training set,Development set,Test set\nbovw+svm,0.358,0.841,0.835\n");
}

}  // TEST_SUITE
