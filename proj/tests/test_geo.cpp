#include <doctest.h>

#include <cmath>

#include "json.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/geo.hpp"
#include "urbanvis/rng.hpp"

using namespace urbanvis;
using namespace urbanvis::geo;

namespace {

// Meters per degree of latitude on the 6,371 km sphere.
const double kMetersPerDegLat = kEarthRadiusM * std::numbers::pi / 180.0;

StreetSegment due_north(double length_m, LonLat start = {116.0, 39.9}) {
  return {"n", {start, LonLat(start.x(), start.y() + length_m / kMetersPerDegLat)}};
}

}  // namespace

TEST_SUITE("geo") {

TEST_CASE("haversine reference values") {
  const LonLat a(116.0, 39.9);
  CHECK(haversine_m(a, a) == 0.0);
  // Frozen from an independent evaluation of the haversine formula with R = 6,371,000 m.
  CHECK(haversine_m(LonLat(116.0, 39.90), LonLat(116.0, 39.91)) == doctest::Approx(1111.949266).epsilon(1e-9));
  CHECK(haversine_m(LonLat(0, 0), LonLat(0, 90)) == doctest::Approx(std::numbers::pi / 2 * kEarthRadiusM).epsilon(1e-12));
  const LonLat b(-73.98, 40.75);
  CHECK(haversine_m(a, b) == doctest::Approx(haversine_m(b, a)).epsilon(1e-15));
  // float instantiation
  CHECK(haversine_m(LonLatT<float>(116.f, 39.9f), LonLatT<float>(116.f, 39.91f)) == doctest::Approx(1111.95).epsilon(1e-4));
}

TEST_CASE("sample_points floor rule and endpoint inclusion") {
  const auto seg450 = due_north(450.0);
  auto pts = sample_points(seg450, {200.0});
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].offset_m == 0.0);
  CHECK(pts[1].offset_m == 200.0);
  CHECK(pts[2].offset_m == 400.0);

  // Exactly two intervals long: the far endpoint is hit.
  const auto seg400 = due_north(400.0);
  const double len = seg400.length_m();
  pts = sample_points(seg400, {len / 2.0});
  REQUIRE(pts.size() == 3);
  CHECK(pts[2].offset_m == len);
  CHECK((pts[2].position - seg400.polyline[1]).norm() < 1e-12);
}

TEST_CASE("camera heading is perpendicular to the street") {
  const auto seg = due_north(450.0);
  for (const auto& p : sample_points(seg)) CHECK(p.heading_deg == doctest::Approx(90.0).epsilon(1e-12));
  SampleOptions flipped;
  flipped.flip_side = true;
  for (const auto& p : sample_points(seg, flipped)) CHECK(p.heading_deg == doctest::Approx(270.0).epsilon(1e-12));

  const StreetSegment east{"e", {{0.0, 0.0}, {0.01, 0.0}}};
  CHECK(sample_points(east).front().heading_deg == doctest::Approx(180.0));
}

TEST_CASE("degenerate and invalid polylines") {
  const StreetSegment zero{"z", {{116.0, 39.9}, {116.0, 39.9}}};
  const auto pts = sample_points(zero);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].heading_deg == 0.0);
  CHECK(pts[0].offset_m == 0.0);

  const StreetSegment one{"one", {{116.0, 39.9}}};
  CHECK_THROWS_AS(sample_points(one), Error);
  const StreetSegment bad{"bad", {{200.0, 39.9}, {116.0, 39.9}}};
  try {
    sample_points(bad);
    FAIL("expected InvalidGeometry");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidGeometry);
  }
  CHECK_THROWS_AS(sample_points(due_north(100.0), {0.0}), Error);
}

TEST_CASE("sample_points properties on random polylines") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    StreetSegment seg{"r", {}};
    LonLat p(116.0 + rng.uniform(), 39.5 + rng.uniform());
    seg.polyline.push_back(p);
    const int nv = 2 + static_cast<int>(rng.below(6));
    for (int i = 1; i < nv; ++i) {
      p += LonLat((rng.uniform() - 0.5) * 0.02, (rng.uniform() - 0.5) * 0.02);
      seg.polyline.push_back(p);
    }
    const double interval = 20.0 + 300.0 * rng.uniform();
    const double len = seg.length_m();
    const auto pts = sample_points(seg, {interval});
    REQUIRE(pts.size() == static_cast<std::size_t>(std::floor(len / interval)) + 1);

    std::vector<double> cum{0.0};
    for (std::size_t j = 1; j < seg.polyline.size(); ++j) {
      cum.push_back(cum.back() + haversine_m(seg.polyline[j - 1], seg.polyline[j]));
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].offset_m == static_cast<double>(i) * interval);
      if (i > 0) CHECK(pts[i].offset_m > pts[i - 1].offset_m);
      CHECK(pts[i].heading_deg >= 0.0);
      CHECK(pts[i].heading_deg < 360.0);
      // Distance walked along the vertex chain to the point matches its offset.
      std::size_t e = 0;
      while (e + 2 < cum.size() && cum[e + 1] <= pts[i].offset_m) ++e;
      const double along = cum[e] + haversine_m(seg.polyline[e], pts[i].position);
      CHECK(std::abs(along - std::min(pts[i].offset_m, len)) <= 0.5);
    }
  }
}

TEST_CASE("bin assignment is half-open with the last bin closed") {
  const BinSpec q{{1.0, 2.0, 3.0, 4.0}};
  CHECK(q.bin_of(4.0) == 2);
  CHECK(q.bin_of(1.0) == 0);
  CHECK(q.bin_of(2.0) == 1);
  CHECK(q.bin_of(3.999) == 2);
  CHECK_FALSE(q.bin_of(0.5).has_value());
  CHECK_FALSE(q.bin_of(4.5).has_value());
}

TEST_CASE("export_geojson") {
  using nlohmann::json;
  const std::vector<StreetSegment> segs{{"b", {{116.0, 39.9}, {116.001, 39.9}}},
                                        {"a", {{116.0, 39.91}, {116.0123456789, 39.91}}}};
  const auto empty = json::parse(export_geojson({}, segs));
  CHECK(empty["type"] == "FeatureCollection");
  CHECK(empty["features"].empty());

  std::vector<SegmentScore> scores{{"b", 3.0, 0.5, 2}, {"a", 4.0, 1.0, 1}};
  const std::string text = export_geojson(scores, segs);
  CHECK(text == export_geojson(scores, segs));
  const auto doc = json::parse(text);
  REQUIRE(doc["features"].size() == 2);
  const auto& fa = doc["features"][0];
  CHECK(fa["properties"]["segment_id"] == "a");
  CHECK(fa["properties"]["quality_bin"] == 2);
  CHECK(fa["properties"]["continuity_bin"] == 3);
  CHECK(fa["geometry"]["type"] == "LineString");
  // nine significant digits
  CHECK(fa["geometry"]["coordinates"][1][0].get<double>() == 116.012346);
  const auto& fb = doc["features"][1];
  CHECK(fb["properties"]["quality_mean"] == 3.0);
  CHECK(fb["properties"]["n_images"] == 2);

  std::vector<SegmentScore> absent{{"a", std::nullopt, std::nullopt, 0}};
  const auto nulls = json::parse(export_geojson(absent, segs));
  CHECK(nulls["features"][0]["properties"]["quality_mean"].is_null());
  CHECK(nulls["features"][0]["properties"]["quality_bin"].is_null());

  try {
    export_geojson({{"zzz", 2.0, 0.0, 1}}, segs);
    FAIL("expected UnknownSegment");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownSegment);
  }
}

TEST_CASE("street network round trip") {
  const std::vector<StreetSegment> segs{{"s1", {{116.0, 39.9}, {116.001, 39.9}, {116.002, 39.901}}}};
  const auto parsed = parse_street_network(street_network_to_geojson(segs));
  REQUIRE(parsed.size() == 1);
  CHECK(parsed[0].segment_id == "s1");
  CHECK(parsed[0].polyline.size() == 3);
  CHECK_THROWS_AS(parse_street_network(R"({"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0],[1,1]]}}]})"), Error);
}

}  // TEST_SUITE
