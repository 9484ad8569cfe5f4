#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "urbanvis/segment_score.hpp"

namespace urbanvis::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

/// (lon, lat) in degrees, WGS84 axis order.
template <typename Scalar>
using LonLatT = Eigen::Matrix<Scalar, 2, 1>;
using LonLat = LonLatT<double>;

/// Great-circle distance in meters on a sphere of radius 6,371,000 m.
template <typename Scalar>
Scalar haversine_m(const LonLatT<Scalar>& a, const LonLatT<Scalar>& b) {
  using std::asin;
  using std::cos;
  using std::min;
  using std::sin;
  using std::sqrt;
  constexpr Scalar deg = std::numbers::pi_v<Scalar> / Scalar(180);
  const Scalar lat1 = a.y() * deg;
  const Scalar lat2 = b.y() * deg;
  const Scalar dlat = lat2 - lat1;
  const Scalar dlon = (b.x() - a.x()) * deg;
  const Scalar s1 = sin(dlat / 2);
  const Scalar s2 = sin(dlon / 2);
  const Scalar h = s1 * s1 + cos(lat1) * cos(lat2) * s2 * s2;
  return Scalar(2) * Scalar(kEarthRadiusM) * asin(min(Scalar(1), sqrt(h)));
}

/// Initial great-circle bearing from a to b, degrees clockwise from north in [0, 360).
double initial_bearing_deg(const LonLat& a, const LonLat& b);

bool valid_coordinate(const LonLat& p) noexcept;

struct StreetSegment {
  std::string segment_id;
  std::vector<LonLat> polyline;

  double length_m() const;
};

/// Throws InvalidGeometry on fewer than two vertices or out-of-range coordinates.
void validate(const StreetSegment& seg);

struct SamplePoint {
  std::string point_id;
  std::string segment_id;
  double offset_m = 0.0;
  LonLat position = LonLat::Zero();
  double heading_deg = 0.0;
};

struct SampleOptions {
  double interval_m = 200.0;
  // Face the left side of the street (-90 deg) instead of the right (+90 deg).
  bool flip_side = false;
};

// Capture points every interval_m along the polyline, starting at offset 0.
// The far endpoint is included only when it lands on a multiple of the interval.
// A zero-length polyline yields its start vertex with heading 0.
std::vector<SamplePoint> sample_points(const StreetSegment& seg, const SampleOptions& opts = {});

/// Half-open bins [e0,e1), [e1,e2), ..., with the last bin closed.
struct BinSpec {
  std::vector<double> edges;

  /// Bin index of v, or nullopt when v falls outside every bin.
  std::optional<int> bin_of(double v) const;
};

struct MapBins {
  BinSpec quality{{1.0, 2.0, 3.0, 4.0}};
  BinSpec continuity{{0.0, 0.25, 0.5, 0.75, 1.0}};
};

/// Reads a GeoJSON FeatureCollection of LineStrings carrying a segment_id property.
std::vector<StreetSegment> parse_street_network(const std::string& geojson_text);
std::vector<StreetSegment> load_street_network(const std::string& path);

std::string street_network_to_geojson(const std::vector<StreetSegment>& segments);

/// Scoring map: one LineString feature per score, ordered by segment_id.
/// Throws UnknownSegment when a score has no geometry.
std::string export_geojson(const std::vector<SegmentScore>& scores,
                           const std::vector<StreetSegment>& segments,
                           const MapBins& bins = {});

/// Rounds to nine significant digits, the precision used in exported maps.
double round_sig9(double v);

void write_points_csv(const std::string& path, const std::vector<SamplePoint>& points);
std::vector<SamplePoint> read_points_csv(const std::string& path);

}  // namespace urbanvis::geo
