#include "urbanvis/geo.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "json.hpp"

#include "urbanvis/error.hpp"
#include "urbanvis/io.hpp"

namespace urbanvis::geo {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap_degrees(double d) {
  double w = std::fmod(d, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w = 0.0;
  return w;
}

}  // namespace

double initial_bearing_deg(const LonLat& a, const LonLat& b) {
  const double lat1 = a.y() * kDeg;
  const double lat2 = b.y() * kDeg;
  const double dlon = (b.x() - a.x()) * kDeg;
  const double y = std::sin(dlon) * std::cos(lat2);
  const double x = std::cos(lat1) * std::sin(lat2) - std::sin(lat1) * std::cos(lat2) * std::cos(dlon);
  return wrap_degrees(std::atan2(y, x) / kDeg);
}

bool valid_coordinate(const LonLat& p) noexcept {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && p.x() >= -180.0 && p.x() <= 180.0 &&
         p.y() >= -90.0 && p.y() <= 90.0;
}

double StreetSegment::length_m() const {
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) total += haversine_m(polyline[i - 1], polyline[i]);
  return total;
}

void validate(const StreetSegment& seg) {
  if (seg.polyline.size() < 2) {
    throw Error(Errc::InvalidGeometry, "segment '" + seg.segment_id + "' has fewer than 2 vertices");
  }
  for (const auto& p : seg.polyline) {
    if (!valid_coordinate(p)) {
      throw Error(Errc::InvalidGeometry, "segment '" + seg.segment_id + "' has an out-of-range vertex");
    }
  }
}

std::vector<SamplePoint> sample_points(const StreetSegment& seg, const SampleOptions& opts) {
  if (!(opts.interval_m > 0.0) || !std::isfinite(opts.interval_m)) {
    throw Error(Errc::InvalidArgument, "interval_m must be a positive finite number");
  }
  validate(seg);

  const auto& line = seg.polyline;
  const std::size_t n_edges = line.size() - 1;
  std::vector<double> edge(n_edges);
  std::vector<double> cum(n_edges + 1, 0.0);
  for (std::size_t j = 0; j < n_edges; ++j) {
    edge[j] = haversine_m(line[j], line[j + 1]);
    cum[j + 1] = cum[j] + edge[j];
  }
  const double length = cum.back();

  auto make_id = [&](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ":%04zu", i);
    return seg.segment_id + buf;
  };

  std::vector<SamplePoint> out;
  if (length == 0.0) {
    out.push_back({make_id(0), seg.segment_id, 0.0, line.front(), 0.0});
    return out;
  }

  const double side = opts.flip_side ? -90.0 : 90.0;
  const auto count = static_cast<std::size_t>(std::floor(length / opts.interval_m)) + 1;
  out.reserve(count);
  std::size_t j = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const double offset = static_cast<double>(i) * opts.interval_m;
    const double at = std::min(offset, length);
    while (j + 1 < n_edges && cum[j + 1] <= at) ++j;
    std::size_t e = j;
    while (edge[e] == 0.0 && e > 0) --e;
    const double t = edge[e] == 0.0 ? 0.0 : std::clamp((at - cum[e]) / edge[e], 0.0, 1.0);
    const LonLat pos = line[e] + t * (line[e + 1] - line[e]);
    const double heading = wrap_degrees(initial_bearing_deg(line[e], line[e + 1]) + side);
    out.push_back({make_id(i), seg.segment_id, offset, pos, heading});
  }
  return out;
}

std::optional<int> BinSpec::bin_of(double v) const {
  if (edges.size() < 2 || !std::isfinite(v)) return std::nullopt;
  const int last = static_cast<int>(edges.size()) - 2;
  for (int b = 0; b <= last; ++b) {
    const double lo = edges[b];
    const double hi = edges[b + 1];
    if (v >= lo && (v < hi || (b == last && v == hi))) return b;
  }
  return std::nullopt;
}

double round_sig9(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::vector<StreetSegment> parse_street_network(const std::string& geojson_text) {
  json doc;
  try {
    doc = json::parse(geojson_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::MalformedRow, std::string("street network is not JSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
      !doc["features"].is_array()) {
    throw Error(Errc::InvalidGeometry, "street network must be a GeoJSON FeatureCollection");
  }
  std::vector<StreetSegment> out;
  for (const auto& f : doc["features"]) {
    const auto& geom = f.at("geometry");
    if (geom.value("type", "") != "LineString") {
      throw Error(Errc::InvalidGeometry, "street network features must be LineStrings");
    }
    const auto& props = f.contains("properties") ? f["properties"] : json::object();
    if (!props.is_object() || !props.contains("segment_id")) {
      throw Error(Errc::InvalidGeometry, "street feature lacks a segment_id property");
    }
    StreetSegment seg;
    const auto& sid = props["segment_id"];
    seg.segment_id = sid.is_string() ? sid.get<std::string>() : sid.dump();
    for (const auto& c : geom.at("coordinates")) {
      if (!c.is_array() || c.size() < 2) throw Error(Errc::InvalidGeometry, "bad coordinate in " + seg.segment_id);
      seg.polyline.emplace_back(c[0].get<double>(), c[1].get<double>());
    }
    validate(seg);
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<StreetSegment> load_street_network(const std::string& path) {
  return parse_street_network(io::read_file(path));
}

namespace {

json linestring(const std::vector<LonLat>& line) {
  json coords = json::array();
  for (const auto& p : line) coords.push_back({round_sig9(p.x()), round_sig9(p.y())});
  return {{"type", "LineString"}, {"coordinates", std::move(coords)}};
}

json optional_number(const std::optional<double>& v) {
  return v ? json(round_sig9(*v)) : json(nullptr);
}

json optional_bin(const std::optional<double>& v, const BinSpec& spec) {
  if (!v) return nullptr;
  const auto b = spec.bin_of(*v);
  return b ? json(*b) : json(nullptr);
}

}  // namespace

std::string street_network_to_geojson(const std::vector<StreetSegment>& segments) {
  json features = json::array();
  for (const auto& s : segments) {
    features.push_back({{"type", "Feature"},
                        {"properties", {{"segment_id", s.segment_id}}},
                        {"geometry", linestring(s.polyline)}});
  }
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump(1) + "\n";
}

std::string export_geojson(const std::vector<SegmentScore>& scores,
                           const std::vector<StreetSegment>& segments, const MapBins& bins) {
  std::map<std::string, const StreetSegment*> by_id;
  for (const auto& s : segments) by_id.emplace(s.segment_id, &s);

  std::vector<const SegmentScore*> ordered;
  ordered.reserve(scores.size());
  for (const auto& sc : scores) {
    if (!by_id.contains(sc.segment_id)) {
      throw Error(Errc::UnknownSegment, "no geometry for segment '" + sc.segment_id + "'");
    }
    ordered.push_back(&sc);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const SegmentScore* a, const SegmentScore* b) { return a->segment_id < b->segment_id; });

  json features = json::array();
  for (const SegmentScore* sc : ordered) {
    json props = {
        {"segment_id", sc->segment_id},
        {"quality_mean", optional_number(sc->quality_mean)},
        {"continuity_share", optional_number(sc->continuity_share)},
        {"n_images", sc->n_images},
        {"quality_bin", optional_bin(sc->quality_mean, bins.quality)},
        {"continuity_bin", optional_bin(sc->continuity_share, bins.continuity)},
    };
    features.push_back({{"type", "Feature"},
                        {"properties", std::move(props)},
                        {"geometry", linestring(by_id.at(sc->segment_id)->polyline)}});
  }
  return json{{"type", "FeatureCollection"}, {"features", std::move(features)}}.dump(1) + "\n";
}

void write_points_csv(const std::string& path, const std::vector<SamplePoint>& points) {
  std::string out = "point_id,segment_id,offset_m,lon,lat,heading_deg\n";
  for (const auto& p : points) {
    out += p.point_id + ',' + p.segment_id + ',' + io::format_double(p.offset_m) + ',' +
           io::format_double(p.position.x()) + ',' + io::format_double(p.position.y()) + ',' +
           io::format_double(p.heading_deg) + '\n';
  }
  io::write_file(path, out);
}

std::vector<SamplePoint> read_points_csv(const std::string& path) {
  const auto rows = io::lines(io::read_file(path));
  if (rows.empty() || rows[0] != "point_id,segment_id,offset_m,lon,lat,heading_deg") {
    throw Error(Errc::MalformedHeader, path);
  }
  std::vector<SamplePoint> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split_csv_line(rows[i]);
    if (f.size() != 6) throw Error(Errc::MalformedRow, path + " line " + std::to_string(i + 1));
    out.push_back({f[0], f[1], io::parse_double(f[2]), LonLat(io::parse_double(f[3]), io::parse_double(f[4])),
                   io::parse_double(f[5])});
  }
  return out;
}

}  // namespace urbanvis::geo
