#include "urbanvis/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "urbanvis/dataset.hpp"
#include "urbanvis/error.hpp"
#include "urbanvis/geo.hpp"
#include "urbanvis/io.hpp"
#include "urbanvis/parallel.hpp"

namespace urbanvis::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Bilinear value noise in [0, 1] over a grid of `cell`-pixel cells.
Eigen::ArrayXXd value_noise(int width, int height, int cell, Rng& rng) {
  const int gw = width / cell + 2;
  const int gh = height / cell + 2;
  Eigen::ArrayXXd grid(gh, gw);
  for (int r = 0; r < gh; ++r) {
    for (int c = 0; c < gw; ++c) grid(r, c) = rng.uniform();
  }
  Eigen::ArrayXXd out(height, width);
  for (int y = 0; y < height; ++y) {
    const double fy = static_cast<double>(y) / cell;
    const int y0 = static_cast<int>(fy);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / cell;
      const int x0 = static_cast<int>(fx);
      const double tx = fx - x0;
      out(y, x) = (1 - ty) * ((1 - tx) * grid(y0, x0) + tx * grid(y0, x0 + 1)) +
                  ty * ((1 - tx) * grid(y0 + 1, x0) + tx * grid(y0 + 1, x0 + 1));
    }
  }
  return out;
}

std::string pad(std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return buf;
}

// Segment s on a grid of four segments per east-west street, streets about 445 m
// apart. Its length is (n_points - 1) * 200 m plus 100 m, so it carries n_points capture points.
geo::StreetSegment make_segment(std::size_t s, std::size_t n_points) {
  constexpr double lon0 = 116.30, lat0 = 39.88;
  constexpr double full_lon = 0.02227;  // about 1.9 km at this latitude
  const double seg_lon = full_lon * (200.0 * static_cast<double>(n_points - 1) + 100.0) / 1900.0;
  const double lat = lat0 + 0.004 * static_cast<double>(s / 4);
  const double w = lon0 + (full_lon + 0.0012) * static_cast<double>(s % 4);
  return {"seg" + pad(s, 3),
          {{w, lat}, {w + seg_lon / 2, lat + 0.0003 * ((s % 2) ? 1.0 : -1.0)}, {w + seg_lon, lat}}};
}

}  // namespace

Raster render_image(const ImageSpec& spec, int width, int height, Rng& rng) {
  Eigen::ArrayXXd v(height, width);
  if (!spec.qualified) {
    v = 60.0 + 140.0 * value_noise(width, height, 6, rng);
  } else {
    const double theta = ((spec.quality - 1) * 45.0 + (rng.uniform() * 16.0 - 8.0)) * kDeg;
    const double period = 7.0 + 4.0 * rng.uniform();
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    const double amp = 55.0 + 30.0 * rng.uniform();
    const double base = 110.0 + 40.0 * rng.uniform();
    const double kx = std::cos(theta) * 2.0 * std::numbers::pi / period;
    const double ky = std::sin(theta) * 2.0 * std::numbers::pi / period;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) v(y, x) = base + amp * std::sin(kx * x + ky * y + phase);
    }
    if (!spec.continuous) {
      const int band = static_cast<int>(0.4 * width);
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - band + 1)));
      const Eigen::ArrayXXd street = 60.0 + 140.0 * value_noise(band, height, 6, rng);
      v.middleCols(x0, band) = street;
    }
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 6.0 * rng.normal();

  const std::array<double, 3> tint =
      spec.qualified ? std::array<double, 3>{1.0, 0.95, 0.85} : std::array<double, 3>{0.85, 0.95, 1.0};
  Raster out{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double px = std::clamp(std::round(v(y, x) * tint[static_cast<std::size_t>(c)]), 0.0, 255.0);
        out.rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c] = static_cast<std::uint8_t>(px);
      }
    }
  }
  return out;
}

CorpusSummary generate_corpus(const std::string& out_dir, const CorpusOptions& opts) {
  if (opts.n_images == 0 || opts.n_images % 16 != 0) {
    throw Error(Errc::InvalidArgument, "n_images must be a positive multiple of 16");
  }
  if (opts.width < 16 || opts.height < 16) throw Error(Errc::InvalidArgument, "images must be at least 16x16");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");

  const std::size_t n = opts.n_images;
  const std::size_t n_segments = n / 10 + (n % 10 != 0);
  Rng rng(mix_seed(opts.seed));

  std::vector<geo::StreetSegment> segments;
  std::vector<geo::SamplePoint> points;
  std::vector<std::size_t> segment_of;
  for (std::size_t s = 0; s < n_segments; ++s) segments.push_back(make_segment(s, std::min<std::size_t>(10, n - 10 * s)));
  // Sample the network as written to disk, so `sample` on network.geojson reproduces points.csv.
  const std::string network = geo::street_network_to_geojson(segments);
  segments = geo::parse_street_network(network);
  for (std::size_t s = 0; s < n_segments; ++s) {
    for (auto& p : geo::sample_points(segments[s])) {
      points.push_back(std::move(p));
      segment_of.push_back(s);
    }
  }
  if (points.size() != n) throw Error(Errc::InvalidGeometry, "synthetic network point count mismatch");

  // Latent per-segment levels for quality (u) and continuity (c).
  std::vector<double> u(n_segments), c(n_segments);
  for (std::size_t s = 0; s < n_segments; ++s) {
    u[s] = rng.uniform();
    c[s] = rng.uniform();
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t n_unqualified = n / 4;
  std::vector<std::size_t> qualified(order.begin() + static_cast<std::ptrdiff_t>(n_unqualified), order.end());

  std::vector<ImageSpec> specs(n, ImageSpec{false, 1, true});
  std::vector<int> quality_label(n, 0);
  auto by_key = [&](const std::vector<double>& level) {
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i : qualified) keyed.emplace_back(level[segment_of[i]] + 0.35 * rng.normal(), i);
    std::sort(keyed.begin(), keyed.end());
    return keyed;
  };
  const auto qk = by_key(u);
  for (std::size_t r = 0; r < qk.size(); ++r) {
    const std::size_t i = qk[r].second;
    specs[i].qualified = true;
    quality_label[i] = 1 + static_cast<int>(4 * r / qk.size());
  }
  const auto ck = by_key(c);
  for (std::size_t r = 0; r < ck.size(); ++r) specs[ck[r].second].continuous = 2 * r >= ck.size();
  for (std::size_t i : qualified) {
    int drawn = quality_label[i];
    if (rng.uniform() < opts.label_noise) drawn += (drawn == 1 || (drawn < 4 && rng.uniform() < 0.5)) ? 1 : -1;
    specs[i].quality = drawn;
  }

  std::vector<ImageRecord> manifest(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "img" + pad(i, 4);
    manifest[i] = {id, points[i].point_id, points[i].segment_id, "images/" + id + ".png", opts.width, opts.height};
  }
  parallel_for(n, 0, [&](std::size_t i) {
    Rng img_rng(mix_seed(opts.seed ^ mix_seed(i + 1)));
    save_png((fs::path(out_dir) / manifest[i].raster_path).string(),
             render_image(specs[i], opts.width, opts.height, img_rng));
  });

  std::string labels;
  std::size_t n_labels = 0;
  std::int64_t ts = 1700000000;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string rater = i % 2 ? "expert-b" : "expert-a";
    auto add = [&](Task t, int value) {
      labels += to_json_line({manifest[i].image_id, t, value, rater, ts++}) + '\n';
      ++n_labels;
    };
    add(Task::Qualification, specs[i].qualified ? 1 : 0);
    if (specs[i].qualified) {
      add(Task::Quality, quality_label[i]);
      add(Task::Continuity, specs[i].continuous ? 1 : 0);
    }
  }

  static const std::array<const char*, 2> genders{"Male", "Female"};
  static const std::array<const char*, 4> ages{"<18", "18-40", "41-60", "60+"};
  static const std::array<const char*, 2> residences{"Beijing resident", "visitor"};
  static const std::array<const char*, 5> educations{"Elementary school and under", "Junior school",
                                                     "High school and equivalent", "Bachelor's degree and equivalent",
                                                     "Master's degree and above"};
  std::string survey = "segment_id,rating,gender,age_band,residence,education,feature\n";
  for (std::size_t s = 0; s < n_segments; ++s) {
    for (std::size_t r = 0; r < opts.survey_respondents_per_segment; ++r) {
      const std::string who = std::string(genders[rng.below(2)]) + ',' + ages[rng.below(4)] + ',' +
                              residences[rng.below(2)] + ',' + educations[rng.below(5)];
      for (Task t : {Task::Quality, Task::Continuity}) {
        const double level = t == Task::Quality ? u[s] : c[s];
        const long rating = std::clamp(std::lround(1.0 + 4.0 * level + 0.8 * rng.normal()), 1L, 5L);
        survey += segments[s].segment_id + ',' + std::to_string(rating) + ',' + who + ',' +
                  std::string(task_name(t)) + '\n';
      }
    }
  }

  io::write_file((fs::path(out_dir) / "network.geojson").string(), network);
  geo::write_points_csv((fs::path(out_dir) / "points.csv").string(), points);
  write_manifest((fs::path(out_dir) / "images.csv").string(), manifest);
  io::write_file((fs::path(out_dir) / "labels.jsonl").string(), labels);
  io::write_file((fs::path(out_dir) / "survey.csv").string(), survey);

  return {n, qualified.size(), n_segments, n_labels};
}

}  // namespace urbanvis::synth
