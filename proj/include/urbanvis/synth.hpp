#pragma once

#include <cstdint>
#include <string>

#include "urbanvis/raster.hpp"
#include "urbanvis/rng.hpp"

namespace urbanvis::synth {

// Procedural stand-in for a rated street-view corpus.
//
// A quarter of the images are unqualified street scenes (isotropic value-noise
// texture). The rest are façade scenes: sinusoidal stripes whose gradient direction
// encodes the quality class (1: 0, 2: 45, 3: 90, 4: 135 degrees, jittered), with
// a band of street texture cut through the façade when the wall is discontinuous.
// Classes are balanced. A small share of quality labels is off by one class to
// mimic rater disagreement. Quality is correlated along each segment through a
// latent per-segment level, which also drives the synthetic survey ratings.
struct CorpusOptions {
  std::size_t n_images = 400;  // multiple of 16
  int width = 128;
  int height = 96;
  std::uint64_t seed = 2016;
  double label_noise = 0.05;
  std::size_t survey_respondents_per_segment = 10;
};

struct ImageSpec {
  bool qualified = true;
  int quality = 1;        // texture class actually drawn, 1..4
  bool continuous = true;
};

Raster render_image(const ImageSpec& spec, int width, int height, Rng& rng);

struct CorpusSummary {
  std::size_t n_images = 0;
  std::size_t n_qualified = 0;
  std::size_t n_segments = 0;
  std::size_t n_labels = 0;
};

// Writes into out_dir:
//   network.geojson   street segments (about 1.9 km each, ten capture points)
//   points.csv        capture points at the 200 m interval
//   images/*.png      one image per capture point
//   images.csv        manifest with paths relative to out_dir
//   labels.jsonl      qualification for every image; quality and continuity for qualified ones
//   survey.csv        1..5 ratings per segment with demographic columns
CorpusSummary generate_corpus(const std::string& out_dir, const CorpusOptions& opts = {});

}  // namespace urbanvis::synth
