#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace urbanvis {

/// Per-street-segment aggregate over qualified, scored images.
/// quality_mean and continuity_share are absent iff n_images == 0.
struct SegmentScore {
  std::string segment_id;
  std::optional<double> quality_mean;
  std::optional<double> continuity_share;
  std::size_t n_images = 0;

  friend bool operator==(const SegmentScore&, const SegmentScore&) = default;
};

}  // namespace urbanvis
