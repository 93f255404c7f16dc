#pragma once

#include "nlap/ingest.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace nlap {

struct TripletConfig {
  int frame_gap = 3;
  int patch_size = 64;
  int min_box_side = 8;

  /// Throws ConfigError.
  void validate() const;
  bool operator==(const TripletConfig&) const = default;
};

/// Past, current and next appearance of one detected object, all cut with
/// the box detected in the current frame.
struct AppearanceTriplet {
  Patch past;
  Patch current;
  Patch next;
  std::string video_id;
  int frame_index = 0;            // current frame t
  std::size_t detection_ref = 0;  // index into DetectionSet::detections
};

/// Box clamped to the [0,width] x [0,height] frame rectangle.
BBox clamp_to_frame(const BBox& box, int width, int height);

/// Clamps `box` to the frame and bilinearly resamples the region to
/// size x size (half-pixel centers). Throws std::invalid_argument
/// ("empty crop") when a clamped side is shorter than one pixel.
Patch crop_resize(const Image<float>& frame, const BBox& box, int size);

struct TripletBuild {
  std::vector<AppearanceTriplet> triplets;
  std::size_t skipped_boundary = 0;
  std::size_t skipped_small = 0;

  std::size_t skipped() const { return skipped_boundary + skipped_small; }
};

/// One triplet per detection at frame t with gap <= t <= N-1-gap and both
/// clamped box sides >= min_box_side, ordered by (frame, detection order).
TripletBuild build_triplets(const VideoClip& clip, const DetectionSet& dets, const TripletConfig& cfg);

/// Binary triplet cache: 16-byte header, then one record per triplet.
void save_triplet_cache(const std::vector<AppearanceTriplet>& triplets, int patch_size,
                        const std::filesystem::path& path);
std::vector<AppearanceTriplet> load_triplet_cache(const std::filesystem::path& path);

}  // namespace nlap
