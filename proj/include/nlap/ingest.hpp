#pragma once

#include "nlap/tensor.hpp"

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nlap {

enum class IngestErrc {
  missing_directory,
  frame_gap,
  undecodable_image,
  inconsistent_dimensions,
  frame_too_small,
  io_failure,
  malformed_record,
  degenerate_bbox,
  unknown_frame,
};

class IngestError : public std::runtime_error {
 public:
  IngestError(IngestErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  IngestErrc code() const noexcept { return code_; }

 private:
  IngestErrc code_;
};

struct Frame {
  int index = 0;
  Image<float> pixels;  // intensities in [0,1]
};

struct VideoClip {
  std::string id;
  std::vector<Frame> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int height() const { return frames.empty() ? 0 : static_cast<int>(frames.front().pixels.rows()); }
  int width() const { return frames.empty() ? 0 : static_cast<int>(frames.front().pixels.cols()); }
};

/// Axis-aligned box in pixel coordinates, origin top-left, x right, y down.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  bool operator==(const BBox&) const = default;
};

struct Detection {
  int frame_index = 0;
  BBox bbox;
  double confidence = 1.0;
  int class_id = 0;

  bool operator==(const Detection&) const = default;
};

/// Detections of one video, ordered by frame (stable within a frame).
struct DetectionSet {
  std::string video_id;
  std::vector<Detection> detections;

  bool operator==(const DetectionSet&) const = default;
};

inline constexpr double kDefaultConfidenceThreshold = 0.5;
inline constexpr const char* kDetectionsFileName = "detections.jsonl";

/// BT.601 luma of 8-bit RGB, scaled to [0,1]. Equal channels map to the
/// channel value itself.
float luma_bt601(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Decodes an 8-bit gray or RGB(A) PNG into gray intensities in [0,1].
Image<float> read_png(const std::filesystem::path& path);

/// Writes intensities as an 8-bit gray PNG (values clamped, rounded to k/255).
void write_png(const std::filesystem::path& path, const Image<float>& pixels);

/// Rounds intensities to the 8-bit grid the PNG files carry.
Image<float> quantize_8bit(const Image<float>& pixels);

std::string frame_file_name(int index);

/// Loads `<dir>/frame_%06d.png` starting at 000000 with no gaps. The clip id
/// is the directory name.
VideoClip load_video(const std::filesystem::path& dir);

/// Parses a JSON Lines detection file; records below `conf_threshold` are dropped.
DetectionSet load_detections(const std::filesystem::path& path, const std::string& video_id,
                             double conf_threshold = kDefaultConfidenceThreshold);

/// Parses JSON Lines text; `source` names the origin in error messages.
DetectionSet parse_detections(std::istream& in, const std::string& video_id, double conf_threshold,
                              const std::string& source = "<stream>");

void save_detections(const DetectionSet& set, const std::filesystem::path& path);
std::string format_detection(const Detection& d);

/// Throws IngestError when a detection refers to a frame the clip lacks or
/// its box misses the frame rectangle.
void check_detections(const DetectionSet& set, const VideoClip& clip);

/// Stable-sorts detections by frame index.
void sort_by_frame(DetectionSet& set);

}  // namespace nlap
