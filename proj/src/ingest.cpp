#include "nlap/ingest.hpp"

#include "nlap/io.hpp"
#include "nlap/parallel.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

namespace nlap {

namespace fs = std::filesystem;

float luma_bt601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (r == g && g == b) return static_cast<float>(r / 255.0);
  const double y = 0.299 * (r / 255.0) + 0.587 * (g / 255.0) + 0.114 * (b / 255.0);
  return static_cast<float>(std::clamp(y, 0.0, 1.0));
}

namespace {

struct PngImage {
  png_image image{};
  PngImage() {
    image.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&image); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

Image<float> read_png(const fs::path& path) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.image, path.string().c_str()))
    throw IngestError(IngestErrc::undecodable_image, "cannot decode image " + path.string() + ": " + png.image.message);
  const bool color = (png.image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int w = static_cast<int>(png.image.width);
  const int h = static_cast<int>(png.image.height);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png.image));
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&png.image, &background, buffer.data(), 0, nullptr))
    throw IngestError(IngestErrc::undecodable_image, "cannot decode image " + path.string() + ": " + png.image.message);

  Image<float> out(h, w);
  if (color) {
    for (int i = 0; i < h * w; ++i)
      out.data()[i] = luma_bt601(buffer[3 * i], buffer[3 * i + 1], buffer[3 * i + 2]);
  } else {
    for (int i = 0; i < h * w; ++i) out.data()[i] = static_cast<float>(buffer[i] / 255.0);
  }
  return out;
}

Image<float> quantize_8bit(const Image<float>& pixels) {
  return pixels.unaryExpr([](float v) {
    const double q = std::round(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0);
    return static_cast<float>(q / 255.0);
  });
}

void write_png(const fs::path& path, const Image<float>& pixels) {
  std::vector<png_byte> buffer(static_cast<std::size_t>(pixels.size()));
  for (Eigen::Index i = 0; i < pixels.size(); ++i)
    buffer[static_cast<std::size_t>(i)] =
        static_cast<png_byte>(std::lround(std::clamp(static_cast<double>(pixels.data()[i]), 0.0, 1.0) * 255.0));
  write_atomically(path, [&](const fs::path& tmp) {
    PngImage png;
    png.image.width = static_cast<png_uint_32>(pixels.cols());
    png.image.height = static_cast<png_uint_32>(pixels.rows());
    png.image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&png.image, tmp.string().c_str(), 0, buffer.data(), 0, nullptr))
      throw IngestError(IngestErrc::io_failure, "cannot write " + path.string() + ": " + png.image.message);
  });
}

std::string frame_file_name(int index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%06d.png", index);
  return name;
}

VideoClip load_video(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestError(IngestErrc::missing_directory, "missing video directory " + dir.string());

  static const std::regex pattern(R"(frame_(\d{6})\.png)");
  std::map<int, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) files.emplace(std::stoi(m[1].str()), entry.path());
  }
  int expected = 0;
  for (const auto& [index, path] : files) {
    if (index != expected)
      throw IngestError(IngestErrc::frame_gap, "gap at index " + std::to_string(expected) + " (next file " +
                                                   path.filename().string() + ") in " + dir.string());
    ++expected;
  }

  VideoClip clip;
  clip.id = dir.filename().string();
  if (clip.id.empty()) clip.id = dir.parent_path().filename().string();
  clip.frames.resize(files.size());
  std::vector<fs::path> paths;
  for (const auto& [index, path] : files) paths.push_back(path);
  parallel_for(paths.size(), [&](std::size_t i) {
    clip.frames[i].index = static_cast<int>(i);
    clip.frames[i].pixels = read_png(paths[i]);
  });

  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    const auto& px = clip.frames[i].pixels;
    if (px.rows() < 16 || px.cols() < 16)
      throw IngestError(IngestErrc::frame_too_small, "frame smaller than 16x16: " + paths[i].string());
    if (px.rows() != clip.frames.front().pixels.rows() || px.cols() != clip.frames.front().pixels.cols())
      throw IngestError(IngestErrc::inconsistent_dimensions, "inconsistent frame dimensions: " + paths[i].string());
  }
  return clip;
}

void sort_by_frame(DetectionSet& set) {
  std::stable_sort(set.detections.begin(), set.detections.end(),
                   [](const Detection& a, const Detection& b) { return a.frame_index < b.frame_index; });
}

DetectionSet parse_detections(std::istream& in, const std::string& video_id, double conf_threshold,
                              const std::string& source) {
  DetectionSet set;
  set.video_id = video_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ", line " + std::to_string(line_no);
    Detection d;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto& box = j.at("bbox");
      if (!box.is_array() || box.size() != 4) throw std::invalid_argument("bbox must have 4 numbers");
      d.frame_index = j.at("frame").get<int>();
      d.bbox = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
      d.confidence = j.at("conf").get<double>();
      d.class_id = j.at("class").get<int>();
      if (d.frame_index < 0) throw std::invalid_argument("negative frame index");
      if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw std::invalid_argument("confidence outside [0,1]");
      for (double c : {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2})
        if (!std::isfinite(c)) throw std::invalid_argument("non-finite coordinate");
    } catch (const std::exception& e) {
      throw IngestError(IngestErrc::malformed_record, "malformed record, " + where + ": " + e.what());
    }
    if (!(d.bbox.x1 < d.bbox.x2) || !(d.bbox.y1 < d.bbox.y2))
      throw IngestError(IngestErrc::degenerate_bbox, "degenerate bbox, " + where + ": " + line);
    if (d.confidence < conf_threshold) continue;
    set.detections.push_back(d);
  }
  sort_by_frame(set);
  return set;
}

DetectionSet load_detections(const fs::path& path, const std::string& video_id, double conf_threshold) {
  std::ifstream in(path);
  if (!in) throw IngestError(IngestErrc::io_failure, "cannot open detections file " + path.string());
  return parse_detections(in, video_id, conf_threshold, path.string());
}

std::string format_detection(const Detection& d) {
  nlohmann::json j;
  j["frame"] = d.frame_index;
  j["bbox"] = {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2};
  j["conf"] = d.confidence;
  j["class"] = d.class_id;
  return j.dump();
}

void save_detections(const DetectionSet& set, const fs::path& path) {
  write_file_atomically(path, [&](std::ostream& out) {
    for (const auto& d : set.detections) out << format_detection(d) << '\n';
  });
}

void check_detections(const DetectionSet& set, const VideoClip& clip) {
  for (const auto& d : set.detections) {
    if (d.frame_index < 0 || d.frame_index >= clip.frame_count())
      throw IngestError(IngestErrc::unknown_frame, "detection refers to frame " + std::to_string(d.frame_index) +
                                                       " outside video " + clip.id);
    const auto& b = d.bbox;
    if (b.x2 <= 0 || b.y2 <= 0 || b.x1 >= clip.width() || b.y1 >= clip.height())
      throw IngestError(IngestErrc::degenerate_bbox, "bbox misses the frame at frame " + std::to_string(d.frame_index) +
                                                         " in video " + clip.id);
  }
}

}  // namespace nlap
