#include "nlap/triplet.hpp"

#include "nlap/io.hpp"
#include "nlap/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace nlap {

namespace fs = std::filesystem;

void TripletConfig::validate() const {
  if (frame_gap < 1) throw ConfigError("frame_gap must be >= 1");
  if (patch_size < 16 || (patch_size & (patch_size - 1)) != 0)
    throw ConfigError("patch_size must be a power of two >= 16");
  if (min_box_side < 1) throw ConfigError("min_box_side must be positive");
}

BBox clamp_to_frame(const BBox& box, int width, int height) {
  return {std::clamp(box.x1, 0.0, double(width)), std::clamp(box.y1, 0.0, double(height)),
          std::clamp(box.x2, 0.0, double(width)), std::clamp(box.y2, 0.0, double(height))};
}

Patch crop_resize(const Image<float>& frame, const BBox& box, int size) {
  if (size < 1) throw std::invalid_argument("crop_resize: size must be positive");
  const int h = static_cast<int>(frame.rows());
  const int w = static_cast<int>(frame.cols());
  const BBox c = clamp_to_frame(box, w, h);
  if (c.width() < 1.0 || c.height() < 1.0) throw std::invalid_argument("empty crop");

  const double sy = c.height() / size;
  const double sx = c.width() / size;
  // Source sample positions in pixel-index space (pixel i is centered at i+0.5).
  std::vector<int> x0(size), x1(size);
  std::vector<float> fx(size);
  for (int ox = 0; ox < size; ++ox) {
    const double u = std::clamp(c.x1 + (ox + 0.5) * sx - 0.5, 0.0, double(w - 1));
    x0[ox] = static_cast<int>(std::floor(u));
    x1[ox] = std::min(x0[ox] + 1, w - 1);
    fx[ox] = static_cast<float>(u - x0[ox]);
  }
  Patch out(size, size);
  for (int oy = 0; oy < size; ++oy) {
    const double v = std::clamp(c.y1 + (oy + 0.5) * sy - 0.5, 0.0, double(h - 1));
    const int y0 = static_cast<int>(std::floor(v));
    const int y1 = std::min(y0 + 1, h - 1);
    const auto fy = static_cast<float>(v - y0);
    for (int ox = 0; ox < size; ++ox) {
      const float a = frame(y0, x0[ox]), b = frame(y0, x1[ox]);
      const float cc = frame(y1, x0[ox]), d = frame(y1, x1[ox]);
      const float top = a + fx[ox] * (b - a);
      const float bottom = cc + fx[ox] * (d - cc);
      out(oy, ox) = std::clamp(top + fy * (bottom - top), 0.0f, 1.0f);
    }
  }
  return out;
}

TripletBuild build_triplets(const VideoClip& clip, const DetectionSet& dets, const TripletConfig& cfg) {
  cfg.validate();
  TripletBuild result;
  const int n = clip.frame_count();
  std::vector<std::size_t> order(dets.detections.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets.detections[a].frame_index < dets.detections[b].frame_index;
  });
  for (std::size_t ref : order) {
    const auto& d = dets.detections[ref];
    const int t = d.frame_index;
    if (t - cfg.frame_gap < 0 || t + cfg.frame_gap > n - 1) {
      ++result.skipped_boundary;
      continue;
    }
    const BBox c = clamp_to_frame(d.bbox, clip.width(), clip.height());
    if (c.width() < cfg.min_box_side || c.height() < cfg.min_box_side) {
      ++result.skipped_small;
      continue;
    }
    AppearanceTriplet tr;
    tr.past = crop_resize(clip.frames[t - cfg.frame_gap].pixels, d.bbox, cfg.patch_size);
    tr.current = crop_resize(clip.frames[t].pixels, d.bbox, cfg.patch_size);
    tr.next = crop_resize(clip.frames[t + cfg.frame_gap].pixels, d.bbox, cfg.patch_size);
    tr.video_id = clip.id;
    tr.frame_index = t;
    tr.detection_ref = ref;
    result.triplets.push_back(std::move(tr));
  }
  return result;
}

namespace {

constexpr char kCacheMagic[8] = {'N', 'L', 'A', 'P', 'T', 'R', 'I', 'P'};
constexpr std::uint32_t kCacheVersion = 1;

}  // namespace

void save_triplet_cache(const std::vector<AppearanceTriplet>& triplets, int patch_size, const fs::path& path) {
  write_file_atomically(
      path,
      [&](std::ostream& out) {
        BinaryWriter w(out);
        w.put_bytes(kCacheMagic, sizeof(kCacheMagic));
        w.put(kCacheVersion);
        w.put(static_cast<std::uint32_t>(patch_size));
        for (const auto& t : triplets) {
          for (const Patch* p : {&t.past, &t.current, &t.next})
            if (p->rows() != patch_size || p->cols() != patch_size)
              throw std::invalid_argument("triplet cache: patch size mismatch");
          w.put_string(t.video_id);
          w.put(static_cast<std::int32_t>(t.frame_index));
          w.put(static_cast<std::int32_t>(t.detection_ref));
          for (const Patch* p : {&t.past, &t.current, &t.next}) w.put_array(p->data(), static_cast<std::size_t>(p->size()));
        }
      },
      true);
}

std::vector<AppearanceTriplet> load_triplet_cache(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open triplet cache " + path.string());
  BinaryReader r(in);
  char magic[8];
  r.get_bytes(magic, sizeof(magic));
  if (!std::equal(magic, magic + 8, kCacheMagic)) throw FormatError("not a triplet cache: " + path.string());
  if (r.get<std::uint32_t>() != kCacheVersion) throw FormatError("unsupported triplet cache version");
  const auto size = static_cast<int>(r.get<std::uint32_t>());
  if (size < 1 || size > 4096) throw FormatError("triplet cache: bad patch size");
  std::vector<AppearanceTriplet> out;
  while (!r.at_end()) {
    AppearanceTriplet t;
    t.video_id = r.get_string();
    t.frame_index = r.get<std::int32_t>();
    t.detection_ref = static_cast<std::size_t>(r.get<std::int32_t>());
    for (Patch* p : {&t.past, &t.current, &t.next}) {
      p->resize(size, size);
      r.get_array(p->data(), static_cast<std::size_t>(p->size()));
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace nlap
