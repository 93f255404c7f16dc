#pragma once

#include "nlap/rng.hpp"
#include "nlap/synthbench.hpp"
#include "nlap/tensor.hpp"
#include "nlap/triplet.hpp"

#include <filesystem>
#include <string>

namespace nlap::test {

template <typename Scalar = double>
Matrix<Scalar> random_matrix(Rng& rng, int rows, int cols, double lo = 0.0, double hi = 1.0) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  return m;
}

/// A few frames of a small synthetic scene, cut into triplets of side `size`.
inline std::vector<AppearanceTriplet> scene_triplets(int size, int frames = 10, std::uint64_t seed = 3) {
  SceneSpec scene;
  scene.height = scene.width = 64;
  scene.sprite_count = 2;
  scene.frames_per_video = frames;
  const auto v = generate_normal(scene, seed, "scene");
  TripletConfig tc;
  tc.patch_size = size;
  return build_triplets(v.clip, v.detections, tc).triplets;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("nlap_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace nlap::test
