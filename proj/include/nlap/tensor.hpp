#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <stdexcept>
#include <vector>

namespace nlap {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Single-channel image, row-major, intensities in [0,1].
template <typename Scalar>
using Image = Matrix<Scalar>;

using Patch = Image<float>;

/// Batched feature maps stored channel-major: row c holds every sample's
/// c-th plane back to back, i.e. element (c, (n*H + y)*W + x).
/// This is the layout a convolution GEMM produces, so layers chain without
/// transposes and channel concatenation is a vertical stack.
template <typename Scalar>
struct Tensor {
  int channels = 0;
  int batch = 0;
  int height = 0;
  int width = 0;
  Matrix<Scalar> data;

  Tensor() = default;
  Tensor(int c, int n, int h, int w)
      : channels(c), batch(n), height(h), width(w), data(Matrix<Scalar>::Zero(c, n * h * w)) {}

  int plane() const { return height * width; }

  Scalar& at(int c, int n, int y, int x) { return data(c, (n * height + y) * width + x); }
  Scalar at(int c, int n, int y, int x) const { return data(c, (n * height + y) * width + x); }

  bool same_shape(const Tensor& o) const {
    return channels == o.channels && batch == o.batch && height == o.height && width == o.width;
  }

  /// View of one sample of one channel as an H x W image.
  Eigen::Map<const Matrix<Scalar>> image(int n, int c = 0) const {
    return Eigen::Map<const Matrix<Scalar>>(data.row(c).data() + n * plane(), height, width);
  }
  Eigen::Map<Matrix<Scalar>> image(int n, int c = 0) {
    return Eigen::Map<Matrix<Scalar>>(data.row(c).data() + n * plane(), height, width);
  }
};

/// Packs single-channel images of identical shape into a 1-channel batch.
template <typename Scalar, typename ImageRange>
Tensor<Scalar> stack_images(const ImageRange& images) {
  const auto count = static_cast<int>(std::size(images));
  if (count == 0) throw std::invalid_argument("stack_images: empty batch");
  const auto& first = *std::begin(images);
  Tensor<Scalar> t(1, count, static_cast<int>(first.rows()), static_cast<int>(first.cols()));
  int n = 0;
  for (const auto& img : images) {
    if (img.rows() != t.height || img.cols() != t.width)
      throw std::invalid_argument("stack_images: shape mismatch");
    t.image(n++) = img.template cast<Scalar>();
  }
  return t;
}

/// Vertical (channel) concatenation.
template <typename Scalar>
Tensor<Scalar> concat_channels(const std::vector<const Tensor<Scalar>*>& parts) {
  assert(!parts.empty());
  const auto& ref = *parts.front();
  int total = 0;
  for (const auto* p : parts) {
    if (p->batch != ref.batch || p->height != ref.height || p->width != ref.width)
      throw std::invalid_argument("concat_channels: spatial mismatch");
    total += p->channels;
  }
  Tensor<Scalar> out(total, ref.batch, ref.height, ref.width);
  int row = 0;
  for (const auto* p : parts) {
    out.data.middleRows(row, p->channels) = p->data;
    row += p->channels;
  }
  return out;
}

}  // namespace nlap
