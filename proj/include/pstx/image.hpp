#pragma once

#include "pstx/rng.hpp"
#include "pstx/tensor.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pstx {

using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x C image, one plane per channel, values in [0,1].
struct Image {
  std::vector<Plane> planes;

  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const { return planes.empty() ? 0 : static_cast<int>(planes.front().rows()); }
  int width() const { return planes.empty() ? 0 : static_cast<int>(planes.front().cols()); }
  int channels() const { return static_cast<int>(planes.size()); }
  long long size() const { return static_cast<long long>(height()) * width() * channels(); }
  bool same_dims(const Image& other) const {
    return height() == other.height() && width() == other.width() && channels() == other.channels();
  }
  bool operator==(const Image& other) const;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 8-bit levels, planar order (c, y, x); level = round(clamp(v,0,1) * 255).
std::vector<int> to_levels(const Image& img);
Image from_levels(std::span<const int> levels, int height, int width, int channels);
/// Snaps every pixel to the nearest level/255.
Image quantize_levels(const Image& img);

/// [1,C,H,W] tensor (no gradient).
Tensor to_tensor(const Image& img);
/// Stacks same-sized images into [B,C,H,W].
Tensor to_tensor(std::span<const Image> images);
Image to_image(const Tensor& t, int index = 0);

/// Binary PPM (P6, 3 channels) or PGM (P5, 1 channel), maxval 255.
Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);
Image decode_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_ppm(const Image& img);

/// Procedural desk-scale corpus: gradients, checkerboards, Gaussian blobs and
/// mixtures of those, already snapped to 8-bit levels.
std::vector<Image> procedural_corpus(int count, int size, std::uint64_t seed, int channels = 3);

/// Deterministic image with smooth regions, edges and texture, used as the
/// fixed "natural" test image.
Image natural_test_image(int height, int width, int channels = 3);

}  // namespace pstx
