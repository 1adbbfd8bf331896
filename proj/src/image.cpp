#include "pstx/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace pstx {

namespace {
int level_of(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }
}  // namespace

Image::Image(int height, int width, int channels, double fill) {
  planes.assign(channels, Plane::Constant(height, width, fill));
}

bool Image::operator==(const Image& other) const {
  if (!same_dims(other)) return false;
  for (int c = 0; c < channels(); ++c)
    if (planes[c] != other.planes[c]) return false;
  return true;
}

std::vector<int> to_levels(const Image& img) {
  std::vector<int> out;
  out.reserve(img.size());
  for (const auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) out.push_back(level_of(p.data()[i]));
  return out;
}

Image from_levels(std::span<const int> levels, int height, int width, int channels) {
  if (static_cast<long long>(levels.size()) != static_cast<long long>(height) * width * channels) {
    throw ImageError("level buffer size does not match image dimensions");
  }
  Image img(height, width, channels);
  size_t k = 0;
  for (auto& p : img.planes)
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = levels[k++] / 255.0;
  return img;
}

Image quantize_levels(const Image& img) {
  auto lv = to_levels(img);
  return from_levels(lv, img.height(), img.width(), img.channels());
}

Tensor to_tensor(const Image& img) { return to_tensor(std::span<const Image>(&img, 1)); }

Tensor to_tensor(std::span<const Image> images) {
  if (images.empty()) throw DimensionError("to_tensor: empty image batch");
  const auto& first = images.front();
  const Eigen::Index per = first.size();
  Eigen::VectorXd v(per * static_cast<Eigen::Index>(images.size()));
  Eigen::Index k = 0;
  for (const auto& img : images) {
    if (!img.same_dims(first)) throw DimensionError("to_tensor: images in a batch must share dimensions");
    for (const auto& p : img.planes) {
      v.segment(k, p.size()) = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
      k += p.size();
    }
  }
  return Tensor::from({static_cast<int>(images.size()), first.channels(), first.height(), first.width()}, std::move(v));
}

Image to_image(const Tensor& t, int index) {
  if (t.rank() != 4) throw DimensionError("to_image: tensor must be [B,C,H,W], got " + shape_string(t.shape()));
  if (index < 0 || index >= t.dim(0)) throw DimensionError("to_image: batch index out of range (axis 0)");
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  Image img(h, w, c);
  const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    Eigen::Map<Eigen::VectorXd>(img.planes[ci].data(), plane) =
        t.value().segment((static_cast<Eigen::Index>(index) * c + ci) * plane, plane);
  }
  return img;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw ImageError("PPM: malformed header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw ImageError("PPM: header value too large");
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw ImageError("PPM: expected P6 or P5 magic");
  }
  const int channels = bytes[1] == '6' ? 3 : 1;
  pos = 2;
  const int width = read_int();
  const int height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw ImageError("PPM: only maxval 255 is supported");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ImageError("PPM: missing header terminator");
  ++pos;
  const size_t count = static_cast<size_t>(width) * height * channels;
  if (bytes.size() - pos < count) throw ImageError("PPM: truncated pixel data");
  Image img(height, width, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) img.planes[c](y, x) = bytes[pos++] / 255.0;
  return img;
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  if (img.channels() != 3 && img.channels() != 1) throw ImageError("PPM: only 1 or 3 channels can be written");
  const std::string header = std::string(img.channels() == 3 ? "P6" : "P5") + "\n" + std::to_string(img.width()) +
                             " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.push_back(static_cast<std::uint8_t>(level_of(img.planes[c](y, x))));
  return out;
}

Image read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_ppm(bytes);
}

void write_ppm(const std::string& path, const Image& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<Image> procedural_corpus(int count, int size, std::uint64_t seed, int channels) {
  std::vector<Image> out;
  out.reserve(count);
  for (int idx = 0; idx < count; ++idx) {
    CounterRng rng(seed, static_cast<std::uint64_t>(idx));
    Image img(size, size, channels);
    auto color = [&] {
      std::vector<double> c(channels);
      for (auto& v : c) v = rng.uniform(0.05, 0.95);
      return c;
    };
    const auto a = color();
    const auto b = color();
    const int kind = idx % 4;
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int cell = 2 + static_cast<int>(rng.below(5));
    const int blobs = 1 + static_cast<int>(rng.below(3));
    std::vector<std::array<double, 3>> centers;
    std::vector<std::vector<double>> blob_colors;
    for (int k = 0; k < blobs; ++k) {
      centers.push_back({rng.uniform(0.0, size), rng.uniform(0.0, size), rng.uniform(size / 8.0, size / 3.0)});
      blob_colors.push_back(color());
    }
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double u = ((x - size / 2.0) * std::cos(theta) + (y - size / 2.0) * std::sin(theta)) / size + 0.5;
        const double t = std::clamp(u, 0.0, 1.0);
        const bool check = ((x / cell) + (y / cell)) % 2 == 0;
        for (int c = 0; c < channels; ++c) {
          double v = 0;
          switch (kind) {
            case 0:
              v = a[c] * (1 - t) + b[c] * t;
              break;
            case 1:
              v = check ? a[c] : b[c];
              break;
            default: {
              v = kind == 2 ? 0.5 * (a[c] + b[c]) : a[c] * (1 - t) + b[c] * t;
              for (int k = 0; k < blobs; ++k) {
                const double dx = x - centers[k][0], dy = y - centers[k][1];
                const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * centers[k][2] * centers[k][2]));
                v = v * (1 - wgt) + blob_colors[k][c] * wgt;
              }
              if (kind == 3 && check) v = 0.85 * v + 0.15 * b[c];
            }
          }
          img.planes[c](y, x) = v;
        }
      }
    }
    out.push_back(quantize_levels(img));
  }
  return out;
}

Image natural_test_image(int height, int width, int channels) {
  Image img(height, width, channels);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double fx = static_cast<double>(x) / width, fy = static_cast<double>(y) / height;
        double v = 0.45 + 0.25 * std::sin(2.0 * std::numbers::pi * (fx * 1.3 + 0.2 * c)) * std::cos(std::numbers::pi * fy * 1.7);
        const double dx = fx - 0.62, dy = fy - 0.38;
        v += 0.3 * std::exp(-(dx * dx + dy * dy) / 0.02);
        if (fx > 0.15 && fx < 0.4 && fy > 0.55 && fy < 0.85) v -= 0.25;
        v += 0.06 * std::sin(0.9 * x + 0.4 * y + c) * std::sin(0.7 * y - 0.3 * x);
        img.planes[c](y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return quantize_levels(img);
}

}  // namespace pstx
