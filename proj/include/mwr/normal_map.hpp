#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mwr/errors.hpp"
#include "mwr/png_io.hpp"

namespace mwr {

inline constexpr double kKappaCap = 100.0;

/// One weighted surface normal: unit direction in the camera frame
/// (x right, y down, z forward) and confidence kappa >= 0.
struct NormalSample {
  Eigen::Vector3d n;
  double kappa = 1.0;
};

/// Dense per-pixel normal + confidence map. Pixels with zero or non-finite
/// normals are marked invalid and never enter the optimisation.
class NormalMap {
 public:
  NormalMap() = default;
  NormalMap(int width, int height)
      : width_(width),
        height_(height),
        normals_(static_cast<size_t>(width) * height, Eigen::Vector3d::Zero()),
        kappa_(static_cast<size_t>(width) * height, 1.0),
        valid_(static_cast<size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return normals_.size(); }

  bool valid(int x, int y) const { return valid_[idx(x, y)] != 0; }
  const Eigen::Vector3d& normal(int x, int y) const { return normals_[idx(x, y)]; }
  double kappa(int x, int y) const { return kappa_[idx(x, y)]; }

  /// Stores a pixel; renormalises the direction and caps kappa. Zero or
  /// non-finite normals leave the pixel invalid.
  void set(int x, int y, const Eigen::Vector3d& n, double kappa) {
    const size_t i = idx(x, y);
    const double len = n.norm();
    if (!std::isfinite(len) || len < 1e-12 || !std::isfinite(kappa)) {
      valid_[i] = 0;
      normals_[i].setZero();
      kappa_[i] = 0.0;
      return;
    }
    normals_[i] = n / len;
    kappa_[i] = std::clamp(kappa, 0.0, kKappaCap);
    valid_[i] = 1;
  }

 private:
  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width_ + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<Eigen::Vector3d> normals_;
  std::vector<double> kappa_;
  std::vector<uint8_t> valid_;
};

namespace detail {

inline void read_exact(std::istream& in, void* dst, size_t n, size_t offset,
                       const std::string& path) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) {
    throw io_error(path + ": truncated file at byte offset " +
                   std::to_string(offset));
  }
}

template <typename T>
T read_le(std::istream& in, size_t& offset, const std::string& path) {
  T v;
  read_exact(in, &v, sizeof(T), offset, path);
  offset += sizeof(T);
  return v;  // little-endian host assumed
}

}  // namespace detail

/// NMAP binary layout: "NMAP", u16 version (=1), u16 flags (bit 0: kappa
/// plane present), u32 width, u32 height, then w*h*3 f32 normals row-major
/// (x, y, z interleaved), then w*h f32 kappa if flagged. All little-endian.
inline NormalMap load_nmap(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path + ": cannot open");
  size_t offset = 0;
  char magic[4];
  detail::read_exact(in, magic, 4, offset, path);
  offset += 4;
  if (std::memcmp(magic, "NMAP", 4) != 0) {
    throw io_error(path + ": bad magic at byte offset 0");
  }
  const auto version = detail::read_le<uint16_t>(in, offset, path);
  if (version != 1) {
    throw io_error(path + ": unsupported version " + std::to_string(version) +
                   " at byte offset 4");
  }
  const auto flags = detail::read_le<uint16_t>(in, offset, path);
  const auto width = detail::read_le<uint32_t>(in, offset, path);
  const auto height = detail::read_le<uint32_t>(in, offset, path);
  if (width == 0 || height == 0 || width > 1u << 20 || height > 1u << 20) {
    throw io_error(path + ": implausible dimensions at byte offset 8");
  }
  const size_t count = static_cast<size_t>(width) * height;
  std::vector<float> normals(count * 3);
  detail::read_exact(in, normals.data(), normals.size() * sizeof(float), offset,
                     path);
  offset += normals.size() * sizeof(float);
  std::vector<float> kappa(count, 1.0f);
  if (flags & 1u) {
    detail::read_exact(in, kappa.data(), kappa.size() * sizeof(float), offset,
                       path);
    offset += kappa.size() * sizeof(float);
  }
  NormalMap map(static_cast<int>(width), static_cast<int>(height));
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const size_t i = (static_cast<size_t>(y) * width + x) * 3;
      map.set(x, y,
              Eigen::Vector3d(normals[i], normals[i + 1], normals[i + 2]),
              kappa[static_cast<size_t>(y) * width + x]);
    }
  }
  return map;
}

inline void write_nmap(const NormalMap& map, const std::string& path,
                       bool with_kappa = true) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path + ": cannot open for writing");
  out.write("NMAP", 4);
  const uint16_t version = 1;
  const uint16_t flags = with_kappa ? 1 : 0;
  const uint32_t w = static_cast<uint32_t>(map.width());
  const uint32_t h = static_cast<uint32_t>(map.height());
  out.write(reinterpret_cast<const char*>(&version), 2);
  out.write(reinterpret_cast<const char*>(&flags), 2);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      // Invalid pixels round-trip as zero normals.
      const Eigen::Vector3d n =
          map.valid(x, y) ? map.normal(x, y) : Eigen::Vector3d::Zero();
      const float v[3] = {static_cast<float>(n.x()), static_cast<float>(n.y()),
                          static_cast<float>(n.z())};
      out.write(reinterpret_cast<const char*>(v), sizeof(v));
    }
  }
  if (with_kappa) {
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        const float k = static_cast<float>(map.valid(x, y) ? map.kappa(x, y) : 0.0);
        out.write(reinterpret_cast<const char*>(&k), sizeof(k));
      }
    }
  }
  if (!out) throw io_error(path + ": write failed");
}

/// 8-bit RGB PNG with n = 2c/255 - 1, renormalised. An optional grayscale
/// PNG supplies kappa = 100 * v / 255; absent, kappa is 1 everywhere.
inline NormalMap load_png_normals(const std::string& path,
                                  const std::string& kappa_path = "") {
  const PngImage img = read_png(path);
  if (img.channels < 3) {
    throw io_error(path + ": normals PNG must be RGB");
  }
  PngImage kimg;
  if (!kappa_path.empty()) {
    kimg = read_png(kappa_path);
    if (kimg.width != img.width || kimg.height != img.height) {
      throw io_error(kappa_path + ": kappa PNG size mismatch");
    }
  }
  NormalMap map(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const size_t i =
          (static_cast<size_t>(y) * img.width + x) * img.channels;
      const Eigen::Vector3d n(2.0 * img.pixels[i] / 255.0 - 1.0,
                              2.0 * img.pixels[i + 1] / 255.0 - 1.0,
                              2.0 * img.pixels[i + 2] / 255.0 - 1.0);
      double kappa = 1.0;
      if (!kimg.pixels.empty()) {
        const size_t ki =
            (static_cast<size_t>(y) * kimg.width + x) * kimg.channels;
        kappa = 100.0 * kimg.pixels[ki] / 255.0;
      }
      map.set(x, y, n, kappa);
    }
  }
  return map;
}

/// Loads a map by extension: ".nmap" binary or ".png".
inline NormalMap load_normal_map(const std::string& path,
                                 const std::string& kappa_path = "") {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".nmap") return load_nmap(path);
  if (ext == ".png") return load_png_normals(path, kappa_path);
  throw io_error(path + ": unknown normal map format '" + ext + "'");
}

/// Row-major strided subsampling; invalid pixels are skipped. Deterministic.
inline std::vector<NormalSample> sample(const NormalMap& map, int stride) {
  if (stride < 1) throw input_error("sample: stride must be >= 1");
  std::vector<NormalSample> out;
  for (int y = 0; y < map.height(); y += stride) {
    for (int x = 0; x < map.width(); x += stride) {
      if (!map.valid(x, y)) continue;
      out.push_back({map.normal(x, y), map.kappa(x, y)});
    }
  }
  return out;
}

/// Stride such that a full-resolution map yields at most max_samples.
inline int auto_stride(const NormalMap& map, int max_samples = 8192) {
  int stride = 1;
  while ((map.width() / stride + 1) * (map.height() / stride + 1) >
         max_samples) {
    ++stride;
  }
  return stride;
}

}  // namespace mwr
