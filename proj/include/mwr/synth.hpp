#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mwr/errors.hpp"
#include "mwr/normal_map.hpp"
#include "mwr/single_frame.hpp"
#include "mwr/so3.hpp"

namespace mwr {

/// Ground-truthed Manhattan scene generator. Fully determined by
/// (spec, seed, frame index); repeat invocations are bitwise identical.
struct SynthSpec {
  std::vector<ManhattanFrame> trajectory;  // ground truth, per frame
  std::array<double, 6> axis_weights = {1.0 / 6, 1.0 / 6, 1.0 / 6,
                                        1.0 / 6, 1.0 / 6, 1.0 / 6};
  double sigma_deg = 0.0;        // half-normal angular noise
  double outlier_fraction = 0.0; // uniform-on-sphere samples
  double outlier_kappa = 1.0;
  double inlier_kappa = 1.0;
  int samples_per_frame = 1000;
  double fps = 30.0;
  uint64_t seed = 0;

  void validate() const {
    double sum = 0.0;
    for (double w : axis_weights) {
      if (w < 0.0) throw input_error("synth: axis weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw input_error("synth: axis weights must sum to 1");
    }
    if (sigma_deg < 0.0) throw input_error("synth: sigma_deg must be >= 0");
    if (outlier_fraction < 0.0 || outlier_fraction > 1.0) {
      throw input_error("synth: outlier fraction must be in [0, 1]");
    }
    if (samples_per_frame < 1) throw input_error("synth: need >= 1 sample");
    if (fps <= 0.0) throw input_error("synth: fps must be > 0");
  }
};

namespace detail {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic uniform double in [0, 1) from a 64-bit engine.
inline double uniform01(std::mt19937_64& rng) {
  return (rng() >> 11) * 0x1.0p-53;
}

/// Box-Muller; avoids the library normal_distribution so that streams are
/// identical across standard library implementations.
inline double gaussian(std::mt19937_64& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

inline Eigen::Vector3d uniform_sphere(std::mt19937_64& rng) {
  const double z = 2.0 * uniform01(rng) - 1.0;
  const double phi = 2.0 * M_PI * uniform01(rng);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

/// Unit vector perpendicular to d, angle phi within the perpendicular plane.
inline Eigen::Vector3d perpendicular(const Eigen::Vector3d& d, double phi) {
  const Eigen::Vector3d ref =
      std::abs(d.x()) < 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitY();
  const Eigen::Vector3d u = d.cross(ref).normalized();
  const Eigen::Vector3d v = d.cross(u);
  return std::cos(phi) * u + std::sin(phi) * v;
}

}  // namespace detail

/// Random unit quaternion (uniform on SO(3)).
inline Rotation random_rotation(std::mt19937_64& rng) {
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) q[i] = detail::gaussian(rng);
  q.normalize();
  return Rotation(Eigen::Quaterniond(q[0], q[1], q[2], q[3]));
}

/// One synthetic frame: samples whose true directions are world axes
/// (chosen by the visibility weights) expressed in the camera via M_gt,
/// perturbed by a half-normal angle about a random perpendicular axis.
inline std::vector<NormalSample> synth_frame(const ManhattanFrame& gt,
                                             const SynthSpec& spec,
                                             int frame_index) {
  spec.validate();
  std::mt19937_64 rng(detail::splitmix64(
      spec.seed ^ detail::splitmix64(static_cast<uint64_t>(frame_index))));
  const Eigen::Matrix3d m = gt.matrix();
  const double sigma_rad = spec.sigma_deg * M_PI / 180.0;
  std::vector<NormalSample> out;
  out.reserve(spec.samples_per_frame);
  for (int i = 0; i < spec.samples_per_frame; ++i) {
    if (detail::uniform01(rng) < spec.outlier_fraction) {
      out.push_back({detail::uniform_sphere(rng), spec.outlier_kappa});
      continue;
    }
    // Pick a signed world axis by the visibility weights.
    double u = detail::uniform01(rng);
    int pick = 5;
    for (int a = 0; a < 6; ++a) {
      if (u < spec.axis_weights[a]) {
        pick = a;
        break;
      }
      u -= spec.axis_weights[a];
    }
    const double sign = pick % 2 == 0 ? 1.0 : -1.0;
    Eigen::Vector3d dir = sign * m.col(pick / 2);
    if (sigma_rad > 0.0) {
      const double angle = std::abs(detail::gaussian(rng)) * sigma_rad;
      const Eigen::Vector3d axis =
          detail::perpendicular(dir, 2.0 * M_PI * detail::uniform01(rng));
      dir = exp_map(angle * axis) * dir;
    }
    out.push_back({dir, spec.inlier_kappa});
  }
  return out;
}

/// Packs samples into a dense map (width 64, row-major); trailing pixels
/// stay invalid.
inline NormalMap samples_to_map(const std::vector<NormalSample>& samples,
                                int width = 64) {
  const int height =
      static_cast<int>((samples.size() + width - 1) / width);
  NormalMap map(width, std::max(height, 1));
  for (size_t i = 0; i < samples.size(); ++i) {
    map.set(static_cast<int>(i) % width, static_cast<int>(i) / width,
            samples[i].n, samples[i].kappa);
  }
  return map;
}

/// All frames of the spec's trajectory.
inline std::vector<std::vector<NormalSample>> synth_sequence(
    const SynthSpec& spec) {
  spec.validate();
  if (spec.trajectory.empty()) throw input_error("synth: no frames");
  std::vector<std::vector<NormalSample>> frames;
  frames.reserve(spec.trajectory.size());
  for (size_t t = 0; t < spec.trajectory.size(); ++t) {
    frames.push_back(
        synth_frame(spec.trajectory[t], spec, static_cast<int>(t)));
  }
  return frames;
}

}  // namespace mwr
