#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mwr/errors.hpp"
#include "mwr/so3.hpp"

namespace mwr {

struct TimedRotation {
  double timestamp = 0.0;  // seconds
  Rotation r_cw;           // camera-to-world
};

/// Ordered rotation trajectory; timestamps strictly increasing.
using Trajectory = std::vector<TimedRotation>;

inline void check_trajectory(const Trajectory& traj) {
  for (size_t i = 1; i < traj.size(); ++i) {
    if (traj[i].timestamp <= traj[i - 1].timestamp) {
      throw input_error("trajectory timestamps must be strictly increasing");
    }
  }
}

/// Rotation error angle acos((tr(R_gt^-1 R_hat) - 1) / 2).
inline double are(const Rotation& r_gt, const Rotation& r_hat) {
  return geodesic_distance(r_gt, r_hat);
}

struct AlignmentResult {
  Rotation r_align;
  Rotation symmetry;  // cube-group element applied on the right
  std::vector<double> errors;  // radians, per associated frame
  std::vector<size_t> est_indices;  // associated frames in the estimate
  double mean = 0.0;
  double median = 0.0;
  size_t dropped = 0;  // frames without a timestamp match
};

namespace detail {

/// Projection of a 3x3 accumulation onto SO(3) (chordal L2 mean).
inline Rotation project_so3(const Eigen::Matrix3d& a) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return Rotation(r);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

/// Aligns an estimated trajectory to ground truth: nearest-neighbour
/// timestamp association, then an exhaustive search over the 24 cube
/// symmetries with a chordal-mean global rotation per candidate. The
/// (symmetry, alignment) pair minimising mean error wins.
inline AlignmentResult align(const Trajectory& est, const Trajectory& gt,
                             double assoc_window_s = 0.010) {
  check_trajectory(est);
  check_trajectory(gt);
  std::vector<std::pair<size_t, size_t>> pairs;  // (est idx, gt idx)
  size_t dropped = 0;
  for (size_t i = 0; i < est.size(); ++i) {
    // gt is sorted: binary search for the nearest timestamp.
    const double t = est[i].timestamp;
    const auto it = std::lower_bound(
        gt.begin(), gt.end(), t,
        [](const TimedRotation& a, double ts) { return a.timestamp < ts; });
    size_t best = gt.size();
    double best_dt = assoc_window_s;
    for (const auto cand : {it, it == gt.begin() ? it : std::prev(it)}) {
      if (cand == gt.end()) continue;
      const double dt = std::abs(cand->timestamp - t);
      if (dt <= best_dt) {
        best_dt = dt;
        best = static_cast<size_t>(cand - gt.begin());
      }
    }
    if (best == gt.size()) {
      ++dropped;
    } else {
      pairs.emplace_back(i, best);
    }
  }
  if (pairs.empty()) throw input_error("align: no overlapping timestamps");

  AlignmentResult best;
  best.mean = std::numeric_limits<double>::infinity();
  for (const Rotation& s : cube_group()) {
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (const auto& [ei, gi] : pairs) {
      acc += gt[gi].r_cw.matrix() *
             (est[ei].r_cw * s).matrix().transpose();
    }
    const Rotation r_align = detail::project_so3(acc);
    std::vector<double> errors;
    errors.reserve(pairs.size());
    double sum = 0.0;
    for (const auto& [ei, gi] : pairs) {
      const double e = are(gt[gi].r_cw, r_align * est[ei].r_cw * s);
      errors.push_back(e);
      sum += e;
    }
    const double mean = sum / errors.size();
    if (mean < best.mean) {
      best.r_align = r_align;
      best.symmetry = s;
      best.errors = std::move(errors);
      best.mean = mean;
    }
  }
  best.median = detail::median_of(best.errors);
  best.dropped = dropped;
  best.est_indices.reserve(pairs.size());
  for (const auto& [ei, gi] : pairs) best.est_indices.push_back(ei);
  return best;
}

/// Angle between the world up axis (+Z) expressed in each camera frame.
/// Invariant to yaw about the world up.
inline double up_vector_error(const Rotation& r_hat_cw,
                              const Rotation& r_gt_cw) {
  const Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d a = r_hat_cw.inverse() * up;
  const Eigen::Vector3d b = r_gt_cw.inverse() * up;
  // atan2 form stays accurate for near-parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

struct ErrorSummary {
  double mean = 0.0;
  double median = 0.0;
  double max = 0.0;
  size_t count = 0;
};

inline ErrorSummary summarize(const std::vector<double>& errors) {
  if (errors.empty()) throw input_error("summarize: no errors");
  ErrorSummary s;
  s.count = errors.size();
  double sum = 0.0;
  for (double e : errors) {
    sum += e;
    s.max = std::max(s.max, e);
  }
  s.mean = sum / errors.size();
  s.median = detail::median_of(errors);
  return s;
}

inline double to_deg(double rad) { return rad * 180.0 / M_PI; }
inline double to_rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace mwr
