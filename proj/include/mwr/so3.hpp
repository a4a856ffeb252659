#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <vector>

namespace mwr {

/// Rotation on SO(3), stored as a unit quaternion (Hamilton convention).
/// The quaternion is renormalised after every composition so that long
/// products stay orthonormal. All operations are value-semantic.
class Rotation {
 public:
  Rotation() : q_(Eigen::Quaterniond::Identity()) {}

  explicit Rotation(const Eigen::Quaterniond& q) : q_(q.normalized()) {}

  explicit Rotation(const Eigen::Matrix3d& m) : q_(Eigen::Quaterniond(m).normalized()) {}

  static Rotation identity() { return Rotation(); }

  const Eigen::Quaterniond& quaternion() const { return q_; }

  Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }

  Rotation inverse() const { return Rotation(q_.conjugate()); }

  Rotation operator*(const Rotation& other) const {
    return Rotation(q_ * other.q_);
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return q_ * v; }

  bool isApprox(const Rotation& other, double tol = 1e-9) const {
    // q and -q are the same rotation.
    return q_.coeffs().isApprox(other.q_.coeffs(), tol) ||
           q_.coeffs().isApprox(-other.q_.coeffs(), tol);
  }

 private:
  Eigen::Quaterniond q_;
};

// Below this angle exp/log and the Jacobians switch to truncated series.
inline constexpr double kSmallAngle = 1e-8;

inline Eigen::Matrix3d hat(const Eigen::Vector3d& w) {
  Eigen::Matrix3d m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

/// Exponential map: axis-angle vector (radians) to Rotation.
inline Rotation exp_map(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  Eigen::Quaterniond q;
  if (angle < kSmallAngle) {
    // sin(a/2)/a ~ 1/2 - a^2/48
    const double s = 0.5 - angle * angle / 48.0;
    q = Eigen::Quaterniond(1.0, s * omega.x(), s * omega.y(), s * omega.z());
  } else {
    const double half = 0.5 * angle;
    const double s = std::sin(half) / angle;
    q = Eigen::Quaterniond(std::cos(half), s * omega.x(), s * omega.y(), s * omega.z());
  }
  return Rotation(q);
}

/// Logarithm map: minimal axis-angle vector. At angle pi the sign of the
/// axis follows the quaternion vector part with the scalar part taken
/// non-negative, so log(rot(pi, z)) = (0, 0, pi).
inline Eigen::Vector3d log_map(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const Eigen::Vector3d v = q.vec();
  const double vn = v.norm();
  if (vn < kSmallAngle) {
    // angle/sin(angle/2) ~ 2 + vn^2/3 around identity
    return v * (2.0 + vn * vn / 3.0);
  }
  const double angle = 2.0 * std::atan2(vn, q.w());
  return v * (angle / vn);
}

/// Log(Ra^-1 * Rb): tangent that takes Ra to Rb. The a (-) b increment of
/// the factor-graph residuals is between(b, a).
inline Eigen::Vector3d between(const Rotation& ra, const Rotation& rb) {
  return log_map(ra.inverse() * rb);
}

/// Geodesic angle acos((tr(Ra^-1 Rb) - 1) / 2), radians in [0, pi].
inline double geodesic_distance(const Rotation& ra, const Rotation& rb) {
  const double tr = (ra.inverse() * rb).matrix().trace();
  const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

/// Inverse of the right Jacobian of SO(3):
/// Log(Exp(w) Exp(d)) ~ w + right_jacobian_inv(w) * d to first order.
/// Requires |w| < pi.
inline Eigen::Matrix3d right_jacobian_inv(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  const Eigen::Matrix3d W = hat(omega);
  if (angle < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + 0.5 * W + W * W / 12.0;
  }
  const double a2 = angle * angle;
  const double coeff =
      1.0 / a2 - (1.0 + std::cos(angle)) / (2.0 * angle * std::sin(angle));
  return Eigen::Matrix3d::Identity() + 0.5 * W + coeff * W * W;
}

/// The 24 orientation-preserving symmetries of the cube: all signed
/// permutation matrices with determinant +1. Order is deterministic.
inline const std::vector<Rotation>& cube_group() {
  static const std::vector<Rotation> group = [] {
    std::vector<Rotation> out;
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                             {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& p : perms) {
      for (int signs = 0; signs < 8; ++signs) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        for (int col = 0; col < 3; ++col) {
          m(p[col], col) = (signs >> col) & 1 ? -1.0 : 1.0;
        }
        if (m.determinant() > 0.5) out.emplace_back(m);
      }
    }
    return out;
  }();
  return group;
}

}  // namespace mwr
