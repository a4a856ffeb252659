#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "mwr/errors.hpp"
#include "mwr/normal_map.hpp"
#include "mwr/so3.hpp"

namespace mwr {

/// Rotation whose columns are the world principal axes expressed in camera
/// coordinates; world vectors map to camera via v_c = M v_w. The
/// camera-to-world rotation is M^T. Any cube-group right multiple is an
/// equivalent frame.
using ManhattanFrame = Rotation;

struct LMConfig {
  double mu0 = 1e-3;
  double mu_up = 10.0;
  double mu_down = 0.1;
  int max_iterations = 50;
  double step_tol = 1e-8;       // rad
  double cost_tol = 1e-10;      // relative cost change
};

struct FrameEstimate {
  ManhattanFrame frame;
  Eigen::Matrix3d information = Eigen::Matrix3d::Zero();  // J^T J at frame
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Residual of one (sample, axis) pair: sqrt(kappa) * (n . m_j) * (m_j x n).
/// Its squared norm is kappa sin^2 cos^2 of the angle between n and the
/// axis, so the total cost matches the per-axis kernel summed over the
/// three axes: f^T f = sum_i kappa_i (1 - sum_j c_ij^4).
inline Eigen::Vector3d axis_residual(const Eigen::Vector3d& axis,
                                     const NormalSample& s) {
  const double c = s.n.dot(axis);
  return std::sqrt(s.kappa) * c * axis.cross(s.n);
}

/// Jacobian of axis_residual with respect to the left increment
/// M <- exp(d) M:  sqrt(kappa) * [ (m x n)(m x n)^T + c m n^T - c^2 I ].
inline Eigen::Matrix3d axis_jacobian(const Eigen::Vector3d& axis,
                                     const NormalSample& s) {
  const double c = s.n.dot(axis);
  const Eigen::Vector3d cr = axis.cross(s.n);
  return std::sqrt(s.kappa) *
         (cr * cr.transpose() + c * axis * s.n.transpose() -
          c * c * Eigen::Matrix3d::Identity());
}

/// Stacked residuals, three 3-vectors (one per principal axis) per sample.
inline std::vector<Eigen::Vector3d> residuals(
    const ManhattanFrame& frame, const std::vector<NormalSample>& samples) {
  if (samples.empty()) throw input_error("residuals: no usable normals");
  const Eigen::Matrix3d m = frame.matrix();
  std::vector<Eigen::Vector3d> out;
  out.reserve(samples.size() * 3);
  for (const auto& s : samples) {
    for (int j = 0; j < 3; ++j) {
      out.push_back(axis_residual(m.col(j), s));
    }
  }
  return out;
}

inline double cost(const ManhattanFrame& frame,
                   const std::vector<NormalSample>& samples) {
  const Eigen::Matrix3d m = frame.matrix();
  double total = 0.0;
  for (const auto& s : samples) {
    const NormalSample unit{s.n, 1.0};
    for (int j = 0; j < 3; ++j) {
      total += s.kappa * axis_residual(m.col(j), unit).squaredNorm();
    }
  }
  return total;
}

struct NormalEquations {
  Eigen::Matrix3d information = Eigen::Matrix3d::Zero();  // J^T J
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();     // J^T f
  double cost = 0.0;
};

/// Streaming J^T J / J^T f accumulation in fixed sample order; J is never
/// materialised. Bitwise reproducible for identical inputs.
inline NormalEquations accumulate_normal_equations(
    const ManhattanFrame& frame, const std::vector<NormalSample>& samples) {
  if (samples.empty()) {
    throw input_error("accumulate_normal_equations: no usable normals");
  }
  const Eigen::Matrix3d m = frame.matrix();
  NormalEquations eq;
  for (const auto& s : samples) {
    // kappa enters as a plain weight here, so scaling every kappa scales
    // Lambda and g exactly.
    const NormalSample unit{s.n, 1.0};
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d f = axis_residual(m.col(j), unit);
      const Eigen::Matrix3d J = axis_jacobian(m.col(j), unit);
      eq.information.noalias() += s.kappa * (J.transpose() * J);
      eq.gradient.noalias() += s.kappa * (J.transpose() * f);
      eq.cost += s.kappa * f.squaredNorm();
    }
  }
  return eq;
}

/// Levenberg-Marquardt over the left increment M <- exp(d) M. Accepted
/// costs are non-increasing; the returned information matrix is J^T J at
/// the final frame, undamped.
inline FrameEstimate optimize(const std::vector<NormalSample>& samples,
                              const ManhattanFrame& init,
                              const LMConfig& cfg = {}) {
  if (samples.empty()) throw input_error("optimize: no usable normals");
  ManhattanFrame frame = init;
  NormalEquations eq = accumulate_normal_equations(frame, samples);
  if (!std::isfinite(eq.cost)) {
    throw numeric_error("optimize: non-finite cost at initialisation");
  }
  double mu = cfg.mu0;
  FrameEstimate est;
  est.converged = false;
  int it = 0;
  for (; it < cfg.max_iterations; ++it) {
    Eigen::Matrix3d damped = eq.information;
    // Floor keeps the damped system solvable along flat directions.
    damped.diagonal() += mu * (eq.information.diagonal().array() + 1e-12).matrix();
    const Eigen::Vector3d step = damped.ldlt().solve(-eq.gradient);
    if (!step.allFinite()) {
      throw numeric_error("optimize: non-finite step");
    }
    if (step.norm() < cfg.step_tol) {
      est.converged = true;
      break;
    }
    const ManhattanFrame candidate = exp_map(step) * frame;
    const double new_cost = cost(candidate, samples);
    if (!std::isfinite(new_cost)) {
      throw numeric_error("optimize: non-finite cost");
    }
    if (new_cost < eq.cost) {
      const double rel_change = (eq.cost - new_cost) / std::max(eq.cost, 1e-300);
      frame = candidate;
      eq = accumulate_normal_equations(frame, samples);
      mu = std::max(mu * cfg.mu_down, 1e-12);
      if (rel_change < cfg.cost_tol) {
        est.converged = true;
        ++it;
        break;
      }
    } else {
      mu *= cfg.mu_up;
      if (mu > 1e12) {
        // No improving step at any damping scale; converged if the
        // gradient has also vanished, stalled otherwise.
        est.converged = eq.gradient.norm() < 1e-9 * std::max(1.0, eq.cost);
        break;
      }
    }
  }
  est.frame = frame;
  est.information = eq.information;
  est.cost = eq.cost;
  est.iterations = it;
  return est;
}

/// Variance ceiling reported along directions with (near-)zero information.
inline constexpr double kVarianceCeiling = 1e12;

/// Inverts the information matrix by eigendecomposition. Eigenvalues below
/// 1e-9 map to the variance ceiling instead of blowing up.
inline Eigen::Matrix3d covariance(const Eigen::Matrix3d& information) {
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(information);
  Eigen::Vector3d inv;
  for (int i = 0; i < 3; ++i) {
    const double lambda = eig.eigenvalues()[i];
    inv[i] = lambda < 1e-9 ? kVarianceCeiling : 1.0 / lambda;
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace mwr
