#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <optional>
#include <vector>

#include "mwr/errors.hpp"
#include "mwr/so3.hpp"

namespace mwr {

/// IRLS weight of the Huber loss on the whitened residual norm:
/// 1 inside the quadratic region, delta/r beyond it.
inline double huber_weight(double r_norm, double delta) {
  if (r_norm <= delta) return 1.0;
  return delta / r_norm;
}

/// Huber objective value; quadratic for r <= delta, linear tail beyond.
inline double huber_energy(double r_norm, double delta) {
  if (r_norm <= delta) return 0.5 * r_norm * r_norm;
  return delta * (r_norm - 0.5 * delta);
}

/// Single-frame estimate entering the graph as an information-form prior.
struct MeasurementFactor {
  Rotation z;
  Eigen::Matrix3d info = Eigen::Matrix3d::Zero();  // Lambda^z, PSD
  bool robust = true;
};

/// Gaussian prior left behind by marginalising the oldest variable.
struct MarginalPrior {
  Rotation anchor;
  Eigen::Matrix3d info = Eigen::Matrix3d::Zero();  // Lambda^p, PSD
};

struct SolveStats {
  int iterations = 0;
  bool regularized = false;  // normal equations needed a diagonal bump
};

/// Sliding window of rotation variables x_{t-n}..x_t with one measurement
/// factor per variable, an isotropic smoothness factor between adjacent
/// pairs, and at most one marginal prior on the oldest variable.
///
/// Tangent convention throughout: a (-) b = Log(b^-1 a) (right/local
/// tangent of b); updates are R <- R * exp(d). Measurement information
/// must already be expressed in this tangent.
class WindowGraph {
 public:
  WindowGraph(double smoothness_lambda, double huber_delta)
      : lambda_(smoothness_lambda), delta_(huber_delta) {
    if (lambda_ <= 0.0) throw input_error("smoothness lambda must be > 0");
    if (delta_ <= 0.0) throw input_error("huber delta must be > 0");
  }

  size_t size() const { return estimates_.size(); }
  const Rotation& estimate(size_t i) const { return estimates_[i]; }
  const Rotation& latest() const { return estimates_.back(); }
  const MeasurementFactor& measurement(size_t i) const { return factors_[i]; }
  const std::optional<MarginalPrior>& prior() const { return prior_; }
  double smoothness_lambda() const { return lambda_; }
  double huber_delta() const { return delta_; }

  /// Appends a variable, initialised at the previous latest estimate (or at
  /// the measurement itself for the first variable).
  void push(const MeasurementFactor& f) {
    estimates_.push_back(estimates_.empty() ? f.z : estimates_.back());
    factors_.push_back(f);
  }

  void set_prior(const MarginalPrior& p) { prior_ = p; }

  void set_estimate(size_t i, const Rotation& r) { estimates_[i] = r; }

  /// Total graph objective with Huber on measurement factors.
  double objective() const {
    double total = 0.0;
    const Eigen::Matrix3d info_s =
        Eigen::Matrix3d::Identity() / lambda_;
    for (size_t i = 0; i < estimates_.size(); ++i) {
      const Eigen::Vector3d e = between(factors_[i].z, estimates_[i]);
      const double r = std::sqrt(e.dot(factors_[i].info * e));
      total += factors_[i].robust ? huber_energy(r, delta_) : 0.5 * r * r;
      if (i + 1 < estimates_.size()) {
        const Eigen::Vector3d es = between(estimates_[i], estimates_[i + 1]);
        total += 0.5 * es.dot(info_s * es);
      }
    }
    if (prior_) {
      const Eigen::Vector3d ep = between(prior_->anchor, estimates_.front());
      total += 0.5 * ep.dot(prior_->info * ep);
    }
    return total;
  }

  /// Gauss-Newton with IRLS Huber scaling and backtracking step
  /// acceptance; the objective is non-increasing across accepted steps.
  SolveStats solve(int max_iterations = 10, double step_tol = 1e-8) {
    SolveStats stats;
    if (estimates_.empty()) return stats;
    const int n = static_cast<int>(estimates_.size());
    double obj = objective();
    for (int it = 0; it < max_iterations; ++it) {
      Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3 * n, 3 * n);
      Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * n);
      accumulate(H, b);
      Eigen::VectorXd step = solve_normal_equations(H, b, stats);
      ++stats.iterations;
      if (step.norm() < step_tol) break;
      // Backtrack until the robust objective does not increase.
      std::deque<Rotation> saved = estimates_;
      double scale = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 8; ++bt) {
        for (int i = 0; i < n; ++i) {
          estimates_[i] =
              saved[i] * exp_map(scale * step.segment<3>(3 * i));
        }
        const double new_obj = objective();
        if (new_obj <= obj + 1e-15) {
          obj = new_obj;
          accepted = true;
          break;
        }
        scale *= 0.5;
      }
      if (!accepted) {
        estimates_ = saved;
        break;
      }
      if (scale * step.norm() < step_tol) break;
    }
    return stats;
  }

  /// Schur-complements the oldest variable out of the sub-system formed by
  /// its measurement factor, its smoothness factor, and any existing
  /// marginal prior, then drops it. Returns the prior now attached to the
  /// new oldest variable (anchored at that variable's current estimate).
  MarginalPrior marginalize_oldest() {
    if (estimates_.size() < 2) {
      throw input_error("marginalize_oldest: need at least two variables");
    }
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d B = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    // Measurement on x0, IRLS weight frozen at the converged estimate.
    {
      const MeasurementFactor& f = factors_.front();
      const Eigen::Vector3d e = between(f.z, estimates_.front());
      const double r = std::sqrt(e.dot(f.info * e));
      const double w = f.robust ? huber_weight(r, delta_) : 1.0;
      const Eigen::Matrix3d J = right_jacobian_inv(e);
      A += w * J.transpose() * f.info * J;
    }
    // Existing prior on x0.
    if (prior_) {
      const Eigen::Vector3d e = between(prior_->anchor, estimates_.front());
      const Eigen::Matrix3d J = right_jacobian_inv(e);
      A += J.transpose() * prior_->info * J;
    }
    // Smoothness x0 -- x1.
    {
      const Eigen::Matrix3d E =
          (estimates_[0].inverse() * estimates_[1]).matrix();
      const Eigen::Vector3d e = log_map(Rotation(E));
      const Eigen::Matrix3d info_s = Eigen::Matrix3d::Identity() / lambda_;
      const Eigen::Matrix3d Jj = right_jacobian_inv(e);
      const Eigen::Matrix3d Ji = -Jj * E.transpose();
      A += Ji.transpose() * info_s * Ji;
      B += Ji.transpose() * info_s * Jj;
      C += Jj.transpose() * info_s * Jj;
    }
    // Schur complement onto x1; pseudo-inverse guards rank deficiency.
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(A);
    Eigen::Vector3d inv = Eigen::Vector3d::Zero();
    for (int i = 0; i < 3; ++i) {
      if (eig.eigenvalues()[i] > 1e-12) inv[i] = 1.0 / eig.eigenvalues()[i];
    }
    const Eigen::Matrix3d Ainv =
        eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    Eigen::Matrix3d marg = C - B.transpose() * Ainv * B;
    marg = 0.5 * (marg + marg.transpose());  // keep symmetric
    MarginalPrior p;
    p.anchor = estimates_[1];
    p.info = marg;
    estimates_.pop_front();
    factors_.pop_front();
    prior_ = p;
    return p;
  }

 private:
  void accumulate(Eigen::MatrixXd& H, Eigen::VectorXd& b) const {
    const int n = static_cast<int>(estimates_.size());
    const Eigen::Matrix3d info_s = Eigen::Matrix3d::Identity() / lambda_;
    for (int i = 0; i < n; ++i) {
      const MeasurementFactor& f = factors_[i];
      const Eigen::Vector3d e = between(f.z, estimates_[i]);
      const double r = std::sqrt(e.dot(f.info * e));
      const double w = f.robust ? huber_weight(r, delta_) : 1.0;
      const Eigen::Matrix3d J = right_jacobian_inv(e);
      const Eigen::Matrix3d JtL = w * J.transpose() * f.info;
      H.block<3, 3>(3 * i, 3 * i) += JtL * J;
      b.segment<3>(3 * i) -= JtL * e;
      if (i + 1 < n) {
        const Eigen::Matrix3d E =
            (estimates_[i].inverse() * estimates_[i + 1]).matrix();
        const Eigen::Vector3d es = log_map(Rotation(E));
        const Eigen::Matrix3d Jj = right_jacobian_inv(es);
        const Eigen::Matrix3d Ji = -Jj * E.transpose();
        H.block<3, 3>(3 * i, 3 * i) += Ji.transpose() * info_s * Ji;
        H.block<3, 3>(3 * i, 3 * (i + 1)) += Ji.transpose() * info_s * Jj;
        H.block<3, 3>(3 * (i + 1), 3 * i) += Jj.transpose() * info_s * Ji;
        H.block<3, 3>(3 * (i + 1), 3 * (i + 1)) += Jj.transpose() * info_s * Jj;
        b.segment<3>(3 * i) -= Ji.transpose() * info_s * es;
        b.segment<3>(3 * (i + 1)) -= Jj.transpose() * info_s * es;
      }
    }
    if (prior_) {
      const Eigen::Vector3d e = between(prior_->anchor, estimates_.front());
      const Eigen::Matrix3d J = right_jacobian_inv(e);
      H.topLeftCorner<3, 3>() += J.transpose() * prior_->info * J;
      b.head<3>() -= J.transpose() * prior_->info * e;
    }
  }

  static Eigen::VectorXd solve_normal_equations(const Eigen::MatrixXd& H,
                                                const Eigen::VectorXd& b,
                                                SolveStats& stats) {
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd step = llt.solve(b);
      if (step.allFinite()) return step;
    }
    // Underconstrained graph (e.g. a gauge direction with no absolute
    // information): bump the diagonal and flag it.
    stats.regularized = true;
    Eigen::MatrixXd Hr = H;
    Hr.diagonal().array() += 1e-12;
    Eigen::VectorXd step = Hr.ldlt().solve(b);
    if (!step.allFinite()) {
      throw numeric_error("window solve produced non-finite step");
    }
    return step;
  }

  std::deque<Rotation> estimates_;
  std::deque<MeasurementFactor> factors_;
  std::optional<MarginalPrior> prior_;
  double lambda_;
  double delta_;
};

struct TrackerConfig {
  int window = 10;  // variables kept in the sliding window
  double smoothness_lambda_deg2 = 4.0;  // isotropic smoothness covariance
  double huber_delta = 1.345;
  int max_iterations = 10;
  double step_tol = 1e-8;
};

/// Per-frame entry point: push the single-frame estimate, marginalise when
/// the window is full, solve, and return the latest smoothed rotation. The
/// return value is also the initialisation for the next single-frame
/// optimisation. One tracker is a single logical stream.
class Tracker {
 public:
  explicit Tracker(const TrackerConfig& cfg = {})
      : cfg_(cfg),
        graph_(deg2_to_rad2(cfg.smoothness_lambda_deg2), cfg.huber_delta) {
    if (cfg.window < 1) throw input_error("tracker window must be >= 1");
  }

  Rotation track(const Rotation& z, const Eigen::Matrix3d& info) {
    MeasurementFactor f;
    f.z = z;
    f.info = 0.5 * (info + info.transpose());
    f.robust = true;
    graph_.push(f);
    if (graph_.size() > static_cast<size_t>(cfg_.window)) {
      graph_.marginalize_oldest();
    }
    last_stats_ = graph_.solve(cfg_.max_iterations, cfg_.step_tol);
    return graph_.latest();
  }

  const WindowGraph& graph() const { return graph_; }
  const SolveStats& last_stats() const { return last_stats_; }
  bool empty() const { return graph_.size() == 0; }
  const Rotation& latest() const { return graph_.latest(); }

 private:
  static double deg2_to_rad2(double deg2) {
    const double d2r = M_PI / 180.0;
    return deg2 * d2r * d2r;
  }

  TrackerConfig cfg_;
  WindowGraph graph_;
  SolveStats last_stats_;
};

}  // namespace mwr
