#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "mwr/errors.hpp"

namespace mwr {

/// kappa * sin^2(theta) * cos^2(theta). Zero when the normal is parallel or
/// perpendicular to the axis, maximal at 45 degrees.
inline double cost_kernel(double theta, double kappa) {
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  return kappa * s * s * c * c;
}

namespace quad {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120813, 0.949107912342759, 0.864864423359769,
    0.741531185599394, 0.586087235467691, 0.405845151377397,
    0.207784955007898, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469};

/// One GK15 panel; returns (integral, error estimate).
template <typename F>
std::pair<double, double> gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double result_k = kWgk[7] * fc;
  double result_g = kWg[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double x = h * kXgk[i];
    const double fsum = f(c - x) + f(c + x);
    result_k += kWgk[i] * fsum;
    if (i % 2 == 1) result_g += kWg[i / 2] * fsum;
  }
  return {result_k * h, std::abs((result_k - result_g) * h)};
}

/// Adaptive bisection on GK15 panels to an absolute tolerance.
template <typename F>
double adaptive(const F& f, double a, double b, double abs_tol,
                int max_depth = 40) {
  struct Frame {
    double a, b, tol;
    int depth;
  };
  double total = 0.0;
  std::vector<Frame> stack{{a, b, abs_tol, 0}};
  while (!stack.empty()) {
    const Frame fr = stack.back();
    stack.pop_back();
    const auto [val, err] = gk15(f, fr.a, fr.b);
    if (err <= fr.tol || fr.depth >= max_depth) {
      if (err > fr.tol) {
        throw numeric_error("quadrature did not converge: error " +
                            std::to_string(err) + " > tol " +
                            std::to_string(fr.tol));
      }
      total += val;
      continue;
    }
    const double mid = 0.5 * (fr.a + fr.b);
    stack.push_back({fr.a, mid, 0.5 * fr.tol, fr.depth + 1});
    stack.push_back({mid, fr.b, 0.5 * fr.tol, fr.depth + 1});
  }
  return total;
}

}  // namespace quad

/// Surface integral of exp(-cost_kernel) over the unit sphere:
///   2*pi * [ int_0^{pi/4} exp(-k sin^2 cos^2) sin(t) dt
///            + exp(-k/4) * (1 + sqrt(2)/2) ]
/// The second term covers theta in [pi/4, pi] where the density plateaus.
inline double partition_Z(double kappa, double abs_tol = 1e-10) {
  const double plateau = std::exp(-kappa / 4.0) * (1.0 + std::sqrt(2.0) / 2.0);
  const auto integrand = [kappa](double t) {
    return std::exp(-cost_kernel(t, kappa)) * std::sin(t);
  };
  const double head = quad::adaptive(integrand, 0.0, M_PI / 4.0, abs_tol);
  return 2.0 * M_PI * (head + plateau);
}

/// The density normaliser D(kappa) = 1 / Z(kappa). D(0) = 1/(4 pi).
inline double normalizer_D(double kappa) { return 1.0 / partition_Z(kappa); }

/// C(kappa) = -log D(kappa) = log Z(kappa), the NLL offset term.
inline double log_partition_C(double kappa) {
  return std::log(partition_Z(kappa));
}

/// Natural cubic spline of C(kappa) over a knot grid, so the NLL does not
/// need a quadrature per evaluation. Immutable after fit.
class KappaSpline {
 public:
  /// Fits through (kappa_i, log_partition_C(kappa_i)). Knots must be sorted,
  /// distinct, >= 4, within [0, 1e5].
  static KappaSpline fit(const std::vector<double>& knots) {
    std::vector<double> values(knots.size());
    for (size_t i = 0; i < knots.size(); ++i) {
      values[i] = log_partition_C(knots[i]);
    }
    return from_values(knots, values);
  }

  static KappaSpline from_values(const std::vector<double>& knots,
                                 const std::vector<double>& values) {
    if (knots.size() < 4) throw input_error("spline: need >= 4 knots");
    if (knots.size() != values.size()) {
      throw input_error("spline: knot/value length mismatch");
    }
    for (size_t i = 1; i < knots.size(); ++i) {
      if (knots[i] <= knots[i - 1]) {
        throw input_error("spline: knots must be strictly increasing");
      }
    }
    if (knots.front() < 0.0 || knots.back() > 1e5) {
      throw input_error("spline: knots must lie in [0, 1e5]");
    }
    KappaSpline s;
    s.x_ = knots;
    s.y_ = values;
    s.m_ = solve_second_derivatives(knots, values);
    return s;
  }

  /// Evaluates C(kappa). Out-of-range kappa is clamped to the grid.
  double operator()(double kappa) const {
    const double x = std::clamp(kappa, x_.front(), x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const size_t i = std::clamp<size_t>(it - x_.begin(), 1, x_.size() - 1) - 1;
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - x) / h;
    const double b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h /
               6.0;
  }

  const std::vector<double>& knots() const { return x_; }
  const std::vector<double>& values() const { return y_; }
  const std::vector<double>& second_derivatives() const { return m_; }

  /// KSPL sidecar: magic "KSPL", u32 knot count, then f64 LE triples
  /// (kappa, C, second derivative) per knot.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error(path + ": cannot open for writing");
    out.write("KSPL", 4);
    const uint32_t n = static_cast<uint32_t>(x_.size());
    out.write(reinterpret_cast<const char*>(&n), 4);
    for (size_t i = 0; i < x_.size(); ++i) {
      const double triple[3] = {x_[i], y_[i], m_[i]};
      out.write(reinterpret_cast<const char*>(triple), sizeof(triple));
    }
    if (!out) throw io_error(path + ": write failed");
  }

  static KappaSpline load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, "KSPL", 4) != 0) {
      throw io_error(path + ": bad magic at byte offset 0");
    }
    uint32_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 4);
    if (!in || n < 4 || n > 1u << 20) {
      throw io_error(path + ": bad knot count at byte offset 4");
    }
    KappaSpline s;
    s.x_.resize(n);
    s.y_.resize(n);
    s.m_.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
      double triple[3];
      in.read(reinterpret_cast<char*>(triple), sizeof(triple));
      if (!in) {
        throw io_error(path + ": truncated at knot " + std::to_string(i));
      }
      s.x_[i] = triple[0];
      s.y_[i] = triple[1];
      s.m_[i] = triple[2];
    }
    return s;
  }

  /// kappa = 0 plus 64 log-spaced knots over [1e-2, 1e5].
  static std::vector<double> default_knots() {
    std::vector<double> knots{0.0};
    const int n = 64;
    const double lo = std::log(1e-2);
    const double hi = std::log(1e5);
    for (int i = 0; i < n; ++i) {
      knots.push_back(std::exp(lo + (hi - lo) * i / (n - 1)));
    }
    // exp(log(x)) can land one ulp outside the range; pin the endpoints.
    knots[1] = 1e-2;
    knots.back() = 1e5;
    return knots;
  }

 private:
  // Tridiagonal solve for natural boundary conditions (M_0 = M_{n-1} = 0).
  static std::vector<double> solve_second_derivatives(
      const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    std::vector<double> m(n, 0.0), diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    diag[0] = 1.0;
    for (size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x[i] - x[i - 1];
      const double h1 = x[i + 1] - x[i];
      diag[i] = (h0 + h1) / 3.0;
      upper[i] = h1 / 6.0;
      rhs[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
    }
    diag[n - 1] = 1.0;
    // Thomas algorithm; sub-diagonal at row i is h0/6 = upper[i-1]'s mirror.
    std::vector<double> c(n, 0.0);
    c[0] = 0.0;
    for (size_t i = 1; i + 1 < n; ++i) {
      const double lower = (x[i] - x[i - 1]) / 6.0;
      const double denom = diag[i] - lower * c[i - 1];
      c[i] = upper[i] / denom;
      rhs[i] = (rhs[i] - lower * rhs[i - 1]) / denom;
    }
    for (size_t i = n - 1; i-- > 1;) {
      m[i] = rhs[i] - c[i] * m[i + 1];
    }
    return m;
  }

  std::vector<double> x_, y_, m_;
};

/// Negative log-likelihood of the angular error distribution:
/// C(kappa) + kappa sin^2 cos^2 for theta < pi/4, C(kappa) + kappa/4 beyond.
inline double nll(double theta_err, double kappa, const KappaSpline& spline) {
  const double c = spline(kappa);
  if (theta_err < M_PI / 4.0) return c + cost_kernel(theta_err, kappa);
  return c + kappa / 4.0;
}

/// Quadrature-backed NLL, for callers without a fitted spline.
inline double nll(double theta_err, double kappa) {
  const double c = log_partition_C(kappa);
  if (theta_err < M_PI / 4.0) return c + cost_kernel(theta_err, kappa);
  return c + kappa / 4.0;
}

}  // namespace mwr
