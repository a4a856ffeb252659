#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "mwr/distribution.hpp"

using namespace mwr;

namespace {

double density(double theta, double kappa, double d) {
  if (theta < M_PI / 4.0) return d * std::exp(-cost_kernel(theta, kappa));
  return d * std::exp(-kappa / 4.0);
}

/// Independent sphere integral of the density by uniform Monte Carlo.
double monte_carlo_mass(double kappa, int n, uint64_t seed, double* stderr_out) {
  const double d = normalizer_D(kappa);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = 2.0 * u(rng) - 1.0;  // cos(theta), uniform on the sphere
    const double v = density(std::acos(z), kappa, d) * 4.0 * M_PI;
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  *stderr_out = std::sqrt((sum2 / n - mean * mean) / n);
  return mean;
}

}  // namespace

TEST_CASE("cost kernel closed forms") {
  CHECK(cost_kernel(M_PI / 4.0, 1.0) == Catch::Approx(0.25).margin(1e-15));
  CHECK(cost_kernel(0.0, 5.0) == 0.0);
  CHECK(cost_kernel(M_PI / 2.0, 5.0) == Catch::Approx(0.0).margin(1e-30));
  CHECK(cost_kernel(M_PI / 6.0, 2.0) == Catch::Approx(0.375).margin(1e-12));
}

TEST_CASE("cost kernel symmetry about 45 and 90 degrees") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, M_PI / 2.0);
  for (int i = 0; i < 200; ++i) {
    const double t = u(rng);
    CHECK(cost_kernel(t, 3.0) ==
          Catch::Approx(cost_kernel(M_PI / 2.0 - t, 3.0)).margin(1e-12));
    CHECK(cost_kernel(t, 3.0) ==
          Catch::Approx(cost_kernel(M_PI - t, 3.0)).margin(1e-12));
  }
}

TEST_CASE("normalizer at kappa = 0 is the uniform density") {
  CHECK(normalizer_D(0.0) == Catch::Approx(1.0 / (4.0 * M_PI)).margin(1e-9));
  CHECK(log_partition_C(0.0) ==
        Catch::Approx(std::log(4.0 * M_PI)).margin(1e-9));
}

TEST_CASE("density integrates to one (quadrature self-consistency)") {
  for (double kappa : {0.0, 1.0, 10.0, 100.0, 1e3, 1e5}) {
    const double d = normalizer_D(kappa);
    // Direct polar quadrature of the full density over the sphere.
    const auto integrand = [&](double t) {
      return density(t, kappa, d) * std::sin(t);
    };
    const double mass = 2.0 * M_PI * quad::adaptive(integrand, 0.0, M_PI, 1e-12);
    CHECK(mass == Catch::Approx(1.0).margin(1e-6));
  }
}

TEST_CASE("density mass agrees with Monte Carlo within 3 sigma") {
  double se = 0.0;
  const double mass = monte_carlo_mass(10.0, 10000000, 77, &se);
  CHECK(std::abs(mass - 1.0) < 3.0 * se);
}

TEST_CASE("D is monotonically increasing in kappa") {
  double prev = normalizer_D(0.0);
  for (double kappa : {1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
    const double d = normalizer_D(kappa);
    CHECK(d > prev);
    prev = d;
  }
}

TEST_CASE("nll branch and kappa behaviour") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());

  // theta >= pi/4 uses the plateau branch exactly.
  CHECK(nll(M_PI / 3.0, 7.0, spline) ==
        Catch::Approx(spline(7.0) + 7.0 / 4.0).margin(1e-12));
  // kappa = 0 is the uniform distribution regardless of theta.
  CHECK(nll(0.3, 0.0, spline) ==
        Catch::Approx(std::log(4.0 * M_PI)).margin(1e-3));
  CHECK(nll(0.3, 0.0) == Catch::Approx(std::log(4.0 * M_PI)).margin(1e-9));

  // dC/dkappa < 0: confidence is rewarded for a correct prediction.
  for (double kappa : {0.5, 1.0, 10.0, 50.0, 99.0}) {
    const double h = 1e-3 * std::max(kappa, 1.0);
    const double deriv =
        (log_partition_C(kappa + h) - log_partition_C(kappa - h)) / (2.0 * h);
    CHECK(deriv < 0.0);
  }
}

TEST_CASE("C is monotonically decreasing on the knot grid") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  const auto& v = spline.values();
  for (size_t i = 1; i < v.size(); ++i) {
    CHECK(v[i] < v[i - 1]);
  }
}

TEST_CASE("spline interpolates the quadrature at the knots") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  for (size_t i = 0; i < spline.knots().size(); ++i) {
    CHECK(spline(spline.knots()[i]) ==
          Catch::Approx(log_partition_C(spline.knots()[i])).margin(1e-12));
  }
}

TEST_CASE("spline matches quadrature between knots") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1e5);
  for (int i = 0; i < 200; ++i) {
    const double kappa = u(rng);
    const double exact = log_partition_C(kappa);
    CHECK(std::abs(spline(kappa) - exact) / std::abs(exact) < 1e-3);
  }
}

TEST_CASE("natural boundary conditions") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  CHECK(spline.second_derivatives().front() == 0.0);
  CHECK(spline.second_derivatives().back() == 0.0);

  // One-sided numerical second derivative at the boundary knots, staying
  // inside the boundary interval (exact for cubics up to rounding).
  double scale = 0.0;
  for (double m : spline.second_derivatives()) {
    scale = std::max(scale, std::abs(m));
  }
  const auto one_sided = [&](double x, double h) {
    return (2.0 * spline(x) - 5.0 * spline(x + h) + 4.0 * spline(x + 2.0 * h) -
            spline(x + 3.0 * h)) /
           (h * h);
  };
  const auto& k = spline.knots();
  const double h0 = (k[1] - k[0]) / 4.0;
  const double h1 = (k[k.size() - 1] - k[k.size() - 2]) / 4.0;
  CHECK(std::abs(one_sided(k.front(), h0)) < 1e-6 * scale + 1e-6);
  CHECK(std::abs(one_sided(k.back(), -h1)) < 1e-6 * scale + 1e-6);
}

TEST_CASE("spline input validation") {
  CHECK_THROWS_AS(KappaSpline::fit({0.0, 1.0, 2.0}), input_error);
  CHECK_THROWS_AS(KappaSpline::fit({0.0, 1.0, 1.0, 2.0}), input_error);
  CHECK_THROWS_AS(KappaSpline::fit({0.0, 2.0, 1.0, 3.0}), input_error);
  CHECK_THROWS_AS(KappaSpline::fit({0.0, 1.0, 2.0, 2e5}), input_error);
}

TEST_CASE("KSPL sidecar round trip") {
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  const auto path =
      (std::filesystem::temp_directory_path() / "spline.kspl").string();
  spline.save(path);
  const auto back = KappaSpline::load(path);
  REQUIRE(back.knots() == spline.knots());
  REQUIRE(back.values() == spline.values());
  REQUIRE(back.second_derivatives() == spline.second_derivatives());
  std::filesystem::remove(path);
}
