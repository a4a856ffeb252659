// Acceptance suite: one self-contained check per criterion, one line of
// output each, nonzero exit if any fails.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "mwr/distribution.hpp"
#include "mwr/evaluation.hpp"
#include "mwr/multi_frame.hpp"
#include "mwr/pipeline.hpp"
#include "mwr/single_frame.hpp"
#include "mwr/synth.hpp"

using namespace mwr;
namespace fs = std::filesystem;

namespace {

double error_up_to_symmetry(const ManhattanFrame& est,
                            const ManhattanFrame& gt) {
  double best = M_PI;
  for (const auto& s : cube_group()) {
    best = std::min(best, geodesic_distance(est, gt * s));
  }
  return best;
}

// 1. Analytical residual Jacobian vs central finite differences.
bool check_jacobian() {
  std::mt19937_64 rng(1);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ManhattanFrame m = random_rotation(rng);
    const NormalSample s{detail::uniform_sphere(rng),
                         std::uniform_real_distribution<double>(0.1, 5.0)(rng)};
    const Eigen::Matrix3d mat = m.matrix();
    for (int j = 0; j < 3; ++j) {
      const Eigen::Matrix3d J = axis_jacobian(mat.col(j), s);
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        d[k] = h;
        const Eigen::Vector3d fd =
            (axis_residual((exp_map(d) * m).matrix().col(j), s) -
             axis_residual((exp_map(-d) * m).matrix().col(j), s)) /
            (2.0 * h);
        worst = std::max(worst, (fd - J.col(k)).cwiseAbs().maxCoeff());
      }
    }
  }
  return worst < 1e-6;
}

// 2. One near-aligned unit-kappa normal: information tends to diag(0,2,2).
bool check_degenerate_information() {
  const Eigen::Vector3d n =
      exp_map({0.0, 0.0, 1e-4}) * Eigen::Vector3d::UnitX();
  const auto eq = accumulate_normal_equations(ManhattanFrame(), {{n, 1.0}});
  Eigen::Matrix3d expected = Eigen::Matrix3d::Zero();
  expected(1, 1) = expected(2, 2) = 2.0;
  return (eq.information - expected).cwiseAbs().maxCoeff() < 1e-3;
}

// 3. Noise-free synthetic frames: exact recovery up to a cube symmetry.
bool check_noise_free_recovery() {
  std::mt19937_64 rng(3);
  SynthSpec spec;
  spec.trajectory = {ManhattanFrame()};
  spec.samples_per_frame = 1000;
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    spec.seed = 300 + trial;
    const ManhattanFrame gt = random_rotation(rng);
    const FrameEstimate est =
        optimize(synth_frame(gt, spec, 0), ManhattanFrame());
    if (error_up_to_symmetry(est.frame, gt) < 1e-6) ++good;
  }
  return good == 100;
}

// 4. sigma = 5 deg, N = 4096: sub-degree recovery in >= 95 of 100 trials.
bool check_noisy_recovery() {
  std::mt19937_64 rng(4);
  SynthSpec spec;
  spec.trajectory = {ManhattanFrame()};
  spec.samples_per_frame = 4096;
  spec.sigma_deg = 5.0;
  int good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    spec.seed = 400 + trial;
    const ManhattanFrame gt = random_rotation(rng);
    const FrameEstimate est =
        optimize(synth_frame(gt, spec, 0), ManhattanFrame());
    if (error_up_to_symmetry(est.frame, gt) < to_rad(1.0)) ++good;
  }
  return good >= 95;
}

// 5. Distribution normalisation, D(0), and spline fidelity.
bool check_distribution() {
  for (double kappa : {0.0, 1.0, 10.0, 100.0, 1e3, 1e5}) {
    const double d = normalizer_D(kappa);
    const auto integrand = [&](double t) {
      const double e = t < M_PI / 4.0 ? cost_kernel(t, kappa) : kappa / 4.0;
      return d * std::exp(-e) * std::sin(t);
    };
    const double mass =
        2.0 * M_PI * quad::adaptive(integrand, 0.0, M_PI, 1e-12);
    if (std::abs(mass - 1.0) >= 1e-6) return false;
  }
  if (std::abs(normalizer_D(0.0) - 1.0 / (4.0 * M_PI)) >= 1e-9) return false;
  const auto spline = KappaSpline::fit(KappaSpline::default_knots());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1e5);
  for (int i = 0; i < 1000; ++i) {
    const double kappa = u(rng);
    const double exact = log_partition_C(kappa);
    if (std::abs(spline(kappa) - exact) / std::abs(exact) >= 1e-3) {
      return false;
    }
  }
  return true;
}

// 6. Pure-yaw sequence crossing 45 degrees: single-frame mode jumps by a
// cube symmetry, multi-frame tracking stays on one branch.
bool check_ambiguity() {
  SynthSpec spec;
  spec.samples_per_frame = 2000;
  spec.seed = 6;
  std::vector<ManhattanFrame> gt;
  for (int t = 0; t <= 30; ++t) {
    gt.push_back(exp_map(Eigen::Vector3d(0.0, 0.0, to_rad(30.0 + t))));
  }
  spec.trajectory = gt;

  double max_single = 0.0, max_multi = 0.0;
  Tracker tracker;
  ManhattanFrame feedback;
  bool have_feedback = false;
  ManhattanFrame prev_single, prev_multi;
  for (size_t t = 0; t < gt.size(); ++t) {
    const auto samples = synth_frame(gt[t], spec, static_cast<int>(t));
    const FrameEstimate single = optimize(samples, ManhattanFrame());
    const FrameEstimate multi =
        optimize(samples, have_feedback ? feedback : ManhattanFrame());
    const Rotation tracked = tracker.track(
        multi.frame, info_to_world_tangent(multi.frame, multi.information));
    feedback = tracked;
    have_feedback = true;
    if (t > 0) {
      max_single =
          std::max(max_single, geodesic_distance(prev_single, single.frame));
      max_multi = std::max(max_multi, geodesic_distance(prev_multi, tracked));
    }
    prev_single = single.frame;
    prev_multi = tracked;
  }
  return max_single >= to_rad(80.0) && max_multi < to_rad(2.0);
}

// 7. 100-frame sequence, 10% of measurements flipped by 90 degrees.
bool check_outlier_robustness() {
  std::mt19937_64 rng(7);
  std::vector<Rotation> gt;
  Rotation cur = random_rotation(rng);
  for (int t = 0; t < 100; ++t) {
    cur = cur * exp_map(to_rad(0.5) * detail::uniform_sphere(rng));
    gt.push_back(cur);
  }
  const Eigen::Matrix3d info = 1e4 * Eigen::Matrix3d::Identity();
  double clean_sum = 0.0, spiked_sum = 0.0;
  Tracker clean, spiked;
  for (int t = 0; t < 100; ++t) {
    const Rotation z =
        gt[t] * exp_map(to_rad(0.1) * detail::uniform_sphere(rng));
    clean_sum += geodesic_distance(clean.track(z, info), gt[t]);
    const Rotation zs =
        t % 10 == 9
            ? z * exp_map(M_PI / 2.0 * detail::uniform_sphere(rng))
            : z;
    spiked_sum += geodesic_distance(spiked.track(zs, info), gt[t]);
  }
  return clean_sum / 100.0 < to_rad(0.2) && spiked_sum / 100.0 < to_rad(2.0);
}

// 8. Sliding window vs full-batch factor graph, 20 seeds.
bool check_marginalization_consistency() {
  for (int seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(800 + seed);
    std::vector<Rotation> zs;
    std::vector<Eigen::Matrix3d> infos;
    Rotation cur = random_rotation(rng);
    const double sigma = 0.003;
    for (int t = 0; t < 25; ++t) {
      cur = cur * exp_map(0.008 * detail::uniform_sphere(rng));
      zs.push_back(cur * exp_map(sigma * std::abs(detail::gaussian(rng)) *
                                 detail::uniform_sphere(rng)));
      infos.push_back((1.0 / (sigma * sigma)) * Eigen::Matrix3d::Identity());
    }
    TrackerConfig window_cfg;
    window_cfg.window = 10;
    window_cfg.max_iterations = 30;
    TrackerConfig batch_cfg = window_cfg;
    batch_cfg.window = 1000;  // never marginalises: full batch
    Tracker window(window_cfg), batch(batch_cfg);
    Rotation window_last, batch_last;
    for (size_t t = 0; t < zs.size(); ++t) {
      window_last = window.track(zs[t], infos[t]);
      batch_last = batch.track(zs[t], infos[t]);
    }
    if (geodesic_distance(window_last, batch_last) >= 1e-3) return false;
  }
  return true;
}

// 9. Up-vector error: zero under yaw, exactly 5 degrees under 5-deg roll.
bool check_up_vector() {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = random_rotation(rng);
    const double psi = 2.0 * M_PI * detail::uniform01(rng) - M_PI;
    const Rotation yawed = exp_map(psi * Eigen::Vector3d::UnitZ()) * r;
    if (up_vector_error(yawed, r) >= 1e-9) return false;
    const Rotation rolled =
        exp_map(to_rad(5.0) * Eigen::Vector3d::UnitX()) * yawed;
    if (std::abs(up_vector_error(rolled, r) - to_rad(5.0)) >= 1e-6) {
      return false;
    }
  }
  return true;
}

// 10. Two CLI runs on the same sequence write bitwise-identical files.
bool check_determinism() {
  const fs::path dir = fs::temp_directory_path() / "mwr_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream spec(dir / "spec.json");
    spec << R"({
  "trajectory": {"type": "constant_yaw", "frames": 10, "yaw_rate_deg": 1.0},
  "axis_weights": [0.2, 0.2, 0.2, 0.2, 0.1, 0.1],
  "sigma_deg": 3.0, "outlier_fraction": 0.05,
  "outlier_kappa": 1.0, "inlier_kappa": 1.0,
  "samples_per_frame": 1024, "fps": 30.0, "seed": 42
})";
  }
  save_config(PipelineConfig{}, (dir / "config.json").string());
  const std::string cli = MWR_CLI_PATH;
  const auto run = [&](const std::string& args) {
    const int rc =
        std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
  };
  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (!run("synth --spec " + (dir / "spec.json").string() + " --out-dir " +
           (dir / "seq").string())) {
    return false;
  }
  const std::string est =
      "estimate --manifest " + (dir / "seq" / "manifest.json").string() +
      " --config " + (dir / "config.json").string() + " --out-traj ";
  if (!run(est + (dir / "a.txt").string())) return false;
  if (!run(est + (dir / "b.txt").string())) return false;
  const std::string a = slurp(dir / "a.txt");
  const bool ok = !a.empty() && a == slurp(dir / "b.txt");
  fs::remove_all(dir);
  return ok;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool (*check)();
  };
  const Criterion criteria[] = {
      {"jacobian vs finite differences", check_jacobian},
      {"degenerate-axis information limit", check_degenerate_information},
      {"noise-free recovery", check_noise_free_recovery},
      {"noisy recovery", check_noisy_recovery},
      {"distribution normalisation", check_distribution},
      {"90-degree ambiguity", check_ambiguity},
      {"outlier robustness", check_outlier_robustness},
      {"marginalisation consistency", check_marginalization_consistency},
      {"up-vector invariance", check_up_vector},
      {"end-to-end determinism", check_determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    bool ok = false;
    try {
      ok = c.check();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "criterion %d threw: %s\n", index, e.what());
    }
    std::printf("criterion %2d (%s): %s\n", index, c.name,
                ok ? "pass" : "FAIL");
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
