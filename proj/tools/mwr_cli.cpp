// Manhattan-world rotation estimation CLI: sequence estimation, synthetic
// data generation, trajectory evaluation, normaliser fitting, and ground
// segmentation.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "mwr/config.hpp"
#include "mwr/distribution.hpp"
#include "mwr/pipeline.hpp"
#include "mwr/trajectory_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

int cmd_estimate(const std::string& manifest_path,
                 const std::string& config_path, const std::string& out_traj,
                 const std::string& out_csv, bool single_frame) {
  mwr::PipelineConfig cfg = mwr::load_config(config_path);
  if (single_frame) cfg.single_frame_only = true;
  const auto entries = mwr::load_manifest(manifest_path);
  const auto result = mwr::run_estimate(entries, cfg);
  mwr::write_trajectory(result.trajectory, out_traj);
  if (!out_csv.empty()) mwr::write_frame_log_csv(result.logs, out_csv);
  size_t dropped = 0;
  for (const auto& l : result.logs) {
    if (!l.loaded) ++dropped;
  }
  std::printf("estimated %zu poses (%zu frames, %zu dropped)\n",
              result.trajectory.size(), result.logs.size(), dropped);
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const mwr::SynthSpec spec = mwr::load_synth_spec(spec_path);
  mwr::run_synth(spec, out_dir);
  std::printf("wrote %zu frames to %s\n", spec.trajectory.size(),
              out_dir.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& est_path, const std::string& gt_path,
             const std::string& csv_path) {
  const mwr::EvalResult r = mwr::run_eval(est_path, gt_path);
  if (!csv_path.empty()) mwr::write_eval_csv(r, csv_path);
  const Eigen::Matrix3d s = r.alignment.symmetry.matrix();
  std::printf("frames associated: %zu (dropped %zu)\n",
              r.alignment.errors.size(), r.alignment.dropped);
  std::printf("mean ARE:   %.3f deg\n", mwr::to_deg(r.alignment.mean));
  std::printf("median ARE: %.3f deg\n", mwr::to_deg(r.alignment.median));
  std::printf("symmetry:   [%g %g %g; %g %g %g; %g %g %g]\n", s(0, 0), s(0, 1),
              s(0, 2), s(1, 0), s(1, 1), s(1, 2), s(2, 0), s(2, 1), s(2, 2));
  return kExitOk;
}

int cmd_fit_normalizer(const std::string& out_path) {
  const auto spline = mwr::KappaSpline::fit(mwr::KappaSpline::default_knots());
  spline.save(out_path);
  std::printf("wrote %zu-knot spline to %s\n", spline.knots().size(),
              out_path.c_str());
  return kExitOk;
}

int cmd_segment(const std::string& frame_path, const std::string& traj_path,
                int index, double threshold_deg, const std::string& out_path) {
  const mwr::NormalMap map = mwr::load_normal_map(frame_path);
  mwr::ManhattanFrame m;
  if (!traj_path.empty()) {
    const mwr::Trajectory traj = mwr::read_trajectory(traj_path);
    if (index < 0 || static_cast<size_t>(index) >= traj.size()) {
      throw mwr::input_error("segment: no trajectory entry at index " +
                             std::to_string(index));
    }
    m = traj[index].r_cw.inverse();
  } else {
    const auto samples = mwr::sample(map, 1);
    m = mwr::optimize(samples, mwr::ManhattanFrame()).frame;
  }
  const auto mask = mwr::segment_ground(map, m, mwr::to_rad(threshold_deg));
  mwr::write_mask_pgm(mask, out_path);
  size_t count = 0;
  for (auto v : mask.ground) count += v != 0;
  std::printf("marked %zu / %zu pixels as ground\n", count,
              mask.ground.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Manhattan-world rotation estimation from surface normals"};
  app.require_subcommand(1);

  std::string manifest, config, out_traj, out_csv;
  bool single_frame = false;
  auto* estimate = app.add_subcommand("estimate", "run the estimation pipeline");
  estimate->add_option("--manifest", manifest, "sequence manifest JSON")
      ->required();
  estimate->add_option("--config", config, "pipeline config JSON")->required();
  estimate->add_option("--out-traj", out_traj, "output trajectory path")
      ->required();
  estimate->add_option("--out-csv", out_csv, "per-frame log CSV path");
  estimate->add_flag("--single-frame", single_frame,
                     "disable multi-frame optimisation");

  std::string spec_path, out_dir;
  auto* synth = app.add_subcommand("synth", "generate a synthetic sequence");
  synth->add_option("--spec", spec_path, "synth spec JSON")->required();
  synth->add_option("--out-dir", out_dir, "output directory")->required();

  std::string est_path, gt_path, eval_csv;
  auto* eval = app.add_subcommand("eval", "evaluate against ground truth");
  eval->add_option("--est", est_path, "estimated trajectory")->required();
  eval->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  eval->add_option("--csv", eval_csv, "per-frame error CSV path");

  std::string spline_out;
  auto* fit = app.add_subcommand("fit-normalizer",
                                 "fit and store the C(kappa) spline");
  fit->add_option("--out", spline_out, "output sidecar path")->required();

  std::string seg_frame, seg_traj, seg_out;
  int seg_index = 0;
  double threshold_deg = 20.0;
  auto* segment = app.add_subcommand("segment", "ground segmentation mask");
  segment->add_option("--frame", seg_frame, "normal map path")->required();
  segment->add_option("--traj", seg_traj,
                      "trajectory supplying the rotation (else single-frame "
                      "estimate)");
  segment->add_option("--index", seg_index, "trajectory entry index");
  segment->add_option("--threshold-deg", threshold_deg,
                      "ground angle threshold in degrees");
  segment->add_option("--out", seg_out, "output PGM path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*estimate) {
      return cmd_estimate(manifest, config, out_traj, out_csv, single_frame);
    }
    if (*synth) return cmd_synth(spec_path, out_dir);
    if (*eval) return cmd_eval(est_path, gt_path, eval_csv);
    if (*fit) return cmd_fit_normalizer(spline_out);
    if (*segment) {
      return cmd_segment(seg_frame, seg_traj, seg_index, threshold_deg,
                         seg_out);
    }
  } catch (const mwr::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitUsage;
}
