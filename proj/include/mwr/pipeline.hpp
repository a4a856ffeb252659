#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mwr/config.hpp"
#include "mwr/distribution.hpp"
#include "mwr/evaluation.hpp"
#include "mwr/multi_frame.hpp"
#include "mwr/normal_map.hpp"
#include "mwr/single_frame.hpp"
#include "mwr/synth.hpp"
#include "mwr/trajectory_io.hpp"

namespace mwr {

/// One entry of the sequence manifest.
struct ManifestEntry {
  std::string frame;   // normal map path
  std::string kappa;   // optional confidence PNG
  double timestamp = 0.0;
};

/// Manifest: JSON array of {frame, kappa?, timestamp}. Relative paths are
/// resolved against the manifest's directory.
inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path + ": " + e.what());
  }
  if (!j.is_array()) throw io_error(path + ": manifest must be a JSON array");
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  for (const auto& item : j) {
    ManifestEntry e;
    if (!item.contains("frame") || !item.contains("timestamp")) {
      throw io_error(path + ": manifest entries need 'frame' and 'timestamp'");
    }
    e.frame = (base / item.at("frame").get<std::string>()).string();
    if (item.contains("kappa")) {
      e.kappa = (base / item.at("kappa").get<std::string>()).string();
    }
    e.timestamp = item.at("timestamp").get<double>();
    entries.push_back(e);
  }
  return entries;
}

struct FrameLog {
  size_t index = 0;
  double timestamp = 0.0;
  bool loaded = false;
  bool converged = false;
  int iterations = 0;
  double cost = 0.0;
  Eigen::Vector3d info_eigenvalues = Eigen::Vector3d::Zero();
};

struct EstimateResult {
  Trajectory trajectory;
  std::vector<FrameLog> logs;
};

/// Maps single-frame information (left-increment tangent of M) into the
/// graph's right/world tangent: Lambda_w = M^T Lambda M.
inline Eigen::Matrix3d info_to_world_tangent(const ManhattanFrame& m,
                                             const Eigen::Matrix3d& info) {
  const Eigen::Matrix3d r = m.matrix();
  return r.transpose() * info * r;
}

/// The estimation pipeline: per frame load, subsample, single-frame LM
/// (initialised at the tracker feedback), multi-frame track, and append
/// R_cw = M^T to the trajectory. Unloadable frames become zero-information
/// measurements in multi-frame mode and are skipped in single-frame mode.
inline EstimateResult run_estimate(const std::vector<ManifestEntry>& entries,
                                   const PipelineConfig& cfg) {
  cfg.validate();
  EstimateResult result;
  Tracker tracker(cfg.tracker_config());
  ManhattanFrame feedback;  // identity until the first solved frame
  bool have_feedback = false;
  for (size_t idx = 0; idx < entries.size(); ++idx) {
    const auto& entry = entries[idx];
    FrameLog log;
    log.index = idx;
    log.timestamp = entry.timestamp;
    std::vector<NormalSample> samples;
    try {
      NormalMap map = load_normal_map(entry.frame, entry.kappa);
      samples = sample(map, cfg.stride);
      log.loaded = !samples.empty();
    } catch (const io_error&) {
      log.loaded = false;
    }
    if (cfg.kappa_cap < kKappaCap) {
      for (auto& s : samples) s.kappa = std::min(s.kappa, cfg.kappa_cap);
    }
    Rotation pose_m;  // world-to-camera for this frame
    bool have_pose = false;
    if (log.loaded) {
      const ManhattanFrame init =
          cfg.single_frame_only || !have_feedback ? ManhattanFrame() : feedback;
      const FrameEstimate est = optimize(samples, init, cfg.lm);
      log.converged = est.converged;
      log.iterations = est.iterations;
      log.cost = est.cost;
      const Eigen::Matrix3d info_w =
          info_to_world_tangent(est.frame, est.information);
      log.info_eigenvalues =
          Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(info_w).eigenvalues();
      if (cfg.single_frame_only) {
        pose_m = est.frame;
        have_pose = true;
      } else {
        pose_m = tracker.track(est.frame, info_w);
        feedback = pose_m;
        have_feedback = true;
        have_pose = true;
      }
    } else if (!cfg.single_frame_only && !tracker.empty()) {
      // Dropped frame: zero-information measurement continues the stream.
      pose_m = tracker.track(tracker.latest(), Eigen::Matrix3d::Zero());
      feedback = pose_m;
      have_pose = true;
    }
    if (have_pose) {
      result.trajectory.push_back({entry.timestamp, pose_m.inverse()});
    }
    result.logs.push_back(log);
  }
  return result;
}

inline void write_frame_log_csv(const std::vector<FrameLog>& logs,
                                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << "frame_index,timestamp,loaded,converged,iterations,cost,"
         "info_eig_min,info_eig_mid,info_eig_max\n";
  char line[256];
  for (const auto& l : logs) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%d,%d,%d,%.9g,%.9g,%.9g,%.9g\n",
                  l.index, l.timestamp, l.loaded ? 1 : 0, l.converged ? 1 : 0,
                  l.iterations, l.cost, l.info_eigenvalues[0],
                  l.info_eigenvalues[1], l.info_eigenvalues[2]);
    out << line;
  }
}

// ---------------------------------------------------------------------------
// Synthetic sequence generation

/// Synth spec file: trajectory is either a constant-yaw generator
///   {"type": "constant_yaw", "frames": N, "yaw_rate_deg": r}
/// or an explicit quaternion list
///   {"type": "quaternions", "values": [[qx,qy,qz,qw], ...]}
/// (quaternions are world-to-camera M). Remaining keys mirror SynthSpec.
inline SynthSpec parse_synth_spec(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"trajectory", "axis_weights", "sigma_deg",
                        "outlier_fraction", "outlier_kappa", "inlier_kappa",
                        "samples_per_frame", "fps", "seed"},
                       "synth spec");
  SynthSpec spec;
  const auto& traj = j.at("trajectory");
  const std::string type = traj.at("type").get<std::string>();
  if (type == "constant_yaw") {
    const int frames = traj.at("frames").get<int>();
    const double rate = to_rad(traj.at("yaw_rate_deg").get<double>());
    for (int t = 0; t < frames; ++t) {
      spec.trajectory.push_back(
          exp_map(Eigen::Vector3d(0.0, 0.0, rate * t)));
    }
  } else if (type == "quaternions") {
    for (const auto& q : traj.at("values")) {
      spec.trajectory.push_back(Rotation(Eigen::Quaterniond(
          q.at(3).get<double>(), q.at(0).get<double>(), q.at(1).get<double>(),
          q.at(2).get<double>())));
    }
  } else {
    throw input_error("synth spec: unknown trajectory type '" + type + "'");
  }
  const auto& w = j.at("axis_weights");
  if (!w.is_array() || w.size() != 6) {
    throw input_error("synth spec: axis_weights must have 6 entries");
  }
  for (int i = 0; i < 6; ++i) spec.axis_weights[i] = w.at(i).get<double>();
  spec.sigma_deg = j.at("sigma_deg").get<double>();
  spec.outlier_fraction = j.at("outlier_fraction").get<double>();
  spec.outlier_kappa = j.at("outlier_kappa").get<double>();
  spec.inlier_kappa = j.at("inlier_kappa").get<double>();
  spec.samples_per_frame = j.at("samples_per_frame").get<int>();
  spec.fps = j.at("fps").get<double>();
  spec.seed = j.at("seed").get<uint64_t>();
  spec.validate();
  return spec;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path + ": " + e.what());
  }
  return parse_synth_spec(j);
}

/// Writes NMAP frame files, the sequence manifest, and the ground-truth
/// trajectory (gt.txt) into out_dir.
inline void run_synth(const SynthSpec& spec, const std::string& out_dir) {
  spec.validate();
  if (spec.trajectory.empty()) throw input_error("synth: no frames");
  std::filesystem::create_directories(out_dir);
  const auto frames = synth_sequence(spec);
  nlohmann::json manifest = nlohmann::json::array();
  Trajectory gt;
  for (size_t t = 0; t < frames.size(); ++t) {
    char name[64];
    std::snprintf(name, sizeof(name), "frame_%06zu.nmap", t);
    const NormalMap map = samples_to_map(frames[t]);
    write_nmap(map, (std::filesystem::path(out_dir) / name).string());
    const double ts = static_cast<double>(t) / spec.fps;
    manifest.push_back({{"frame", name}, {"timestamp", ts}});
    gt.push_back({ts, spec.trajectory[t].inverse()});
  }
  {
    std::ofstream out(std::filesystem::path(out_dir) / "manifest.json");
    if (!out) throw io_error(out_dir + "/manifest.json: cannot open");
    out << manifest.dump(2) << "\n";
  }
  write_trajectory(gt, (std::filesystem::path(out_dir) / "gt.txt").string());
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalResult {
  AlignmentResult alignment;
  std::vector<double> up_errors;  // radians, aligned frames
  Trajectory est;
  Trajectory gt;
};

inline EvalResult run_eval(const std::string& est_path,
                           const std::string& gt_path) {
  EvalResult r;
  r.est = read_trajectory(est_path);
  r.gt = read_trajectory(gt_path);
  r.alignment = align(r.est, r.gt);
  // Up-vector error per associated frame, under the winning alignment.
  for (size_t k = 0; k < r.alignment.est_indices.size(); ++k) {
    const size_t ei = r.alignment.est_indices[k];
    const Rotation aligned =
        r.alignment.r_align * r.est[ei].r_cw * r.alignment.symmetry;
    // Associate to the gt frame used during alignment by timestamp.
    const auto it = std::lower_bound(
        r.gt.begin(), r.gt.end(), r.est[ei].timestamp,
        [](const TimedRotation& a, double ts) { return a.timestamp < ts; });
    const TimedRotation& g =
        it == r.gt.end() ? r.gt.back()
        : (it == r.gt.begin() ? *it
           : (std::abs(std::prev(it)->timestamp - r.est[ei].timestamp) <
                      std::abs(it->timestamp - r.est[ei].timestamp)
                  ? *std::prev(it)
                  : *it));
    r.up_errors.push_back(up_vector_error(aligned, g.r_cw));
  }
  return r;
}

inline void write_eval_csv(const EvalResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << "frame_index,timestamp,are_deg,up_err_deg\n";
  char line[160];
  for (size_t k = 0; k < r.alignment.errors.size(); ++k) {
    const size_t ei = r.alignment.est_indices[k];
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g\n", ei,
                  r.est[ei].timestamp, to_deg(r.alignment.errors[k]),
                  to_deg(r.up_errors[k]));
    out << line;
  }
}

// ---------------------------------------------------------------------------
// Ground segmentation

struct GroundMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> ground;  // 255 = ground, 0 = other
};

/// Marks pixels whose normal is within threshold of the world up axis
/// expressed in the camera frame, u_cam = M e_z.
inline GroundMask segment_ground(const NormalMap& map,
                                 const ManhattanFrame& m,
                                 double threshold_rad) {
  if (threshold_rad <= 0.0 || threshold_rad >= M_PI / 2.0) {
    throw input_error("segment: threshold must be in (0, 90) degrees");
  }
  const Eigen::Vector3d up_cam = m * Eigen::Vector3d::UnitZ();
  GroundMask mask;
  mask.width = map.width();
  mask.height = map.height();
  mask.ground.assign(static_cast<size_t>(map.width()) * map.height(), 0);
  const double cos_thr = std::cos(threshold_rad);
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      if (!map.valid(x, y)) continue;
      if (map.normal(x, y).dot(up_cam) > cos_thr) {
        mask.ground[static_cast<size_t>(y) * map.width() + x] = 255;
      }
    }
  }
  return mask;
}

/// Binary PGM (P5), 255 = ground.
inline void write_mask_pgm(const GroundMask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(mask.ground.data()),
            static_cast<std::streamsize>(mask.ground.size()));
  if (!out) throw io_error(path + ": write failed");
}

}  // namespace mwr
