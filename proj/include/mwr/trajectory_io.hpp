#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "mwr/errors.hpp"
#include "mwr/evaluation.hpp"

namespace mwr {

/// One line per frame: "timestamp tx ty tz qx qy qz qw" with tx=ty=tz=0.
/// Quaternion is camera-to-world, Hamilton, (x, y, z, w) order, written
/// with 9 significant digits and a canonical non-negative w.
inline void write_trajectory(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  char line[256];
  for (const auto& tr : traj) {
    Eigen::Quaterniond q = tr.r_cw.quaternion();
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    std::snprintf(line, sizeof(line), "%.9g 0 0 0 %.9g %.9g %.9g %.9g\n",
                  tr.timestamp, q.x(), q.y(), q.z(), q.w());
    out << line;
  }
  if (!out) throw io_error(path + ": write failed");
}

inline Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  Trajectory traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(iss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw)) {
      throw io_error(path + ": malformed trajectory line " +
                     std::to_string(lineno));
    }
    const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
    if (norm < 1e-6) {
      throw io_error(path + ": zero quaternion at line " +
                     std::to_string(lineno));
    }
    traj.push_back({t, Rotation(Eigen::Quaterniond(qw, qx, qy, qz))});
  }
  check_trajectory(traj);
  return traj;
}

}  // namespace mwr
