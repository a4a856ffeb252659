#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "mwr/errors.hpp"
#include "mwr/multi_frame.hpp"
#include "mwr/single_frame.hpp"

namespace mwr {

/// Full pipeline configuration. The JSON file must spell out every field;
/// unknown keys are errors so that stale configs fail loudly.
struct PipelineConfig {
  int stride = 8;
  LMConfig lm;
  int window = 10;
  double smoothness_lambda_deg2 = 4.0;
  double huber_delta = 1.345;
  bool single_frame_only = false;
  double kappa_cap = 100.0;
  uint64_t seed = 0;

  void validate() const {
    if (stride < 1) throw input_error("config: stride must be >= 1");
    if (lm.mu0 <= 0.0 || lm.mu_up <= 1.0 || lm.mu_down <= 0.0 ||
        lm.mu_down >= 1.0) {
      throw input_error("config: bad LM damping parameters");
    }
    if (lm.max_iterations < 1) {
      throw input_error("config: lm.max_iterations must be >= 1");
    }
    if (lm.step_tol <= 0.0 || lm.cost_tol <= 0.0) {
      throw input_error("config: LM tolerances must be > 0");
    }
    if (window < 1) throw input_error("config: window must be >= 1");
    if (smoothness_lambda_deg2 <= 0.0) {
      throw input_error("config: smoothness_lambda_deg2 must be > 0");
    }
    if (huber_delta <= 0.0) throw input_error("config: huber_delta must be > 0");
    if (kappa_cap <= 0.0) throw input_error("config: kappa_cap must be > 0");
  }

  TrackerConfig tracker_config() const {
    TrackerConfig tc;
    tc.window = window;
    tc.smoothness_lambda_deg2 = smoothness_lambda_deg2;
    tc.huber_delta = huber_delta;
    return tc;
  }
};

namespace detail {

inline void require_keys(const nlohmann::json& j,
                         const std::set<std::string>& keys,
                         const std::string& context) {
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) {
      throw input_error("config: unknown key '" + key + "' in " + context);
    }
  }
  for (const auto& key : keys) {
    if (!j.contains(key)) {
      throw input_error("config: missing key '" + key + "' in " + context);
    }
  }
}

}  // namespace detail

inline PipelineConfig parse_config(const nlohmann::json& j) {
  detail::require_keys(j,
                       {"stride", "lm", "window", "smoothness_lambda_deg2",
                        "huber_delta", "single_frame_only", "kappa_cap",
                        "seed"},
                       "top level");
  detail::require_keys(
      j.at("lm"),
      {"mu0", "mu_up", "mu_down", "max_iterations", "step_tol", "cost_tol"},
      "lm");
  PipelineConfig c;
  c.stride = j.at("stride").get<int>();
  const auto& lm = j.at("lm");
  c.lm.mu0 = lm.at("mu0").get<double>();
  c.lm.mu_up = lm.at("mu_up").get<double>();
  c.lm.mu_down = lm.at("mu_down").get<double>();
  c.lm.max_iterations = lm.at("max_iterations").get<int>();
  c.lm.step_tol = lm.at("step_tol").get<double>();
  c.lm.cost_tol = lm.at("cost_tol").get<double>();
  c.window = j.at("window").get<int>();
  c.smoothness_lambda_deg2 = j.at("smoothness_lambda_deg2").get<double>();
  c.huber_delta = j.at("huber_delta").get<double>();
  c.single_frame_only = j.at("single_frame_only").get<bool>();
  c.kappa_cap = j.at("kappa_cap").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  return nlohmann::json{
      {"stride", c.stride},
      {"lm",
       {{"mu0", c.lm.mu0},
        {"mu_up", c.lm.mu_up},
        {"mu_down", c.lm.mu_down},
        {"max_iterations", c.lm.max_iterations},
        {"step_tol", c.lm.step_tol},
        {"cost_tol", c.lm.cost_tol}}},
      {"window", c.window},
      {"smoothness_lambda_deg2", c.smoothness_lambda_deg2},
      {"huber_delta", c.huber_delta},
      {"single_frame_only", c.single_frame_only},
      {"kappa_cap", c.kappa_cap},
      {"seed", c.seed}};
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(path + ": " + e.what());
  }
  return parse_config(j);
}

inline void save_config(const PipelineConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error(path + ": cannot open for writing");
  out << config_to_json(c).dump(2) << "\n";
}

}  // namespace mwr
