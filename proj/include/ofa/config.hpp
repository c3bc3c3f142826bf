#pragma once

#include "ofa/env.hpp"
#include "ofa/policy.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace ofa {

/// Merged configuration tree: base file, optional overlay files, then
/// `--set key.path=value` overrides. Overrides may only touch keys the base
/// tree already defines; the content digest is stamped into every output.
struct RunConfig {
  nlohmann::json tree;
  std::string digest;

  SimConfig sim() const;            // builds the robot model and rig
  PolicyConfig policy() const;      // tree["policy"]
  std::string robot_file() const;
};

RunConfig load_run_config(const std::string& base_path,
                          const std::vector<std::string>& overlay_paths = {},
                          const std::vector<std::string>& set_overrides = {});

/// Parse errors report path:line; unknown keys are rejected.
nlohmann::json parse_json_file(const std::string& path);

}  // namespace ofa
