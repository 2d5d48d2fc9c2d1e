#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace liebridge {

/// Settings of one experiment run. Every field has a default except the seed.
struct ExperimentConfig {
  std::string experiment = "bm";
  std::string space = "so3";
  double T = 1.0;
  int steps = 100;
  int n_paths = 100;
  int n_bridges = 8;
  int K = 100;
  int m = 4;
  double eta = 0.2;
  std::uint64_t seed = 0;
  std::vector<double> metric;       ///< upper triangle; empty = identity
  std::vector<double> true_metric;  ///< upper triangle; empty = identity
  std::string target = "identity";
  std::string init = "identity";    ///< starting mean for spd-mean
  std::string output_dir = "out";
  int n_obs = 128;
  std::vector<double> T_list{0.5, 1.0, 1.5, 2.0};
  int n_samples = 512;
  int grid_points = 16;
  int lattice_points = 5;
  int grid_angles = 0;
  int iterations = 1000;
  double proposal_scale = 0.3;

  bool operator==(const ExperimentConfig&) const = default;
};

const std::vector<std::string>& experiment_names();
bool is_experiment_name(const std::string& name);

/// Parses key=value lines ('#' starts a comment) or a JSON object. Unknown keys, bad
/// literals and non-positive sizes raise InputError naming the key (and line for key=value).
/// The seed is mandatory unless `seed_override` is supplied.
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);

/// key=value text that parse_config maps back to the same config.
std::string render_config(const ExperimentConfig& config);

/// Semantic checks shared by the parser and programmatic callers.
void validate_config(const ExperimentConfig& config);

}  // namespace liebridge
