#pragma once

#include <map>
#include <string>
#include <vector>

#include "liebridge/config.hpp"
#include "liebridge/spaces.hpp"

namespace liebridge {

struct FileRecord {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunManifest {
  ExperimentConfig config;
  std::string version;
  std::vector<FileRecord> files;      ///< every emitted artifact except manifest.json itself
  double wall_time_s = 0.0;
  std::map<std::string, double> summary;
  std::vector<std::string> warnings;
};

/// Runs the configured experiment, writes its artifacts and manifest.json into
/// config.output_dir, and returns the manifest.
RunManifest run_experiment(const ExperimentConfig& config);

std::string manifest_json(const RunManifest& manifest);
std::string sha256_hex(const std::string& data);

/// Group-element literal: identity | rx:a | ry:a | rz:a | rotvec:a,b,c | vec:x1,...,xd |
/// diag:a,b,c | mat:m00,...,m22 (row-major).
GroupElement parse_group_literal(const std::string& literal, const GroupSpec& spec);

/// Base-point literal: identity | north | s2:x,y,z (normalised) | polar:theta,phi |
/// angle:x | diag:a,b,c | mat:m00,...,m22.
BasePoint parse_base_literal(const std::string& literal, const HomogeneousSpec& space);

/// The space named in the config with its metric applied.
SpaceSelection configured_space(const ExperimentConfig& config);

}  // namespace liebridge
