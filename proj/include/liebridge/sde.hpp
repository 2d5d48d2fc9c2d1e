#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "liebridge/csv.hpp"
#include "liebridge/rng.hpp"
#include "liebridge/spaces.hpp"

namespace liebridge {

/// Uniform grid t_i = i T / k with t_k = T exactly.
class TimeGrid {
 public:
  TimeGrid(double T, int k);
  double T() const { return T_; }
  int steps() const { return k_; }
  double dt() const { return T_ / k_; }
  double t(int i) const { return i == k_ ? T_ : i * (T_ / k_); }

 private:
  double T_;
  int k_;
};

struct SamplePath {
  TimeGrid grid{1.0, 1};
  std::vector<GroupElement> points;     ///< k + 1 states, points[0] is the start
  std::vector<Vector> increments;       ///< raw N(0, dt I) draws driving each step
  double log_phi = 0.0;
  std::uint64_t seed = 0;
  int resamples = 0;                    ///< attempts discarded after a branch error
  int target_index = -1;                ///< k-point bridges: index of the pinned target
};

/// One Stratonovich Heun step. dB are the raw noise draws (frame coordinates), drift is
/// in algebra coordinates; the total increment a = sigma dB + (drift - V0 / 2) dt enters
/// through x (I + H + H^2 / 2), H = hat(a). Abelian groups get x + a. SO(3) results are
/// projected back onto the group.
GroupElement euler_heun_step(const GroupElement& x, const AlgebraVector& drift, const Vector& dB,
                             double dt, const GroupSpec& spec);

SamplePath sample_brownian_motion(const GroupSpec& spec, const TimeGrid& grid, NoiseStream& noise,
                                  const std::optional<GroupElement>& start = std::nullopt);

/// How the importance weight is evaluated.
///  Radial: Jacobian-determinant form, valid when the metric is bi-invariant.
///  General: exact discrete Girsanov weight for the q-normalised guided process; works
///           for any left-invariant metric (derivatives of the squared log-distance by
///           central differences along the driving fields).
///  Auto: zero for abelian groups, Radial for bi-invariant SO(3), General otherwise.
enum class PhiRoute { Auto, Radial, General };

struct BridgeOptions {
  std::optional<GroupElement> start;
  int max_attempts = 100;
  PhiRoute route = PhiRoute::Auto;
};

/// Guided bridge to v: drift log_to(Y_t, v) / (T - t), last step pinned to v, log_phi
/// filled in. A branch error restarts the path with the continuing noise stream;
/// NumericalError after max_attempts failures.
SamplePath sample_guided_bridge(const GroupSpec& spec, const GroupElement& v, const TimeGrid& grid,
                                NoiseStream& noise, const BridgeOptions& options = {});

/// log phi for a guided path to v, left-rectangle over the first k - 1 intervals.
double estimate_log_phi(const SamplePath& path, const GroupElement& v, const GroupSpec& spec,
                        PhiRoute route = PhiRoute::Auto);

/// Radial increment -1/2 d/dlambda log Theta(lambda w) |_{lambda=1} dt / tau for the
/// exponential at a bi-invariant point.
double radial_log_phi_increment(GroupKind kind, const AlgebraVector& w, double dt, double tau);

/// Header for path CSV files: path, t, matrix entries in row-major order, log_phi.
std::vector<std::string> path_csv_header(const GroupSpec& spec);
/// One row per grid point; log_phi is written on the final row only.
void append_path_rows(CsvWriter& csv, const SamplePath& path, int path_index);

}  // namespace liebridge
