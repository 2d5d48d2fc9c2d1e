#pragma once

#include <optional>
#include <string>
#include <vector>

#include "liebridge/sde.hpp"

namespace liebridge {

/// Conditioning set in the top group.
struct FiberTarget {
  enum class Kind { Point, Fiber, PointSet };
  Kind kind = Kind::Point;
  GroupElement point;                    ///< Point
  std::optional<HomogeneousSpec> space;  ///< Fiber
  BasePoint base;                        ///< Fiber
  std::vector<GroupElement> points;      ///< PointSet
  std::vector<double> log_c;             ///< PointSet

  static FiberTarget at_point(GroupElement v);
  static FiberTarget over(const HomogeneousSpec& space, BasePoint v);
  static FiberTarget point_set(std::vector<GroupElement> points, std::vector<double> log_c);

  /// Throws InputError when the invariants of the active variant fail.
  void validate(const GroupSpec& spec) const;
};

struct NearestPoint {
  GroupElement point;
  FiberCoord coord;
  AlgebraVector log_to;   ///< log(y^{-1} point): the guiding direction
  double distance = 0.0;  ///< ||log_to||_A
  bool tie = false;       ///< another minimiser within 1e-9 in distance
};

/// Fiber coordinate of a group element known to lie over v (inverse of fiber_point).
FiberCoord fiber_coordinate(const HomogeneousSpec& space, const BasePoint& v, const GroupElement& g);

/// Closest point of pi^{-1}(v) to y in the top-group metric.
///  S^2: 64-point scan of the fiber angle, golden-section refinement, 3 Newton steps.
///  SPD: horizontal geodesic, exact: S = log(y^{-1} V y^{-T}) / 2, point y exp(S).
///  circle: nearest lattice point.
NearestPoint nearest_fiber_point(const GroupElement& y, const HomogeneousSpec& space,
                                 const BasePoint& v);

/// Radial weight increment for the distance to the fiber: -1/2 d/dlambda log Theta_N
/// at lambda = 1, times dt / tau. Theta_N is the Jacobian of the base exponential:
/// sin r / r on S^2, prod_{i<j} sinh(d_ij) / d_ij on SPD(3) (d_ij eigenvalue gaps of the
/// horizontal log), 1 on the circle.
double fermi_log_phi_increment(const HomogeneousSpec& space, const GroupElement& y,
                               const NearestPoint& nearest, double dt, double tau);

/// log of (2 pi T)^{-n/2} a^{n/2} exp(-rho_N(start) / (2T)), n the base dimension and a the
/// isotropic metric scale: the Gaussian factor of the fiber-conditioned density.
double fermi_log_q(const HomogeneousSpec& space, const BasePoint& v, double T,
                   const std::optional<GroupElement>& start = std::nullopt);

/// Fermi bridge: drift toward the nearest fiber point, recomputed every step; the last
/// step is pinned to the nearest point. Requires an isotropic metric on S^2 and the
/// Frobenius metric on SPD(3) (the weight assumes the fibers are isometry orbits).
SamplePath sample_fermi_bridge(const HomogeneousSpec& space, const BasePoint& v,
                               const TimeGrid& grid, NoiseStream& noise,
                               const BridgeOptions& options = {});

/// Normalised drift weights w_i proportional to exp(log_c_i - rho_i / (2 tau)).
Vector kpoint_weights(const GroupSpec& spec, const GroupElement& y, const FiberTarget& target,
                      double tau);

/// Bridge guided toward the weighted set {v_i}; ends at the target with the largest
/// final weight (recorded in target_index). log_phi is left at 0: the c_i carry the
/// correction. All weights underflowing raises NumericalError.
SamplePath sample_kpoint_bridge(const GroupSpec& spec, const FiberTarget& target,
                                const TimeGrid& grid, NoiseStream& noise,
                                const BridgeOptions& options = {});

struct ProjectedPath {
  TimeGrid grid{1.0, 1};
  std::vector<BasePoint> points;
  double log_phi = 0.0;
};
ProjectedPath project_path(const SamplePath& path, const HomogeneousSpec& space);

// ---------------------------------------------------------------------------
// Stochastic Metropolis-Hastings over fiber points
// ---------------------------------------------------------------------------

struct MHOptions {
  double T = 1.0;
  int steps = 50;              ///< time steps of each c-estimating bridge
  double proposal_scale = 0.3; ///< fiber-angle sd (S^2), so(3) step sd (SPD), lattice step sd
  int lattice_points = 5;      ///< circle: truncation to the nearest points to the start
  int grid_angles = 0;         ///< S^2: > 0 restricts the fiber to this many equal angles
  int zero_accept_window = 200;
  std::optional<GroupElement> start;
};

struct MHEntry {
  FiberCoord coord;
  GroupElement point;
  double log_c = 0.0;
  bool accepted = false;
};

struct MHResult {
  std::vector<MHEntry> chain;  ///< one entry per iteration; rejections repeat the state
  int accepted = 0;
  std::vector<std::string> warnings;
};

/// Algorithm: propose u from a symmetric kernel on the fiber coordinate, estimate
/// log c_u as the log-mean weight of bridges_per_eval guided bridges to u, and accept
/// with min{1, q_T(x0, u) c_u / (q_T(x0, v_i) c_i)}. Proposals equal to the current
/// state are accepted without re-estimation.
MHResult mh_fiber_sampler(const HomogeneousSpec& space, const BasePoint& v, int iterations,
                          int bridges_per_eval, NoiseStream& noise, const MHOptions& options = {});

std::vector<std::string> chain_csv_header(const HomogeneousSpec& space);
void append_chain_rows(CsvWriter& csv, const MHResult& result);

}  // namespace liebridge
