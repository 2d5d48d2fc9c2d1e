#pragma once

#include <optional>
#include <string>
#include <vector>

#include "liebridge/lie.hpp"

namespace liebridge {

/// A matrix Lie group together with a left-invariant metric.
///
/// The driving fields of Brownian motion are the left-invariant extensions of
/// frame[i] = hat(sigma e_i) with sigma = A^{-1/2}; they are orthonormal for A,
/// so the noise covariance per unit time is A^{-1} in algebra coordinates.
struct GroupSpec {
  GroupKind kind = GroupKind::SO3;
  int dim = 3;
  std::string name;
  MetricParam metric;
  std::vector<Matrix> basis;        ///< standard algebra basis, orthonormal for A = I
  std::vector<Matrix> frame;        ///< driving fields at the identity
  StructureCoefficients structure;  ///< brackets of the frame
  AlgebraVector v0;                 ///< V_0 in algebra coordinates
  bool bi_invariant = true;

  GroupElement identity() const;
  GroupElement compose(const GroupElement& a, const GroupElement& b) const {
    return group_compose(kind, a, b);
  }
  GroupElement inverse(const GroupElement& g) const { return group_inverse(kind, g); }
  GroupElement exp(const AlgebraVector& a) const { return group_exp(kind, a); }
  AlgebraVector log(const GroupElement& g) const { return group_log(kind, g); }
  AlgebraVector log_to(const GroupElement& y, const GroupElement& v) const {
    return group_log_to(kind, y, v);
  }
  Matrix hat(const AlgebraVector& a) const { return algebra_hat(kind, a); }

  /// Left-invariant field with algebra value w evaluated at x: x * hat(w), or w when abelian.
  Matrix field(const GroupElement& x, const AlgebraVector& w) const;

  /// Pull an SO(3) state back onto the group (polar projection); no-op elsewhere.
  void reproject(GroupElement& x) const;

  /// ||log(a^{-1} b)||_A.
  double distance(const GroupElement& a, const GroupElement& b) const;

  /// Throws InputError when g violates the group's invariants.
  void check(const GroupElement& g) const;
};

GroupSpec so3_spec(const std::optional<MetricParam>& metric = std::nullopt);
GroupSpec gl3_spec(const std::optional<MetricParam>& metric = std::nullopt);
GroupSpec abelian_spec(int dim, const std::optional<MetricParam>& metric = std::nullopt);
GroupSpec with_metric(const GroupSpec& spec, const MetricParam& metric);

/// Point of a homogeneous space: unit 3-vector (S^2), SPD 3x3 matrix (SPD(3)), or
/// a 1x1 angle in [0, 2 pi) for the circle R / 2 pi Z.
using BasePoint = Eigen::MatrixXd;

/// Fiber coordinate: angle (S^2, 1x1), rotation matrix (SPD, 3x3), integer lattice
/// index stored as a 1x1 double (circle).
using FiberCoord = Eigen::MatrixXd;

enum class QuotientKind { Sphere, SPD, Circle };

/// Quotient G/K with the projection g -> g . x_0 and a parametrization of each fiber.
struct HomogeneousSpec {
  QuotientKind kind = QuotientKind::Sphere;
  GroupSpec top;
  int base_dim = 2;
  int fiber_dim = 1;
  std::string name;

  BasePoint project(const GroupElement& g) const;
  /// pi(e): north pole, identity matrix, or angle 0.
  BasePoint origin() const;
  GroupElement fiber_point(const BasePoint& v, const FiberCoord& s) const;
  /// Throws InputError when v is not a valid base point.
  void check_base_point(const BasePoint& v) const;
  /// Geodesic distance on the base space (unit sphere, affine-invariant SPD with the
  /// scale induced by the top metric, circle arc).
  double base_distance(const BasePoint& a, const BasePoint& b) const;
  bool discrete_fiber() const { return kind == QuotientKind::Circle; }
};

HomogeneousSpec s2_space(const std::optional<MetricParam>& metric = std::nullopt);
/// GL+(3)/SO(3) with the Frobenius left-invariant metric on gl(3).
HomogeneousSpec spd3_space();
/// R / 2 pi Z over the abelian group R; fibers are lattices v + 2 pi Z.
HomogeneousSpec circle_space();

/// g * (0, 0, 1).
Eigen::Vector3d project_s2(const Eigen::Matrix3d& g);
/// g g^T.
Eigen::Matrix3d project_spd(const Eigen::Matrix3d& g);
/// Canonical section: rotation about n x v by arccos<n, v>; axis e_1 when v is
/// within 1e-8 of the south pole.
Eigen::Matrix3d s2_section(const Eigen::Vector3d& v);
Eigen::Matrix3d rot_z(double angle);
Eigen::Matrix3d rot_x(double angle);

/// Group or quotient selected by a config name: "so3", "gl3", "abelian:d", "s2",
/// "spd3", "circle".
struct SpaceSelection {
  GroupSpec group;
  std::optional<HomogeneousSpec> quotient;
};
SpaceSelection space_from_name(const std::string& name,
                               const std::optional<MetricParam>& metric = std::nullopt);
bool is_valid_space_name(const std::string& name);

}  // namespace liebridge
