#pragma once

#include <Eigen/Dense>
#include <vector>

#include "liebridge/error.hpp"

namespace liebridge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Point of a matrix Lie group. SO(3) and GL+(3) use 3x3 matrices; the abelian
/// test group R^d is stored additively as a d x 1 column.
using GroupElement = Eigen::MatrixXd;

/// Coordinates of a Lie-algebra element in the standard basis of the algebra.
using AlgebraVector = Eigen::VectorXd;

enum class GroupKind { Abelian, SO3, GL3 };

// ---------------------------------------------------------------------------
// so(3) and gl(3) coordinates
// ---------------------------------------------------------------------------

/// Skew matrix of a 3-vector: hat(a) * u = a x u.
Eigen::Matrix3d hat(const Eigen::Vector3d& a);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

/// Dynamic-size overloads; throw InputError unless the sizes are 3 / 3x3.
Matrix hat(const Vector& a);
Vector vee(const Matrix& m);

/// gl(3) coordinates are the 9 matrix entries in row-major order (basis E_ij).
Eigen::Matrix3d hat_gl(const Vector& a);
Vector vee_gl(const Eigen::Matrix3d& m);

/// Rodrigues formula; the theta -> 0 limit uses the Taylor coefficients.
Eigen::Matrix3d exp_so3(const Eigen::Vector3d& a);

/// Principal logarithm theta / (2 sin theta) (R - R^T), theta = arccos((tr R - 1) / 2).
///
/// Throws InputError when R is not a rotation (||R^T R - I||_F >= 1e-6 or det <= 0)
/// and BranchError when theta >= pi - 1e-6.
Eigen::Vector3d log_so3(const Eigen::Matrix3d& r);

/// Rotation angle of R in [0, pi]; no branch check.
double rotation_angle(const Eigen::Matrix3d& r);

/// Matrix exponential by scaling and squaring with a Taylor core.
Matrix exp_gl(const Matrix& a);

/// Matrix logarithm by inverse scaling and squaring: at most 12 Denman-Beavers
/// square roots followed by a 20-term Mercator series. The result is checked
/// against exp_gl; a relative residual above 1e-10 raises NumericalError.
Matrix log_gl(const Matrix& g);

/// Nearest rotation (orthogonal polar factor with det +1).
Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m);

/// Principal square root and logarithm of a symmetric positive-definite matrix.
Eigen::Matrix3d spd_sqrt(const Eigen::Matrix3d& p);
Eigen::Matrix3d spd_inv_sqrt(const Eigen::Matrix3d& p);
Eigen::Matrix3d spd_log(const Eigen::Matrix3d& p);

// ---------------------------------------------------------------------------
// Group-generic operations
// ---------------------------------------------------------------------------

int algebra_dim(GroupKind kind, int abelian_dim = 0);
Matrix algebra_hat(GroupKind kind, const AlgebraVector& a);
AlgebraVector algebra_vee(GroupKind kind, const Matrix& m);
GroupElement group_exp(GroupKind kind, const AlgebraVector& a);
AlgebraVector group_log(GroupKind kind, const GroupElement& g);
GroupElement group_compose(GroupKind kind, const GroupElement& a, const GroupElement& b);
GroupElement group_inverse(GroupKind kind, const GroupElement& g);

/// Algebra coordinates of log(y^{-1} v): the left-trivialized logarithm of v
/// seen from y. Propagates BranchError from the underlying logarithm.
AlgebraVector group_log_to(GroupKind kind, const GroupElement& y, const GroupElement& v);

// ---------------------------------------------------------------------------
// Structure coefficients and metric
// ---------------------------------------------------------------------------

/// C^k_ij with [V_i, V_j] = C^k_ij V_k.
class StructureCoefficients {
 public:
  StructureCoefficients() = default;
  explicit StructureCoefficients(int dim);

  /// Brackets of the given algebra matrices, expanded back onto the same basis.
  static StructureCoefficients from_basis(const std::vector<Matrix>& basis);
  /// Levi-Civita symbol: the so(3) structure in the basis A_1, A_2, A_3.
  static StructureCoefficients so3();

  int dim() const { return dim_; }
  double operator()(int k, int i, int j) const { return c_[index(k, i, j)]; }
  double& operator()(int k, int i, int j) { return c_[index(k, i, j)]; }

 private:
  int index(int k, int i, int j) const { return (k * dim_ + i) * dim_ + j; }
  int dim_ = 0;
  std::vector<double> c_;
};

/// Coordinates of V_0 = sum_{i,j} C^j_ij V_i in the frame the coefficients refer to.
Vector v0_drift(const StructureCoefficients& c);

/// Symmetric positive-definite inner product on the Lie algebra.
class MetricParam {
 public:
  MetricParam() = default;
  /// Throws InputError unless A is symmetric (to 1e-12) with positive eigenvalues.
  explicit MetricParam(Matrix a);

  static MetricParam identity(int dim);
  /// Upper triangle in row-major order: (A00, A01, ..., A0d, A11, ...).
  static MetricParam from_upper(const std::vector<double>& upper, int dim);
  std::vector<double> upper() const;

  const Matrix& matrix() const { return a_; }
  int dim() const { return static_cast<int>(a_.rows()); }
  /// Lower-triangular L with L L^T = A^{-1}.
  const Matrix& cholesky_inv() const { return chol_inv_; }
  /// Symmetric A^{-1/2}: the driving-field matrix, noise covariance A^{-1}.
  const Matrix& inv_sqrt() const { return inv_sqrt_; }
  const Matrix& sqrt() const { return sqrt_; }
  double log_det() const { return log_det_; }

  /// u^T A v, evaluated through the cached factor.
  double inner(const Vector& u, const Vector& v) const;
  double norm_sq(const Vector& u) const { return inner(u, u); }
  bool is_isotropic(double tol = 1e-12) const;

  /// Eigenvalue clamp at floor, returning a valid metric.
  static MetricParam project_spd(const Matrix& a, double floor, bool* clamped = nullptr);

 private:
  Matrix a_;
  Matrix chol_inv_;
  Matrix inv_sqrt_;
  Matrix sqrt_;
  double log_det_ = 0.0;
};

/// Jacobian determinant of the group exponential at a, det( (1 - e^{-ad_a}) / ad_a ).
///
/// Abelian: 1. SO(3): (sin(t/2) / (t/2))^2 with t = ||a||_2, BranchError at t >= pi - 1e-6.
/// GL(3): central finite differences of exp with step 1e-5 around each basis direction.
double jacobian_det_exp(GroupKind kind, const AlgebraVector& a);

}  // namespace liebridge
