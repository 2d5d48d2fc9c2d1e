#include "liebridge/spaces.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>

namespace liebridge {

namespace {

std::vector<Matrix> standard_basis(GroupKind kind, int dim) {
  std::vector<Matrix> basis;
  for (int i = 0; i < dim; ++i) {
    AlgebraVector e = AlgebraVector::Zero(dim);
    e(i) = 1.0;
    basis.push_back(algebra_hat(kind, e));
  }
  return basis;
}

GroupSpec make_group(GroupKind kind, int dim, std::string name, const MetricParam& metric) {
  if (metric.dim() != dim) {
    throw InputError("metric dimension " + std::to_string(metric.dim()) +
                     " does not match group dimension " + std::to_string(dim));
  }
  GroupSpec spec;
  spec.kind = kind;
  spec.dim = dim;
  spec.name = std::move(name);
  spec.metric = metric;
  spec.basis = standard_basis(kind, dim);
  const Matrix& sigma = metric.inv_sqrt();
  for (int i = 0; i < dim; ++i) spec.frame.push_back(algebra_hat(kind, sigma.col(i)));
  spec.structure = kind == GroupKind::Abelian ? StructureCoefficients(dim)
                                              : StructureCoefficients::from_basis(spec.frame);
  spec.v0 = sigma * v0_drift(spec.structure);
  switch (kind) {
    case GroupKind::Abelian:
      spec.bi_invariant = true;
      break;
    case GroupKind::SO3:
      spec.bi_invariant = metric.is_isotropic(1e-12);
      break;
    case GroupKind::GL3:
      spec.bi_invariant = false;
      break;
  }
  return spec;
}

}  // namespace

GroupElement GroupSpec::identity() const {
  if (kind == GroupKind::Abelian) return Matrix::Zero(dim, 1);
  return Matrix::Identity(3, 3);
}

Matrix GroupSpec::field(const GroupElement& x, const AlgebraVector& w) const {
  if (kind == GroupKind::Abelian) return w;
  return x * algebra_hat(kind, w);
}

void GroupSpec::reproject(GroupElement& x) const {
  if (kind == GroupKind::SO3) x = nearest_rotation(Eigen::Matrix3d(x));
}

double GroupSpec::distance(const GroupElement& a, const GroupElement& b) const {
  return std::sqrt(metric.norm_sq(log_to(a, b)));
}

void GroupSpec::check(const GroupElement& g) const {
  switch (kind) {
    case GroupKind::Abelian:
      if (g.rows() != dim || g.cols() != 1) throw InputError(name + ": expected a column vector");
      break;
    case GroupKind::SO3: {
      if (g.rows() != 3 || g.cols() != 3) throw InputError("so3: expected a 3x3 matrix");
      const double err = (g.transpose() * g - Matrix::Identity(3, 3)).norm();
      if (!(err < 1e-9) || g.determinant() <= 0.0) {
        throw InputError("so3: matrix is not a rotation");
      }
      break;
    }
    case GroupKind::GL3:
      if (g.rows() != 3 || g.cols() != 3) throw InputError("gl3: expected a 3x3 matrix");
      if (!(g.determinant() > 0.0)) throw InputError("gl3: determinant must be positive");
      break;
  }
}

GroupSpec so3_spec(const std::optional<MetricParam>& metric) {
  return make_group(GroupKind::SO3, 3, "so3", metric.value_or(MetricParam::identity(3)));
}

GroupSpec gl3_spec(const std::optional<MetricParam>& metric) {
  return make_group(GroupKind::GL3, 9, "gl3", metric.value_or(MetricParam::identity(9)));
}

GroupSpec abelian_spec(int dim, const std::optional<MetricParam>& metric) {
  if (dim < 1) throw InputError("abelian group needs dimension >= 1");
  return make_group(GroupKind::Abelian, dim, "abelian:" + std::to_string(dim),
                    metric.value_or(MetricParam::identity(dim)));
}

GroupSpec with_metric(const GroupSpec& spec, const MetricParam& metric) {
  return make_group(spec.kind, spec.dim, spec.name, metric);
}

Eigen::Matrix3d rot_z(double angle) { return exp_so3(Eigen::Vector3d(0.0, 0.0, angle)); }

Eigen::Matrix3d rot_x(double angle) { return exp_so3(Eigen::Vector3d(angle, 0.0, 0.0)); }

Eigen::Vector3d project_s2(const Eigen::Matrix3d& g) { return g.col(2); }

Eigen::Matrix3d project_spd(const Eigen::Matrix3d& g) { return g * g.transpose(); }

Eigen::Matrix3d s2_section(const Eigen::Vector3d& v) {
  const Eigen::Vector3d n(0.0, 0.0, 1.0);
  if ((v + n).norm() < 1e-8) return rot_x(std::numbers::pi);
  const Eigen::Vector3d axis = n.cross(v);
  const double s = axis.norm();
  if (s < 1e-15) return Eigen::Matrix3d::Identity();
  const double angle = std::atan2(s, n.dot(v));
  return exp_so3(Eigen::Vector3d(angle / s * axis));
}

BasePoint HomogeneousSpec::project(const GroupElement& g) const {
  switch (kind) {
    case QuotientKind::Sphere:
      return project_s2(Eigen::Matrix3d(g));
    case QuotientKind::SPD:
      return project_spd(Eigen::Matrix3d(g));
    case QuotientKind::Circle: {
      const double two_pi = 2.0 * std::numbers::pi;
      double x = std::fmod(g(0, 0), two_pi);
      if (x < 0.0) x += two_pi;
      return Matrix::Constant(1, 1, x);
    }
  }
  return {};
}

BasePoint HomogeneousSpec::origin() const { return project(top.identity()); }

GroupElement HomogeneousSpec::fiber_point(const BasePoint& v, const FiberCoord& s) const {
  check_base_point(v);
  switch (kind) {
    case QuotientKind::Sphere:
      if (s.size() != 1) throw InputError("s2 fiber coordinate is a single angle");
      return s2_section(Eigen::Vector3d(v)) * rot_z(s(0, 0));
    case QuotientKind::SPD: {
      if (s.rows() != 3 || s.cols() != 3) throw InputError("spd fiber coordinate is a rotation");
      const double err = (s.transpose() * s - Matrix::Identity(3, 3)).norm();
      if (!(err < 1e-9) || s.determinant() <= 0.0) {
        throw InputError("spd fiber coordinate is not a rotation");
      }
      return spd_sqrt(Eigen::Matrix3d(v)) * s;
    }
    case QuotientKind::Circle: {
      if (s.size() != 1) throw InputError("circle fiber coordinate is a lattice index");
      return Matrix::Constant(1, 1, v(0, 0) + 2.0 * std::numbers::pi * std::round(s(0, 0)));
    }
  }
  return {};
}

void HomogeneousSpec::check_base_point(const BasePoint& v) const {
  switch (kind) {
    case QuotientKind::Sphere:
      if (v.rows() != 3 || v.cols() != 1) throw InputError("s2 base point must be a 3-vector");
      if (!(std::abs(v.norm() - 1.0) < 1e-9)) throw InputError("s2 base point must be a unit vector");
      break;
    case QuotientKind::SPD: {
      if (v.rows() != 3 || v.cols() != 3) throw InputError("spd base point must be 3x3");
      if (!((v - v.transpose()).norm() < 1e-9 * std::max(1.0, v.norm()))) {
        throw InputError("spd base point must be symmetric");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es{Eigen::Matrix3d(v)};
      if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw InputError("spd base point must be positive definite");
      }
      break;
    }
    case QuotientKind::Circle:
      if (v.size() != 1 || !std::isfinite(v(0, 0))) throw InputError("circle base point is an angle");
      break;
  }
}

double HomogeneousSpec::base_distance(const BasePoint& a, const BasePoint& b) const {
  switch (kind) {
    case QuotientKind::Sphere:
      return std::acos(std::clamp(Eigen::Vector3d(a).dot(Eigen::Vector3d(b)), -1.0, 1.0));
    case QuotientKind::SPD: {
      const Eigen::Matrix3d r = spd_inv_sqrt(Eigen::Matrix3d(a));
      return 0.5 * spd_log(r * Eigen::Matrix3d(b) * r).norm();
    }
    case QuotientKind::Circle: {
      const double two_pi = 2.0 * std::numbers::pi;
      double d = std::fmod(std::abs(a(0, 0) - b(0, 0)), two_pi);
      return std::min(d, two_pi - d);
    }
  }
  return 0.0;
}

HomogeneousSpec s2_space(const std::optional<MetricParam>& metric) {
  HomogeneousSpec spec;
  spec.kind = QuotientKind::Sphere;
  spec.top = so3_spec(metric);
  spec.base_dim = 2;
  spec.fiber_dim = 1;
  spec.name = "s2";
  return spec;
}

HomogeneousSpec spd3_space() {
  HomogeneousSpec spec;
  spec.kind = QuotientKind::SPD;
  spec.top = gl3_spec();
  spec.base_dim = 6;
  spec.fiber_dim = 3;
  spec.name = "spd3";
  return spec;
}

HomogeneousSpec circle_space() {
  HomogeneousSpec spec;
  spec.kind = QuotientKind::Circle;
  spec.top = abelian_spec(1);
  spec.base_dim = 1;
  spec.fiber_dim = 0;
  spec.name = "circle";
  return spec;
}

bool is_valid_space_name(const std::string& name) {
  try {
    space_from_name(name);
    return true;
  } catch (const InputError&) {
    return false;
  }
}

SpaceSelection space_from_name(const std::string& name, const std::optional<MetricParam>& metric) {
  if (name == "so3") return {so3_spec(metric), std::nullopt};
  if (name == "gl3") return {gl3_spec(metric), std::nullopt};
  if (name == "s2") {
    auto q = s2_space(metric);
    return {q.top, q};
  }
  if (name == "spd3") {
    if (metric && (metric->matrix() - Matrix::Identity(metric->dim(), metric->dim())).norm() > 1e-12) {
      throw InputError("spd3 supports only the Frobenius metric on gl(3)");
    }
    auto q = spd3_space();
    return {q.top, q};
  }
  if (name == "circle") {
    auto q = circle_space();
    return {q.top, q};
  }
  if (name.rfind("abelian:", 0) == 0) {
    int d = 0;
    try {
      std::size_t used = 0;
      d = std::stoi(name.substr(8), &used);
      if (used != name.size() - 8) d = 0;
    } catch (const std::exception&) {
      d = 0;
    }
    if (d < 1) throw InputError("abelian space needs a positive dimension, got '" + name + "'");
    return {abelian_spec(d, metric), std::nullopt};
  }
  throw InputError("unknown space '" + name + "' (expected so3, gl3, abelian:d, s2, spd3, circle)");
}

}  // namespace liebridge
