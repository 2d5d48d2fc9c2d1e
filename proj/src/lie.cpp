#include "liebridge/lie.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace liebridge {

namespace {

constexpr double kBranchMargin = 1e-6;
constexpr double kOrthoTol = 1e-6;

}  // namespace

Eigen::Matrix3d hat(const Eigen::Vector3d& a) {
  Eigen::Matrix3d m;
  // clang-format off
  m <<     0, -a(2),  a(1),
        a(2),     0, -a(0),
       -a(1),  a(0),     0;
  // clang-format on
  return m;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Matrix hat(const Vector& a) {
  if (a.size() != 3) {
    throw InputError("hat: expected a 3-vector, got size " + std::to_string(a.size()));
  }
  return hat(Eigen::Vector3d(a));
}

Vector vee(const Matrix& m) {
  if (m.rows() != 3 || m.cols() != 3) {
    throw InputError("vee: expected a 3x3 matrix");
  }
  return vee(Eigen::Matrix3d(m));
}

Eigen::Matrix3d hat_gl(const Vector& a) {
  if (a.size() != 9) {
    throw InputError("hat_gl: expected 9 coordinates, got " + std::to_string(a.size()));
  }
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = a(3 * i + j);
  }
  return m;
}

Vector vee_gl(const Eigen::Matrix3d& m) {
  Vector a(9);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) a(3 * i + j) = m(i, j);
  }
  return a;
}

Eigen::Matrix3d exp_so3(const Eigen::Vector3d& a) {
  const double theta2 = a.squaredNorm();
  const double theta = std::sqrt(theta2);
  double s;  // sin(theta) / theta
  double c;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-4) {
    s = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    c = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    s = std::sin(theta) / theta;
    c = (1.0 - std::cos(theta)) / theta2;
  }
  const Eigen::Matrix3d k = hat(a);
  return Eigen::Matrix3d::Identity() + s * k + c * k * k;
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (r.trace() - 1.0));
}

Eigen::Vector3d log_so3(const Eigen::Matrix3d& r) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).norm();
  if (!(ortho < kOrthoTol) || r.determinant() <= 0.0) {
    std::ostringstream msg;
    msg << "log_so3: input is not a rotation (||R^T R - I||_F = " << ortho << ")";
    throw InputError(msg.str());
  }
  // w = vee(R - R^T) = 2 sin(theta) * axis
  const Eigen::Vector3d w(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * w.norm();
  const double theta = std::atan2(s, 0.5 * (r.trace() - 1.0));
  if (theta >= std::numbers::pi - kBranchMargin) {
    std::ostringstream msg;
    msg << "log_so3: rotation angle " << theta << " is on the cut locus";
    throw BranchError(msg.str());
  }
  const double factor = s < 1e-8 ? 1.0 + theta * theta / 6.0 : theta / s;
  return 0.5 * factor * w;
}

Matrix exp_gl(const Matrix& a) {
  if (a.rows() != a.cols()) throw InputError("exp_gl: matrix must be square");
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const Matrix b = a / std::ldexp(1.0, squarings);
  const auto n = a.rows();
  Matrix result = Matrix::Identity(n, n);
  Matrix term = Matrix::Identity(n, n);
  for (int k = 1; k <= 16; ++k) {
    term = term * b / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < squarings; ++i) result = result * result;
  return result;
}

namespace {

Matrix denman_beavers_sqrt(const Matrix& g) {
  const auto n = g.rows();
  Matrix y = g;
  Matrix z = Matrix::Identity(n, n);
  for (int it = 0; it < 50; ++it) {
    const Matrix y_inv = y.inverse();
    const Matrix z_inv = z.inverse();
    const Matrix y_next = 0.5 * (y + z_inv);
    z = 0.5 * (z + y_inv);
    const double delta = (y_next - y).norm();
    y = y_next;
    if (delta <= 1e-15 * y.norm()) break;
  }
  return y;
}

}  // namespace

Matrix log_gl(const Matrix& g) {
  if (g.rows() != g.cols()) throw InputError("log_gl: matrix must be square");
  const auto n = g.rows();
  const Matrix id = Matrix::Identity(n, n);
  Matrix x = g;
  int roots = 0;
  while ((x - id).norm() >= 0.25 && roots < 12) {
    x = denman_beavers_sqrt(x);
    ++roots;
  }
  const Matrix e = x - id;
  Matrix power = e;
  Matrix series = Matrix::Zero(n, n);
  for (int k = 1; k <= 20; ++k) {
    series += ((k % 2 == 1) ? 1.0 : -1.0) / static_cast<double>(k) * power;
    power = power * e;
  }
  Matrix result = std::ldexp(1.0, roots) * series;
  const double residual = (exp_gl(result) - g).norm() / g.norm();
  if (!(residual <= 1e-10)) {
    std::ostringstream msg;
    msg << "log_gl: inverse scaling and squaring did not converge (relative residual "
        << residual << " after " << roots << " square roots)";
    throw NumericalError(msg.str());
  }
  return result;
}

Eigen::Matrix3d nearest_rotation(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

namespace {

template <typename F>
Eigen::Matrix3d spd_function(const Eigen::Matrix3d& p, F&& f, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (p + p.transpose()));
  const Eigen::Vector3d lambda = es.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) {
    throw InputError(std::string(who) + ": matrix is not positive definite");
  }
  const Eigen::Vector3d mapped = lambda.unaryExpr(f);
  return es.eigenvectors() * mapped.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::Matrix3d spd_sqrt(const Eigen::Matrix3d& p) {
  return spd_function(p, [](double x) { return std::sqrt(x); }, "spd_sqrt");
}

Eigen::Matrix3d spd_inv_sqrt(const Eigen::Matrix3d& p) {
  return spd_function(p, [](double x) { return 1.0 / std::sqrt(x); }, "spd_inv_sqrt");
}

Eigen::Matrix3d spd_log(const Eigen::Matrix3d& p) {
  return spd_function(p, [](double x) { return std::log(x); }, "spd_log");
}

int algebra_dim(GroupKind kind, int abelian_dim) {
  switch (kind) {
    case GroupKind::Abelian:
      if (abelian_dim < 1) throw InputError("abelian group needs dimension >= 1");
      return abelian_dim;
    case GroupKind::SO3:
      return 3;
    case GroupKind::GL3:
      return 9;
  }
  return 0;
}

Matrix algebra_hat(GroupKind kind, const AlgebraVector& a) {
  switch (kind) {
    case GroupKind::Abelian:
      return a;
    case GroupKind::SO3:
      return hat(a);
    case GroupKind::GL3:
      return hat_gl(a);
  }
  return {};
}

AlgebraVector algebra_vee(GroupKind kind, const Matrix& m) {
  switch (kind) {
    case GroupKind::Abelian:
      if (m.cols() != 1) throw InputError("abelian algebra elements are column vectors");
      return m.col(0);
    case GroupKind::SO3:
      return vee(m);
    case GroupKind::GL3:
      if (m.rows() != 3 || m.cols() != 3) throw InputError("vee_gl: expected a 3x3 matrix");
      return vee_gl(m);
  }
  return {};
}

GroupElement group_exp(GroupKind kind, const AlgebraVector& a) {
  switch (kind) {
    case GroupKind::Abelian:
      return a;
    case GroupKind::SO3:
      if (a.size() != 3) throw InputError("exp_so3: expected a 3-vector");
      return exp_so3(Eigen::Vector3d(a));
    case GroupKind::GL3:
      return exp_gl(hat_gl(a));
  }
  return {};
}

AlgebraVector group_log(GroupKind kind, const GroupElement& g) {
  switch (kind) {
    case GroupKind::Abelian:
      return g.col(0);
    case GroupKind::SO3:
      if (g.rows() != 3 || g.cols() != 3) throw InputError("log_so3: expected a 3x3 matrix");
      return log_so3(Eigen::Matrix3d(g));
    case GroupKind::GL3:
      if (g.rows() != 3 || g.cols() != 3) throw InputError("log_gl: expected a 3x3 matrix");
      if (!(g.determinant() > 0.0)) throw InputError("log_gl: determinant must be positive");
      return vee_gl(Eigen::Matrix3d(log_gl(g)));
  }
  return {};
}

GroupElement group_compose(GroupKind kind, const GroupElement& a, const GroupElement& b) {
  return kind == GroupKind::Abelian ? GroupElement(a + b) : GroupElement(a * b);
}

GroupElement group_inverse(GroupKind kind, const GroupElement& g) {
  switch (kind) {
    case GroupKind::Abelian:
      return -g;
    case GroupKind::SO3:
      return g.transpose();
    case GroupKind::GL3:
      return g.inverse();
  }
  return {};
}

AlgebraVector group_log_to(GroupKind kind, const GroupElement& y, const GroupElement& v) {
  return group_log(kind, group_compose(kind, group_inverse(kind, y), v));
}

StructureCoefficients::StructureCoefficients(int dim)
    : dim_(dim), c_(static_cast<std::size_t>(dim) * dim * dim, 0.0) {}

StructureCoefficients StructureCoefficients::from_basis(const std::vector<Matrix>& basis) {
  const int d = static_cast<int>(basis.size());
  StructureCoefficients out(d);
  if (d == 0) return out;
  const auto entries = basis.front().size();
  Matrix flat(entries, d);
  for (int i = 0; i < d; ++i) {
    flat.col(i) = basis[static_cast<std::size_t>(i)].reshaped();
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(flat);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const Matrix& a = basis[static_cast<std::size_t>(i)];
      const Matrix& b = basis[static_cast<std::size_t>(j)];
      // Column-vector (abelian) bases commute.
      if (a.cols() == 1) continue;
      const Matrix bracket = a * b - b * a;
      const Vector coords = qr.solve(Vector(bracket.reshaped()));
      for (int k = 0; k < d; ++k) out(k, i, j) = coords(k);
    }
  }
  return out;
}

StructureCoefficients StructureCoefficients::so3() {
  StructureCoefficients out(3);
  out(2, 0, 1) = 1.0;
  out(0, 1, 2) = 1.0;
  out(1, 2, 0) = 1.0;
  out(2, 1, 0) = -1.0;
  out(0, 2, 1) = -1.0;
  out(1, 0, 2) = -1.0;
  return out;
}

Vector v0_drift(const StructureCoefficients& c) {
  const int d = c.dim();
  Vector v = Vector::Zero(d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) v(i) += c(j, i, j);
  }
  return v;
}

MetricParam::MetricParam(Matrix a) {
  if (a.rows() != a.cols() || a.rows() == 0) throw InputError("metric must be a square matrix");
  if (!a.allFinite()) throw InputError("metric has non-finite entries");
  if ((a - a.transpose()).norm() >= 1e-12) throw InputError("metric is not symmetric");
  a_ = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(a_);
  const Vector lambda = es.eigenvalues();
  if (!(lambda.minCoeff() > 0.0)) throw InputError("metric is not positive definite");
  const Matrix& q = es.eigenvectors();
  inv_sqrt_ = q * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
  sqrt_ = q * lambda.cwiseSqrt().asDiagonal() * q.transpose();
  const Matrix a_inv = q * lambda.cwiseInverse().asDiagonal() * q.transpose();
  chol_inv_ = Eigen::LLT<Matrix>(0.5 * (a_inv + a_inv.transpose())).matrixL();
  log_det_ = lambda.array().log().sum();
}

MetricParam MetricParam::identity(int dim) { return MetricParam(Matrix::Identity(dim, dim)); }

MetricParam MetricParam::from_upper(const std::vector<double>& upper, int dim) {
  const auto expected = static_cast<std::size_t>(dim * (dim + 1) / 2);
  if (upper.size() != expected) {
    throw InputError("metric upper triangle needs " + std::to_string(expected) + " entries, got " +
                     std::to_string(upper.size()));
  }
  Matrix a(dim, dim);
  std::size_t n = 0;
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      a(i, j) = upper[n];
      a(j, i) = upper[n];
      ++n;
    }
  }
  return MetricParam(a);
}

std::vector<double> MetricParam::upper() const {
  std::vector<double> out;
  for (int i = 0; i < dim(); ++i) {
    for (int j = i; j < dim(); ++j) out.push_back(a_(i, j));
  }
  return out;
}

double MetricParam::inner(const Vector& u, const Vector& v) const {
  // A = L^{-T} L^{-1}, so u^T A v = (L^{-1} u) . (L^{-1} v).
  const auto lower = chol_inv_.triangularView<Eigen::Lower>();
  const Vector lu = lower.solve(u);
  const Vector lv = lower.solve(v);
  return lu.dot(lv);
}

bool MetricParam::is_isotropic(double tol) const {
  const double mean = a_.trace() / dim();
  return (a_ - mean * Matrix::Identity(dim(), dim())).norm() <= tol * std::abs(mean) * dim();
}

MetricParam MetricParam::project_spd(const Matrix& a, double floor, bool* clamped) {
  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  Vector lambda = es.eigenvalues();
  bool hit = false;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (!(lambda(i) >= floor)) {
      lambda(i) = floor;
      hit = true;
    }
  }
  if (clamped != nullptr) *clamped = hit;
  Matrix out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose());
  return MetricParam(out);
}

double jacobian_det_exp(GroupKind kind, const AlgebraVector& a) {
  switch (kind) {
    case GroupKind::Abelian:
      return 1.0;
    case GroupKind::SO3: {
      const double t = a.norm();
      if (t >= std::numbers::pi - kBranchMargin) {
        throw BranchError("jacobian_det_exp: radius on the SO(3) cut locus");
      }
      if (t < 1e-4) return 1.0 - t * t / 12.0;
      const double s = std::sin(0.5 * t) / (0.5 * t);
      return s * s;
    }
    case GroupKind::GL3: {
      constexpr double h = 1e-5;
      const Eigen::Matrix3d base = hat_gl(a);
      const Eigen::Matrix3d exp_neg = exp_gl(-base);
      Matrix jac(9, 9);
      for (int k = 0; k < 9; ++k) {
        Eigen::Matrix3d e = Eigen::Matrix3d::Zero();
        e(k / 3, k % 3) = h;
        const Eigen::Matrix3d diff = exp_gl(base + e) - exp_gl(base - e);
        jac.col(k) = vee_gl(Eigen::Matrix3d(exp_neg * diff / (2.0 * h)));
      }
      return jac.determinant();
    }
  }
  return 0.0;
}

}  // namespace liebridge
