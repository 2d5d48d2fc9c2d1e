#include <cmath>
#include <numbers>

#include "doctest.h"
#include "liebridge/estimators.hpp"
#include "liebridge/sde.hpp"
#include "oracles.hpp"

using namespace liebridge;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

// Heat kernel of the bi-invariant unit metric on SO(3) (generator half the Laplacian), as a
// density against Haar measure normalised to Lebesgue in exponential coordinates (volume 8 pi^2).
double so3_heat_kernel(double theta, double T) {
  double s = 0.0;
  for (int l = 0; l < 200; ++l) {
    const double chi = theta < 1e-8 ? 2.0 * l + 1.0 : std::sin((l + 0.5) * theta) / std::sin(theta / 2);
    s += (2 * l + 1) * std::exp(-0.5 * l * (l + 1) * T) * chi;
  }
  return s / (8.0 * kPi * kPi);
}

// Haar volume of a geodesic ball of radius eps in SO(3).
double so3_ball_volume(double eps) { return 8.0 * kPi * (eps - std::sin(eps)); }

}  // namespace

TEST_CASE("time grid ends exactly at T") {
  const TimeGrid g(0.7, 3);
  CHECK(g.t(0) == 0.0);
  CHECK(g.t(3) == 0.7);
  CHECK(g.dt() == doctest::Approx(0.7 / 3));
  CHECK_THROWS_AS(TimeGrid(0.0, 3), InputError);
  CHECK_THROWS_AS(TimeGrid(1.0, 0), InputError);
}

TEST_CASE("Heun step") {
  const GroupSpec so3 = so3_spec();
  const Matrix x = exp_so3(Vector3d(0.1, 0.2, 0.3));
  CHECK((euler_heun_step(x, Vector::Zero(3), Vector::Zero(3), 0.01, so3) - x).norm() < 1e-15);

  const GroupSpec ab = abelian_spec(3);
  const Vector x0 = Vector3d(1, 2, 3), dB = Vector3d(0.1, -0.2, 0.05), drift = Vector3d(0.5, 0.5, -1);
  CHECK((euler_heun_step(x0, drift, dB, 0.01, ab) - (x0 + dB + drift * 0.01)).norm() == 0.0);

  const double h = 0.01;
  const Matrix step = euler_heun_step(Matrix::Identity(3, 3), Vector::Zero(3), Vector3d(h, 0, 0), 1e-4, so3);
  CHECK((step - exp_so3(Vector3d(h, 0, 0))).norm() < h * h);
  CHECK_THROWS_AS(euler_heun_step(x, Vector::Zero(2), Vector::Zero(3), 0.01, so3), InputError);
}

TEST_CASE("Brownian motion on the abelian group has covariance A^-1 T") {
  const int n = 10000;
  for (const Vector3d diag : {Vector3d(1, 1, 1), Vector3d(4, 1, 1)}) {
    const GroupSpec ab = abelian_spec(3, MetricParam(Matrix(diag.asDiagonal())));
    const TimeGrid grid(1.0, 10);
    Matrix ends(3, n);
    for (int i = 0; i < n; ++i) {
      NoiseStream ns = NoiseStream(99).child("bm", i);
      const SamplePath p = sample_brownian_motion(ab, grid, ns);
      CHECK(p.points.front().norm() == 0.0);
      ends.col(i) = p.points.back();
    }
    const Vector mean = ends.rowwise().mean();
    const Matrix centered = ends.colwise() - mean;
    const Matrix cov = centered * centered.transpose() / (n - 1);
    const Matrix expect = Matrix(diag.cwiseInverse().asDiagonal());
    CHECK((cov - expect).cwiseAbs().maxCoeff() < 0.05);
  }
}

TEST_CASE("SO(3) Brownian motion: short-time spread and orthogonality") {
  const GroupSpec so3 = so3_spec();
  const double T = 0.01;
  const TimeGrid grid(T, 10);
  const int n = 10000;
  double msd = 0.0, worst = 0.0;
  for (int i = 0; i < n; ++i) {
    NoiseStream ns = NoiseStream(5).child("bm", i);
    const SamplePath p = sample_brownian_motion(so3, grid, ns);
    for (const auto& x : p.points) worst = std::max(worst, (x.transpose() * x - Matrix::Identity(3, 3)).norm());
    msd += log_so3(p.points.back()).squaredNorm() / n;
  }
  CHECK(msd == doctest::Approx(3 * T).epsilon(0.1));
  CHECK(worst < 1e-9);

  // longer paths under an anisotropic metric stay orthogonal too
  const GroupSpec aniso = so3_spec(MetricParam(Matrix(Vector3d(0.2, 0.2, 0.8).asDiagonal())));
  NoiseStream ns(8);
  const SamplePath p = sample_brownian_motion(aniso, TimeGrid(5.0, 500), ns);
  worst = 0.0;
  for (const auto& x : p.points) worst = std::max(worst, (x.transpose() * x - Matrix::Identity(3, 3)).norm());
  CHECK(worst < 1e-9);
}

TEST_CASE("guided bridge pins the endpoint and is deterministic") {
  const GroupSpec so3 = so3_spec();
  const Matrix v = rot_z(1.0);
  NoiseStream a(42), b(42);
  const SamplePath p = sample_guided_bridge(so3, v, TimeGrid(1.0, 50), a);
  const SamplePath q = sample_guided_bridge(so3, v, TimeGrid(1.0, 50), b);
  CHECK(p.points.size() == 51);
  CHECK(p.increments.size() == 50);
  CHECK(p.points.back() == v);
  CHECK(p.log_phi == q.log_phi);
  for (std::size_t i = 0; i < p.points.size(); ++i) CHECK(p.points[i] == q.points[i]);

  NoiseStream c(1);
  const SamplePath home = sample_guided_bridge(so3, so3.identity(), TimeGrid(1.0, 20), c);
  CHECK(so3.distance(home.points.back(), so3.identity()) == 0.0);
  CHECK(std::exp(home.log_phi) > 0.0);
}

TEST_CASE("flat reduction: abelian bridge follows the Euclidean recursion step by step") {
  const MetricParam a(Matrix(Vector3d(2.0, 0.5, 1.0).asDiagonal()));
  const GroupSpec ab = abelian_spec(3, a);
  const Vector v = Vector3d(1.0, -0.5, 0.25);
  const TimeGrid grid(1.5, 30);
  NoiseStream ns(3);
  const SamplePath p = sample_guided_bridge(ab, v, grid, ns);
  CHECK(p.log_phi == 0.0);
  Vector y = Vector::Zero(3);
  double worst = 0.0;
  for (int i = 0; i + 1 < grid.steps(); ++i) {
    y = y + a.inv_sqrt() * p.increments[i] + (v - y) / (grid.T() - grid.t(i)) * grid.dt();
    worst = std::max(worst, (y - p.points[i + 1]).norm());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("abelian bridge marginal matches the Brownian-bridge law") {
  const GroupSpec ab = abelian_spec(1);
  const Matrix v = Matrix::Constant(1, 1, 1.0);
  const TimeGrid grid(1.0, 100);
  std::vector<double> mid, mid_sq;
  double sum_phi = 0.0, sum_f = 0.0, sum_f2 = 0.0;
  for (int i = 0; i < 10000; ++i) {
    NoiseStream ns = NoiseStream(77).child("bridge", i);
    const SamplePath p = sample_guided_bridge(ab, v, grid, ns);
    CHECK(p.log_phi == 0.0);
    const double x = p.points[50](0, 0);
    mid.push_back(x);
    const double phi = std::exp(p.log_phi);
    sum_phi += phi;
    sum_f += phi * x;
    sum_f2 += phi * x * x;
  }
  CHECK(oracle::mean(mid) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(oracle::variance(mid) - 0.25) < 0.02);
  // self-normalised importance estimates of E[f(X_{T/2}) | X_T = v]
  const double se_mean = std::sqrt(0.25 / 10000.0);
  CHECK(std::abs(sum_f / sum_phi - 0.5) < 3 * se_mean);
  const double se_sq = std::sqrt((2 * 0.25 * 0.25 + 4 * 0.25 * 0.25) / 10000.0);
  CHECK(std::abs(sum_f2 / sum_phi - 0.5) < 3 * se_sq);
}

TEST_CASE("guided endpoints approach the target at the sqrt(dt) rate") {
  const GroupSpec so3 = so3_spec();
  const Matrix v = rot_z(1.0);
  std::vector<double> med;
  for (int k : {50, 100, 200}) {
    std::vector<double> d;
    for (int i = 0; i < 400; ++i) {
      NoiseStream ns = NoiseStream(12).child("rate", i);
      const SamplePath p = sample_guided_bridge(so3, v, TimeGrid(1.0, k), ns);
      d.push_back(so3.distance(p.points[k - 1], v));
    }
    med.push_back(oracle::median(d));
  }
  for (int j = 0; j < 2; ++j) {
    const double ratio = med[j] / med[j + 1];
    CHECK(ratio > 1.25);
    CHECK(ratio < 1.6);
  }
}

TEST_CASE("radial weight on SO(3) matches the exact heat kernel") {
  const GroupSpec so3 = so3_spec();
  const double T = 1.0;
  const Matrix v = exp_so3(Vector3d(0.1, 0, 0));
  const DensityEstimate est = heat_kernel_is(v, so3.metric, T, 4000, so3, NoiseStream(21), 100);
  const double exact = so3_heat_kernel(0.1, T);
  CHECK(std::abs(est.value - exact) < 3 * est.mc_std_error + 0.01 * exact);
}

TEST_CASE("radial and general weights agree for a bi-invariant metric") {
  const GroupSpec so3 = so3_spec();
  const Matrix v = exp_so3(Vector3d(0.6, -0.4, 0.3));
  const double T = 0.7;
  const int n = 3000;
  double s_rad = 0.0, s_gen = 0.0, s2_rad = 0.0, s2_gen = 0.0;
  double max_drift = 0.0;
  for (int i = 0; i < n; ++i) {
    NoiseStream ns = NoiseStream(4).child("dual", i);
    const SamplePath p = sample_guided_bridge(so3, v, TimeGrid(T, 100), ns);
    const double r = std::exp(estimate_log_phi(p, v, so3, PhiRoute::Radial));
    const double g = std::exp(estimate_log_phi(p, v, so3, PhiRoute::General));
    s_rad += r;
    s_gen += g;
    s2_rad += r * r;
    s2_gen += g * g;
    max_drift = std::max(max_drift, std::abs(std::log(r) - std::log(g)));
  }
  const double m_rad = s_rad / n, m_gen = s_gen / n;
  const double se = std::sqrt((s2_rad / n - m_rad * m_rad + s2_gen / n - m_gen * m_gen) / n);
  CHECK(std::abs(m_rad - m_gen) < 3 * se + 0.01);
  const double exact = so3_heat_kernel(so3.distance(so3.identity(), v), T);
  CHECK(std::abs(q_density(v, so3.metric, T, so3) * m_gen - exact) / exact < 0.05);
}

TEST_CASE("general weight under an anisotropic metric against a kernel-density estimate") {
  const MetricParam a(Matrix(Vector3d(0.5, 0.5, 2.0).asDiagonal()));
  const GroupSpec so3 = so3_spec(a);
  const double T = 0.5;
  const Matrix v = exp_so3(Vector3d(0.3, 0.1, 0.0));
  const double eps = 0.2;
  const int n_bm = 200000;
  std::vector<int> hit(n_bm, 0);
  parallel_for(n_bm, [&](std::size_t i) {
    NoiseStream ns = NoiseStream(31).child("kde", i);
    const SamplePath p = sample_brownian_motion(so3, TimeGrid(T, 50), ns);
    hit[i] = rotation_angle(Matrix3d(v.transpose() * p.points.back())) < eps;
  });
  double count = 0.0;
  for (int h : hit) count += h;
  const double kde = count / (n_bm * so3_ball_volume(eps));
  const double kde_se = std::sqrt(count) / (n_bm * so3_ball_volume(eps));
  const DensityEstimate est = heat_kernel_is(v, a, T, 4000, so3, NoiseStream(32), 100);
  CHECK(std::abs(est.value - kde) < 3 * std::hypot(est.mc_std_error, kde_se) + 0.05 * kde);
}

TEST_CASE("general-weight density integrates to one over SO(3)") {
  // Haar-uniform rotations from unit quaternions; the Haar volume in unit so(3) coordinates is 8 pi^2
  const MetricParam A(Matrix(Vector3d(0.2, 0.2, 1.0).asDiagonal()));
  const GroupSpec spec = so3_spec(A);
  const TimeGrid grid(0.1, 20);
  NoiseStream haar(77);
  const int n = 20000;
  std::vector<double> vals;
  for (int i = 0; i < n; ++i) {
    Eigen::Vector4d q(haar.normal(), haar.normal(), haar.normal(), haar.normal());
    q.normalize();
    const Matrix r = Eigen::Quaterniond(q(0), q(1), q(2), q(3)).toRotationMatrix();
    NoiseStream ns = NoiseStream(5).child("bridge", i);
    vals.push_back(8 * kPi * kPi * std::exp(log_q_density(r, A, 0.1, spec) + sample_guided_bridge(spec, r, grid, ns).log_phi));
  }
  const double se = std::sqrt(oracle::variance(vals) / n);
  CHECK(std::abs(oracle::mean(vals) - 1.0) < 3 * se);
  CHECK(se < 0.05);
}

TEST_CASE("branch errors are retried and then reported") {
  const GroupSpec so3 = so3_spec();
  const Matrix far = exp_so3(Vector3d(0, 0, kPi - 1e-9));
  NoiseStream ns(2);
  BridgeOptions opt;
  opt.max_attempts = 3;
  CHECK_THROWS_AS(sample_guided_bridge(so3, far, TimeGrid(1.0, 10), ns, opt), NumericalError);
  NoiseStream ns2(2);
  CHECK_THROWS_AS(sample_guided_bridge(so3, Matrix(2.0 * Matrix::Identity(3, 3)), TimeGrid(1.0, 10), ns2), InputError);
}

TEST_CASE("path CSV rows") {
  const GroupSpec ab = abelian_spec(2);
  NoiseStream ns(1);
  const SamplePath p = sample_guided_bridge(ab, Vector(Eigen::Vector2d(1, 1)), TimeGrid(1.0, 4), ns);
  CsvWriter csv(path_csv_header(ab));
  append_path_rows(csv, p, 0);
  const auto rows = parse_csv(csv.str());
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == std::vector<std::string>{"path", "t", "x0", "x1", "log_phi"});
  CHECK(rows[1][4].empty());
  CHECK(rows[5][4] == "0");
  CHECK(rows[5][1] == "1");
}
