#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "liebridge/estimators.hpp"
#include "oracles.hpp"

using namespace liebridge;
using Eigen::Matrix3d;
using Eigen::Vector3d;

namespace {

constexpr double kPi = std::numbers::pi;

double so3_heat_kernel(double theta, double T) {
  double s = 0.0;
  for (int l = 0; l < 200; ++l) {
    const double chi = theta < 1e-8 ? 2.0 * l + 1.0 : std::sin((l + 0.5) * theta) / std::sin(theta / 2);
    s += (2 * l + 1) * std::exp(-0.5 * l * (l + 1) * T) * chi;
  }
  return s / (8.0 * kPi * kPi);
}

// Spherical heat kernel for generator half the Laplacian, via the library Legendre polynomials.
double s2_series(double theta, double T, int L) {
  double s = 0.0;
  for (int l = 0; l <= L; ++l) s += (2 * l + 1) * std::exp(-0.5 * l * (l + 1) * T) * std::legendre(l, std::cos(theta));
  return s / (4 * kPi);
}

std::vector<GroupElement> abelian_data(const Vector3d& diag, int n, double T, std::uint64_t seed) {
  const GroupSpec ab = abelian_spec(3, MetricParam(Matrix(diag.asDiagonal())));
  std::vector<GroupElement> out;
  for (int i = 0; i < n; ++i) {
    NoiseStream ns = NoiseStream(seed).child("data", i);
    out.push_back(sample_brownian_motion(ab, TimeGrid(T, 1), ns).points.back());
  }
  return out;
}

}  // namespace

TEST_CASE("q density") {
  const GroupSpec so3 = so3_spec();
  CHECK(q_density(so3.identity(), so3.metric, 1.0, so3) == doctest::Approx(std::pow(2 * kPi, -1.5)).epsilon(1e-12));
  const GroupSpec ab = abelian_spec(3);
  CHECK(q_density(Vector(Vector3d(1, 0, 0)), ab.metric, 1.0, ab) ==
        doctest::Approx(std::pow(2 * kPi, -1.5) * std::exp(-0.5)).epsilon(1e-12));
  const MetricParam four(Matrix(4.0 * Matrix::Identity(3, 3)));
  CHECK(q_density(so3.identity(), four, 1.0, so3) == doctest::Approx(8 * std::pow(2 * kPi, -1.5)).epsilon(1e-12));
  CHECK_THROWS_AS(q_density(so3.identity(), so3.metric, 0.0, so3), InputError);
}

TEST_CASE("heat_kernel_is is exact on the abelian group") {
  const GroupSpec ab = abelian_spec(3);
  const DensityEstimate e = heat_kernel_is(Vector(Vector3d(1, 0, 0)), ab.metric, 1.0, 64, ab, NoiseStream(1));
  CHECK(e.value == doctest::Approx(0.0385138).epsilon(1e-5));
  CHECK(e.mc_std_error < 1e-15);

  // normalisation over a grid in d = 1
  const GroupSpec line = abelian_spec(1, MetricParam(Matrix::Constant(1, 1, 2.0)));
  double integral = 0.0;
  const double h = 0.05;
  for (int j = -200; j <= 200; ++j) {
    const double w = (j == -200 || j == 200) ? 0.5 : 1.0;
    integral += w * h * heat_kernel_is(Matrix::Constant(1, 1, j * h), line.metric, 1.5, 4, line, NoiseStream(2), 20).value;
  }
  CHECK(std::abs(integral - 1.0) < 0.02);
}

TEST_CASE("heat_kernel_is on SO(3) against the exact series") {
  const GroupSpec so3 = so3_spec();
  const Matrix v = rot_z(0.5);
  const DensityEstimate e = heat_kernel_is(v, so3.metric, 0.5, 2000, so3, NoiseStream(3), 100);
  CHECK(std::abs(e.value / so3_heat_kernel(0.5, 0.5) - 1.0) < 0.1);
}

TEST_CASE("log-likelihood oracles") {
  const GroupSpec ab = abelian_spec(3);
  std::vector<GroupElement> zeros(10, Vector::Zero(3));
  CHECK(log_likelihood(zeros, ab.metric, 2.0, 3, ab, NoiseStream(1)) ==
        doctest::Approx(10 * -1.5 * std::log(2 * kPi * 2.0)).epsilon(1e-12));

  // a single observation in d = 1: argmax over scalar A is T / v^2
  const GroupSpec line = abelian_spec(1);
  const std::vector<GroupElement> one{Matrix::Constant(1, 1, 0.8)};
  const double T = 0.5;
  double best = -1e300, arg = 0.0;
  for (double a = 0.05; a < 3.0; a += 0.001) {
    const double l = log_likelihood(one, MetricParam(Matrix::Constant(1, 1, a)), T, 1, line, NoiseStream(1), 5);
    if (l > best) {
      best = l;
      arg = a;
    }
  }
  CHECK(arg == doctest::Approx(T / 0.64).epsilon(0.05));
}

TEST_CASE("SO(3): the true metric beats the identity on simulated data") {
  const MetricParam truth(Matrix(Vector3d(0.2, 0.2, 0.8).asDiagonal()));
  const GroupSpec so3 = so3_spec();
  const GroupSpec true_spec = so3_spec(truth);
  int wins = 0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    std::vector<GroupElement> data;
    for (int i = 0; i < 128; ++i) {
      NoiseStream ns = NoiseStream(100 + s).child("data", i);
      data.push_back(sample_brownian_motion(true_spec, TimeGrid(0.1, 20), ns).points.back());
    }
    const NoiseStream noise(200 + s);
    wins += log_likelihood(data, truth, 0.1, 4, so3, noise) > log_likelihood(data, MetricParam::identity(3), 0.1, 4, so3, noise);
  }
  CHECK(wins >= 9);
}

TEST_CASE("metric MLE on the abelian group") {
  const GroupSpec ab = abelian_spec(3);
  MLEOptions opt;
  opt.T = 1.0;
  opt.steps = 2;
  const auto data = abelian_data(Vector3d(4, 1, 1), 500, 1.0, 7);

  const MLETrace k0 = metric_mle(data, MetricParam::identity(3), 0.1, 0, 1, ab, NoiseStream(1), opt);
  REQUIRE(k0.iterations.size() == 1);
  CHECK(k0.iterations[0].theta == Matrix::Identity(3, 3));

  // closed-form oracle A = T * inverse sample second moment (mean known to be 0)
  Matrix m2 = Matrix::Zero(3, 3);
  for (const auto& x : data) m2 += x * x.transpose() / data.size();
  const Matrix closed = m2.inverse();

  const MLETrace tr = metric_mle(data, MetricParam::identity(3), 2.0, 100, 1, ab, NoiseStream(1), opt);
  REQUIRE(tr.iterations.size() == 101);
  const Matrix& fin = tr.iterations.back().theta;
  const Vector3d truth(4, 1, 1);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(fin(i, i) / truth(i) - 1.0) < 0.15);
  // the likelihood is deterministic here, so the ascent never goes downhill
  for (std::size_t i = 1; i < tr.iterations.size(); ++i) CHECK(tr.iterations[i].loglik >= tr.iterations[i - 1].loglik - 1e-9);

  // rescaling the data by s rescales the estimate by 1 / s^2; the smaller
  // off-diagonal curvature bound at the new optimum needs eta below 1.5
  const double s = std::sqrt(2.0);
  std::vector<GroupElement> scaled;
  for (const auto& x : data) scaled.push_back(s * x);
  const MLETrace ts = metric_mle(scaled, MetricParam::identity(3), 1.0, 150, 1, ab, NoiseStream(1), opt);
  const Matrix& fs = ts.iterations.back().theta;
  for (int i = 0; i < 3; ++i) CHECK(std::abs(fs(i, i) / (closed(i, i) / (s * s)) - 1.0) < 0.1);
}

TEST_CASE("median log-likelihood trace increases over seeds") {
  const GroupSpec ab = abelian_spec(3);
  MLEOptions opt;
  opt.steps = 2;
  std::vector<double> gain;
  for (int s = 0; s < 20; ++s) {
    const auto data = abelian_data(Vector3d(2, 1, 0.5), 60, 1.0, 300 + s);
    const MLETrace tr = metric_mle(data, MetricParam::identity(3), 1.0, 10, 1, ab, NoiseStream(s), opt);
    gain.push_back(tr.iterations.back().loglik - tr.iterations.front().loglik);
  }
  CHECK(oracle::median(gain) > 0.0);
}

TEST_CASE("SPD diffusion mean: trivial cases and a line-search oracle") {
  MLEOptions opt;
  opt.T = 0.2;
  opt.steps = 8;
  const Matrix3d mu0 = Vector3d(1.2, 0.9, 1.1).asDiagonal();
  std::vector<BasePoint> same(8, BasePoint(mu0));
  const MLETrace k0 = diffusion_mean_spd(same, mu0, 0.5, 0, 2, NoiseStream(1), opt);
  REQUIRE(k0.iterations.size() == 1);
  CHECK((k0.iterations[0].theta - mu0).norm() == 0.0);

  std::vector<BasePoint> ident(16, BasePoint(Matrix::Identity(3, 3)));
  double best = -1e300, arg = 0.0;
  for (double c = 0.6; c <= 1.6; c += 0.05) {
    const double l = spd_log_likelihood(ident, Matrix3d(c * Matrix3d::Identity()), 0.2, 4, NoiseStream(5), 8);
    if (l > best) {
      best = l;
      arg = c;
    }
  }
  CHECK(std::abs(arg - 1.0) < 0.051);

  const MLETrace tr = diffusion_mean_spd(ident, Matrix3d(1.5 * Matrix3d::Identity()), 0.75, 15, 2, NoiseStream(2), opt);
  const double start = (tr.iterations.front().theta - Matrix::Identity(3, 3)).norm();
  const double end = (tr.iterations.back().theta - Matrix::Identity(3, 3)).norm();
  CHECK(end < 0.5 * start);
}

TEST_CASE("exact S2 kernel") {
  CHECK(s2_exact_kernel(0.0, 0.5, 20) == doctest::Approx(0.3462295162).epsilon(1e-9));
  CHECK(s2_exact_kernel(1.0, 30.0, 20) == doctest::Approx(1.0 / (4 * kPi)).epsilon(1e-9));
  for (double th : {0.0, 0.4, 1.3, 2.9, kPi}) CHECK(s2_exact_kernel(th, 0.7, 25) == doctest::Approx(s2_series(th, 0.7, 25)).epsilon(1e-12));
  for (double T : {0.3, 0.5, 1.0}) CHECK(std::abs(s2_exact_kernel(0.2, T, 30) - s2_exact_kernel(0.2, T, 40)) < 1e-8);
  // integrates to one against 2 pi sin(theta)
  const int n = 4000;
  double integral = 0.0;
  for (int j = 0; j < n; ++j) {
    const double a = kPi * j / n, b = kPi * (j + 1) / n, m = 0.5 * (a + b);
    integral += (b - a) / 6.0 *
                (std::sin(a) * s2_exact_kernel(a, 0.5, 30) + 4 * std::sin(m) * s2_exact_kernel(m, 0.5, 30) +
                 std::sin(b) * s2_exact_kernel(b, 0.5, 30));
  }
  CHECK(std::abs(2 * kPi * integral - 1.0) < 1e-6);
}

TEST_CASE("Fermi-bridge S2 kernel estimates") {
  // long horizon: close to uniform. Beyond T ~ 3 the weights turn heavy-tailed (paths near the
  // antipode of v), so the check stays at T = 3 where the exact kernel is 1.15 / (4 pi).
  const DensityEstimate stationary = s2_kernel_is(Vector3d(0, 0, 1), 3.0, 512, NoiseStream(1), 60);
  CHECK(std::abs(stationary.value / s2_exact_kernel(0.0, 3.0, 40) - 1.0) < 0.1);
  CHECK(std::abs(stationary.value * 4 * kPi - 1.0) < 0.25);

  const double th = 0.8;
  const DensityEstimate a = s2_kernel_is(Vector3d(std::sin(th), 0, std::cos(th)), 0.5, 256, NoiseStream(2), 50);
  const DensityEstimate b = s2_kernel_is(Vector3d(0, -std::sin(th), std::cos(th)), 0.5, 256, NoiseStream(3), 50);
  CHECK(std::abs(a.value - b.value) < 3 * std::hypot(a.mc_std_error, b.mc_std_error));
  CHECK(std::abs(a.value / s2_exact_kernel(th, 0.5, 20) - 1.0) < 0.15);
}

TEST_CASE("bi-invariant pushforward is rotationally symmetric") {
  PushforwardOptions opt;
  opt.bands = 4;
  opt.steps = 30;
  const auto grids = pushforward_density_grid(MetricParam::identity(3), {0.5}, 32, 8, NoiseStream(4), opt);
  REQUIRE(grids.size() == 1);
  const DensityGrid& g = grids[0];
  for (int band = 0; band < g.bands; ++band) {
    std::vector<double> d;
    double se2 = 0.0;
    for (int s = 0; s < g.sectors; ++s) {
      d.push_back(g.cells[band * g.sectors + s].density);
      se2 += std::pow(g.cells[band * g.sectors + s].mc_std_error, 2) / g.sectors;
    }
    // sample variance across azimuth no larger than the Monte Carlo variance allows
    CHECK(oracle::variance(d) < 3.0 * se2 + 1e-12);
    // and every band agrees with the exact kernel at its polar angle
    CHECK(std::abs(oracle::mean(d) / s2_exact_kernel(g.cells[band * g.sectors].polar, 0.5, 30) - 1.0) < 0.1);
  }
  CHECK_THROWS_AS(pushforward_density_grid(MetricParam::identity(3), {0.5}, 30, 8, NoiseStream(4), opt), InputError);
}

namespace {

// Endpoints of SO(3) Brownian motion started at e, projected to S^2 through the north pole.
std::vector<Vector3d> pushforward_endpoints(const MetricParam& metric, double T, int n, std::uint64_t seed) {
  const GroupSpec so3 = so3_spec(metric);
  const TimeGrid grid(T, 50);
  std::vector<Vector3d> out;
  for (int i = 0; i < n; ++i) {
    NoiseStream ns = NoiseStream(seed).child("endpoint", i);
    out.push_back(Matrix3d(sample_brownian_motion(so3, grid, ns).points.back()).col(2));
  }
  return out;
}

double polar_of(const Vector3d& x) { return std::acos(std::clamp(x(2), -1.0, 1.0)); }

}  // namespace

TEST_CASE("a metric invariant under conjugation by Rz gives an azimuthally uniform pushforward") {
  // diag(a, a, b) commutes with Ad(Rz), so Rz g Rz^-1 n = Rz g n has the law of g n
  const auto pts = pushforward_endpoints(MetricParam(Matrix(Vector3d(0.2, 0.2, 0.8).asDiagonal())), 0.5, 20000, 31);
  std::vector<double> az;
  for (const auto& x : pts) {
    if (std::abs(polar_of(x) - 0.5) < 0.15) az.push_back(std::atan2(x(1), x(0)));
  }
  REQUIRE(az.size() > 1000);
  CHECK(oracle::ks_uniform_pvalue(az, -kPi, kPi) > 0.01);
}

TEST_CASE("pushforward density under a general metric matches a direct histogram") {
  const MetricParam metric(Matrix(Vector3d(0.5, 1.0, 2.0).asDiagonal()));
  const int n = 40000;
  const auto pts = pushforward_endpoints(metric, 0.5, n, 5);
  // band 0.7 < polar < 0.9, averaged over azimuth
  int in = 0;
  for (const auto& x : pts) in += std::abs(polar_of(x) - 0.8) < 0.1;
  const double area = 2 * kPi * (std::cos(0.7) - std::cos(0.9));
  const double hist = in / (n * area), hist_se = std::sqrt(in) / (n * area);
  const GroupSpec so3 = so3_spec(metric);
  double est = 0.0, var = 0.0;
  for (int j = 0; j < 8; ++j) {
    const Vector3d x(std::sin(0.8) * std::cos(j * kPi / 4), std::sin(0.8) * std::sin(j * kPi / 4), std::cos(0.8));
    const DensityEstimate e = pushforward_density(so3, x, 0.5, 64, NoiseStream(40 + j), 50);
    est += e.value / 8;
    var += e.mc_std_error * e.mc_std_error / 64;
  }
  CHECK(std::abs(est - hist) < 3 * std::sqrt(var + hist_se * hist_se));
}

TEST_CASE("trace and grid serialisation") {
  MLETrace tr;
  tr.iterations.push_back({Matrix::Identity(3, 3), -1.5, 0.25, false});
  CsvWriter csv(trace_csv_header());
  append_trace_rows(csv, tr);
  const auto rows = parse_csv(csv.str());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 9);
  CHECK(rows[1][1] == "1");
  CHECK(rows[1][7] == "-1.5");
  CHECK(trace_json(tr).find("\"loglik\"") != std::string::npos);
}
