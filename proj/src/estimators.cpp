#include "liebridge/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace liebridge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double log_mean_exp(const std::vector<double>& x) {
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s / static_cast<double>(x.size()));
}

DensityEstimate summarise(double log_scale, const std::vector<double>& log_phi) {
  // value = exp(log_scale) * mean(exp(log_phi)), with the standard error of that mean
  const double n = static_cast<double>(log_phi.size());
  double mean = 0.0;
  for (double lp : log_phi) mean += std::exp(lp + log_scale);
  mean /= n;
  double var = 0.0;
  for (double lp : log_phi) {
    const double d = std::exp(lp + log_scale) - mean;
    var += d * d;
  }
  var = n > 1 ? var / (n - 1) : 0.0;
  DensityEstimate out;
  out.value = mean;
  out.mc_std_error = std::sqrt(var / n);
  out.n_bridges = static_cast<int>(log_phi.size());
  return out;
}

GroupSpec spec_for(const GroupSpec& spec, const MetricParam& A) {
  if (A.dim() == spec.metric.dim() && (A.matrix() - spec.metric.matrix()).norm() == 0.0) return spec;
  return with_metric(spec, A);
}

Matrix symmetric_unit(int d, int a, int b) {
  Matrix e = Matrix::Zero(d, d);
  e(a, b) = 1.0;
  e(b, a) = 1.0;
  return e;
}

std::vector<std::pair<int, int>> upper_indices(int d) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) out.emplace_back(a, b);
  return out;
}

/// Shared gradient-ascent loop over the upper triangle of a symmetric parameter.
template <class LogLik>
MLETrace ascend(const Matrix& theta0, double eta, int K, double norm, const MLEOptions& opt,
                const NoiseStream& noise, LogLik&& loglik) {
  if (K < 0) throw InputError("mle: K must be >= 0");
  if (!(eta > 0.0)) throw InputError("mle: eta must be positive");
  const int d = static_cast<int>(theta0.rows());
  const auto idx = upper_indices(d);
  MLETrace trace;
  Matrix theta = theta0;
  bool clamped_now = false;
  int clamps = 0;
  for (int it = 0; it <= K; ++it) {
    const NoiseStream iter_noise = noise.child("mle-iter", static_cast<std::uint64_t>(it));
    const double ll = loglik(theta, iter_noise);
    if (!std::isfinite(ll)) {
      trace.warnings.push_back("mle: non-finite log-likelihood at iteration " + std::to_string(it) +
                               "; stopped");
      trace.iterations.push_back({theta, ll, std::nan(""), clamped_now});
      return trace;
    }
    Matrix grad = Matrix::Zero(d, d);
    for (auto [a, b] : idx) {
      const Matrix e = symmetric_unit(d, a, b);
      const Matrix tp = MetricParam::project_spd(theta + opt.fd_step * e, opt.eigen_floor).matrix();
      const Matrix tm = MetricParam::project_spd(theta - opt.fd_step * e, opt.eigen_floor).matrix();
      const double g = (loglik(tp, iter_noise) - loglik(tm, iter_noise)) / (2.0 * opt.fd_step) / norm;
      grad(a, b) = g;
      grad(b, a) = g;
    }
    double gn = 0.0;
    for (auto [a, b] : idx) gn += grad(a, b) * grad(a, b);
    trace.iterations.push_back({theta, ll, std::sqrt(gn), clamped_now});
    if (it == K) break;
    bool clamped = false;
    theta = MetricParam::project_spd(theta + eta * grad, opt.eigen_floor, &clamped).matrix();
    clamped_now = clamped;
    if (clamped) ++clamps;
  }
  if (K > 0 && clamps * 2 > K) {
    trace.warnings.push_back("mle: eigenvalue clamp active in " + std::to_string(clamps) + " of " +
                             std::to_string(K) + " iterations; consider a smaller eta");
  }
  return trace;
}

}  // namespace

double log_q_density(const GroupElement& v, const MetricParam& A, double T, const GroupSpec& spec) {
  if (!(T > 0.0)) throw InputError("q_density: T must be positive");
  if (A.dim() != spec.dim) throw InputError("q_density: metric dimension does not match the group");
  const AlgebraVector a = spec.log(v);
  const double d = spec.dim;
  return 0.5 * A.log_det() - 0.5 * d * std::log(kTwoPi * T) - A.norm_sq(a) / (2.0 * T);
}

double q_density(const GroupElement& v, const MetricParam& A, double T, const GroupSpec& spec) {
  return std::exp(log_q_density(v, A, T, spec));
}

DensityEstimate heat_kernel_is(const GroupElement& v, const MetricParam& A, double T, int n,
                               const GroupSpec& spec, const NoiseStream& noise, int steps) {
  if (n < 1) throw InputError("heat_kernel_is: n must be >= 1");
  const GroupSpec s = spec_for(spec, A);
  const double lq = log_q_density(v, A, T, s);
  const TimeGrid grid(T, steps);
  std::vector<double> lp(n);
  parallel_for(n, [&](std::size_t i) {
    NoiseStream ns = noise.child("heat-kernel", i);
    lp[i] = sample_guided_bridge(s, v, grid, ns).log_phi;
  });
  return summarise(lq, lp);
}

double log_likelihood(const std::vector<GroupElement>& data, const MetricParam& A, double T, int m,
                      const GroupSpec& spec, const NoiseStream& noise, int steps) {
  if (m < 1) throw InputError("log_likelihood: m must be >= 1");
  if (data.empty()) throw InputError("log_likelihood: no observations");
  const GroupSpec s = spec_for(spec, A);
  const TimeGrid grid(T, steps);
  const std::size_t n = data.size();
  std::vector<double> per_obs(n, 0.0);
  std::vector<std::string> failed(n);
  parallel_for(n, [&](std::size_t j) {
    try {
      const double lq = log_q_density(data[j], A, T, s);
      std::vector<double> lp(m);
      for (int i = 0; i < m; ++i) {
        NoiseStream ns = noise.child("loglik", j * static_cast<std::size_t>(m) + i);
        lp[i] = sample_guided_bridge(s, data[j], grid, ns).log_phi;
      }
      per_obs[j] = lq + log_mean_exp(lp);
    } catch (const std::exception& e) {
      failed[j] = e.what();
    }
  });
  std::ostringstream bad;
  int n_bad = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (!failed[j].empty()) {
      if (n_bad++ < 8) bad << (n_bad > 1 ? "; " : "") << j << ": " << failed[j];
    }
  }
  if (n_bad > 0) {
    throw NumericalError("log_likelihood: " + std::to_string(n_bad) + " observation(s) failed [" +
                         bad.str() + "]");
  }
  double total = 0.0;
  for (double x : per_obs) total += x;
  return total;
}

MLETrace metric_mle(const std::vector<GroupElement>& data, const MetricParam& theta0, double eta,
                    int K, int m, const GroupSpec& spec, const NoiseStream& noise,
                    const MLEOptions& options) {
  if (theta0.dim() != spec.dim) throw InputError("metric_mle: theta0 has the wrong dimension");
  const double norm = static_cast<double>(data.size()) * spec.dim;
  return ascend(theta0.matrix(), eta, K, norm, options, noise,
                [&](const Matrix& theta, const NoiseStream& ns) {
                  return log_likelihood(data, MetricParam(theta), options.T, m, spec, ns, options.steps);
                });
}

double spd_log_likelihood(const std::vector<BasePoint>& data, const Eigen::Matrix3d& mu, double T,
                          int m, const NoiseStream& noise, int steps) {
  if (m < 1) throw InputError("spd_log_likelihood: m must be >= 1");
  if (data.empty()) throw InputError("spd_log_likelihood: no observations");
  static const HomogeneousSpec space = spd3_space();
  const Eigen::Matrix3d r = spd_inv_sqrt(mu);
  const TimeGrid grid(T, steps);
  const std::size_t n = data.size();
  std::vector<double> per_obs(n, 0.0);
  std::vector<std::string> failed(n);
  parallel_for(n, [&](std::size_t j) {
    try {
      Eigen::Matrix3d target = r * Eigen::Matrix3d(data[j]) * r;
      target = 0.5 * (target + target.transpose()).eval();
      const double lq = fermi_log_q(space, target, T);
      std::vector<double> lp(m);
      for (int i = 0; i < m; ++i) {
        NoiseStream ns = noise.child("spd-loglik", j * static_cast<std::size_t>(m) + i);
        lp[i] = sample_fermi_bridge(space, target, grid, ns).log_phi;
      }
      per_obs[j] = lq + log_mean_exp(lp);
    } catch (const std::exception& e) {
      failed[j] = e.what();
    }
  });
  for (std::size_t j = 0; j < n; ++j) {
    if (!failed[j].empty()) {
      throw NumericalError("spd_log_likelihood: observation " + std::to_string(j) + ": " + failed[j]);
    }
  }
  double total = 0.0;
  for (double x : per_obs) total += x;
  return total;
}

MLETrace diffusion_mean_spd(const std::vector<BasePoint>& data, const Eigen::Matrix3d& mu0,
                            double eta, int K, int m, const NoiseStream& noise,
                            const MLEOptions& options) {
  const HomogeneousSpec space = spd3_space();
  space.check_base_point(mu0);
  for (const auto& p : data) space.check_base_point(p);
  const double norm = static_cast<double>(data.size()) * 6.0;
  return ascend(Matrix(mu0), eta, K, norm, options, noise,
                [&](const Matrix& mu, const NoiseStream& ns) {
                  return spd_log_likelihood(data, Eigen::Matrix3d(mu), options.T, m, ns, options.steps);
                });
}

double s2_exact_kernel(double theta, double T, int L) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi)) throw InputError("s2_exact_kernel: theta outside [0, pi]");
  if (!(T > 0.0)) throw InputError("s2_exact_kernel: T must be positive");
  if (L < 0) throw InputError("s2_exact_kernel: L must be >= 0");
  const double x = std::cos(theta);
  double p_prev = 1.0, p = x;
  double sum = 1.0 / (4.0 * std::numbers::pi);
  for (int l = 1; l <= L; ++l) {
    if (l > 1) {
      const double next = ((2.0 * l - 1.0) * x * p - (l - 1.0) * p_prev) / l;
      p_prev = p;
      p = next;
    }
    sum += (2.0 * l + 1.0) / (4.0 * std::numbers::pi) * std::exp(-0.5 * l * (l + 1.0) * T) * p;
  }
  return sum;
}

DensityEstimate s2_kernel_is(const BasePoint& v, double T, int n, const NoiseStream& noise, int steps) {
  if (n < 1) throw InputError("s2_kernel_is: n must be >= 1");
  static const HomogeneousSpec space = s2_space();
  space.check_base_point(v);
  const double lq = fermi_log_q(space, v, T);
  const TimeGrid grid(T, steps);
  std::vector<double> lp(n);
  parallel_for(n, [&](std::size_t i) {
    NoiseStream ns = noise.child("s2-kernel", i);
    lp[i] = sample_fermi_bridge(space, v, grid, ns).log_phi;
  });
  return summarise(lq, lp);
}

namespace {

/// 2 pi q(u) phi for one bridge to u = R_x Rz(s), s drawn in [lo, hi) from ns.
double pushforward_sample(const GroupSpec& so3, const Eigen::Matrix3d& rx, double lo, double hi,
                          double T, const TimeGrid& grid, NoiseStream& ns) {
  for (int attempt = 0;; ++attempt) {
    const double s = lo + (hi - lo) * ns.uniform();
    const GroupElement u = rx * rot_z(s);
    try {
      const double lq = log_q_density(u, so3.metric, T, so3);
      return kTwoPi * std::exp(lq + sample_guided_bridge(so3, u, grid, ns).log_phi);
    } catch (const BranchError&) {
      if (attempt >= 100) throw;
    }
  }
}

Eigen::Vector3d sphere_point(double polar, double azimuth) {
  return {std::sin(polar) * std::cos(azimuth), std::sin(polar) * std::sin(azimuth), std::cos(polar)};
}

}  // namespace

DensityEstimate pushforward_density(const GroupSpec& so3, const Eigen::Vector3d& x, double T,
                                    int n_bridges, const NoiseStream& noise, int steps) {
  if (so3.kind != GroupKind::SO3) throw InputError("pushforward_density needs SO(3)");
  if (n_bridges < 1) throw InputError("pushforward_density: n_bridges must be >= 1");
  const Eigen::Matrix3d rx = s2_section(x);
  const TimeGrid grid(T, steps);
  std::vector<double> vals(n_bridges);
  for (int b = 0; b < n_bridges; ++b) {
    NoiseStream ns = noise.child("pushforward", b);
    vals[b] = pushforward_sample(so3, rx, kTwoPi * b / n_bridges, kTwoPi * (b + 1) / n_bridges, T,
                                 grid, ns);
  }
  DensityEstimate out;
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= n_bridges;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  out.value = mean;
  out.mc_std_error = n_bridges > 1 ? std::sqrt(var / (n_bridges - 1) / n_bridges) : 0.0;
  out.n_bridges = n_bridges;
  return out;
}

double DensityGrid::tv_to_uniform() const {
  const double u = 1.0 / (4.0 * std::numbers::pi);
  double tv = 0.0;
  for (const auto& c : cells) tv += std::abs(c.density - u) * c.area;
  return 0.5 * tv;
}

std::vector<DensityGrid> pushforward_density_grid(const MetricParam& metric,
                                                  const std::vector<double>& T_list, int n_samples,
                                                  int n_bridges, const NoiseStream& noise,
                                                  const PushforwardOptions& options) {
  if (options.bands < 1 || n_samples < options.bands || n_samples % options.bands != 0) {
    throw InputError("pushforward grid: n_samples must be a positive multiple of the band count " +
                     std::to_string(options.bands));
  }
  if (T_list.empty()) throw InputError("pushforward grid: empty T list");
  const GroupSpec so3 = so3_spec(metric);
  const int sectors = n_samples / options.bands;
  const double area = 4.0 * std::numbers::pi / n_samples;
  std::vector<DensityGrid> out;
  for (std::size_t ti = 0; ti < T_list.size(); ++ti) {
    DensityGrid g;
    g.T = T_list[ti];
    g.bands = options.bands;
    g.sectors = sectors;
    g.cells.resize(n_samples);
    const NoiseStream tnoise = noise.child("grid-T", ti);
    parallel_for(n_samples, [&](std::size_t c) {
      const int band = static_cast<int>(c) / sectors;
      const int sector = static_cast<int>(c) % sectors;
      GridCell cell;
      cell.polar = std::acos(1.0 - (2.0 * band + 1.0) / options.bands);
      cell.azimuth = kTwoPi * (sector + 0.5) / sectors;
      cell.area = area;
      const DensityEstimate est = pushforward_density(so3, sphere_point(cell.polar, cell.azimuth), g.T,
                                                      n_bridges, tnoise.child("cell", c), options.steps);
      cell.density = est.value;
      cell.mc_std_error = est.mc_std_error;
      g.cells[c] = cell;
    });
    out.push_back(std::move(g));
  }
  return out;
}

double anisotropy_ratio(const MetricParam& metric, double T, double polar, int sectors,
                        int bridges_per_sector, const NoiseStream& noise, int steps) {
  if (sectors < 2 || bridges_per_sector < 1) throw InputError("anisotropy_ratio: bad sampling sizes");
  const GroupSpec so3 = so3_spec(metric);
  const TimeGrid grid(T, steps);
  std::vector<double> dens(sectors);
  parallel_for(sectors, [&](std::size_t j) {
    double acc = 0.0;
    for (int b = 0; b < bridges_per_sector; ++b) {
      NoiseStream ns = noise.child("aniso", j * static_cast<std::size_t>(bridges_per_sector) + b);
      // stratify azimuth within the sector and the fiber angle over the circle
      const double az = kTwoPi * (j + (b + ns.uniform()) / bridges_per_sector) / sectors;
      const double lo = kTwoPi * b / bridges_per_sector;
      const double hi = kTwoPi * (b + 1) / bridges_per_sector;
      acc += pushforward_sample(so3, s2_section(sphere_point(polar, az)), lo, hi, T, grid, ns);
    }
    dens[j] = acc / bridges_per_sector;
  });
  const auto [mn, mx] = std::minmax_element(dens.begin(), dens.end());
  return *mx / *mn;
}

// ---------------------------------------------------------------------------

std::vector<std::string> trace_csv_header() {
  std::vector<std::string> h{"iteration"};
  for (auto [a, b] : upper_indices(3)) h.push_back("theta" + std::to_string(a) + std::to_string(b));
  h.push_back("loglik");
  h.push_back("gradnorm");
  return h;
}

void append_trace_rows(CsvWriter& csv, const MLETrace& trace) {
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const MLEIterate& it = trace.iterations[i];
    if (it.theta.rows() != 3) throw InputError("trace export expects a 3x3 parameter");
    csv.add(static_cast<long long>(i));
    for (auto [a, b] : upper_indices(3)) csv.add(it.theta(a, b));
    csv.add(it.loglik).add(it.gradnorm);
    csv.end_row();
  }
}

std::string trace_json(const MLETrace& trace) {
  nlohmann::json j;
  j["iterations"] = nlohmann::json::array();
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const MLEIterate& it = trace.iterations[i];
    std::vector<double> theta;
    for (auto [a, b] : upper_indices(static_cast<int>(it.theta.rows()))) theta.push_back(it.theta(a, b));
    j["iterations"].push_back({{"iteration", i},
                               {"theta", theta},
                               {"loglik", it.loglik},
                               {"gradnorm", it.gradnorm},
                               {"clamped", it.clamped}});
  }
  j["warnings"] = trace.warnings;
  return j.dump(2);
}

std::vector<std::string> grid_csv_header() {
  return {"T", "band", "sector", "polar", "azimuth", "area", "density", "std_error"};
}

void append_grid_rows(CsvWriter& csv, const DensityGrid& grid) {
  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    const GridCell& cell = grid.cells[c];
    csv.add(grid.T)
        .add(static_cast<int>(c) / grid.sectors)
        .add(static_cast<int>(c) % grid.sectors)
        .add(cell.polar)
        .add(cell.azimuth)
        .add(cell.area)
        .add(cell.density)
        .add(cell.mc_std_error);
    csv.end_row();
  }
}

std::string grid_json(const DensityGrid& grid) {
  nlohmann::json j;
  j["T"] = grid.T;
  j["bands"] = grid.bands;
  j["sectors"] = grid.sectors;
  j["tv_to_uniform"] = grid.tv_to_uniform();
  j["cells"] = nlohmann::json::array();
  for (const auto& c : grid.cells) {
    j["cells"].push_back({{"polar", c.polar},
                          {"azimuth", c.azimuth},
                          {"area", c.area},
                          {"density", c.density},
                          {"std_error", c.mc_std_error}});
  }
  return j.dump(2);
}

}  // namespace liebridge
