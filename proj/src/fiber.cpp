#include "liebridge/fiber.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace liebridge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_angle(double s) {
  double out = std::fmod(s, kTwoPi);
  if (out < 0.0) out += kTwoPi;
  return out;
}

// Squared distance from y to the S^2 fiber point at angle s; +inf past the cut locus.
struct SphereFiberDistance {
  const GroupSpec& spec;
  Eigen::Matrix3d m;  // y^{-1} R_v

  double operator()(double s) const {
    const Eigen::Matrix3d g = m * rot_z(s);
    if (rotation_angle(g) >= std::numbers::pi - 1e-6) return std::numeric_limits<double>::infinity();
    return spec.metric.norm_sq(log_so3(g));
  }
};

double golden_section(const SphereFiberDistance& f, double lo, double hi) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-10) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double newton_polish(const SphereFiberDistance& f, double s) {
  constexpr double h = 1e-5;
  double fs = f(s);
  for (int it = 0; it < 3; ++it) {
    const double fp = f(s + h), fm = f(s - h);
    const double d1 = (fp - fm) / (2.0 * h);
    const double d2 = (fp - 2.0 * fs + fm) / (h * h);
    if (!(d2 > 0.0) || !std::isfinite(d1)) break;
    const double next = s - d1 / d2;
    const double fn = f(next);
    if (!(fn <= fs)) break;
    s = next;
    fs = fn;
  }
  return s;
}

NearestPoint nearest_sphere(const GroupElement& y, const HomogeneousSpec& space, const BasePoint& v) {
  const GroupSpec& spec = space.top;
  const Eigen::Matrix3d rv = s2_section(Eigen::Vector3d(v));
  const SphereFiberDistance f{spec, Eigen::Matrix3d(y).transpose() * rv};

  constexpr int kScan = 64;
  constexpr double h = kTwoPi / kScan;
  std::array<double, kScan> vals{};
  for (int j = 0; j < kScan; ++j) vals[j] = f(j * h);
  double lo = *std::min_element(vals.begin(), vals.end());
  double hi = *std::max_element(vals.begin(), vals.end());
  if (!std::isfinite(lo)) throw BranchError("nearest_fiber_point: fiber beyond the cut locus");
  if (!std::isfinite(hi)) hi = lo + 1.0;

  // refine every scan local minimum that is competitive with the best one
  std::vector<std::pair<double, double>> cands;  // (value, angle)
  for (int j = 0; j < kScan; ++j) {
    const double prev = vals[(j + kScan - 1) % kScan], next = vals[(j + 1) % kScan];
    if (vals[j] <= prev && vals[j] <= next && vals[j] <= lo + 0.02 * (hi - lo) + 1e-12) {
      double s = golden_section(f, j * h - h, j * h + h);
      s = wrap_angle(newton_polish(f, s));
      cands.emplace_back(f(s), s);
    }
  }
  std::sort(cands.begin(), cands.end());
  NearestPoint out;
  double best_s = cands.front().second;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const double gap = std::abs(wrap_angle(cands[i].second - best_s + std::numbers::pi) - std::numbers::pi);
    if (cands[i].first - cands.front().first < 1e-9 && gap > 1e-6) {
      out.tie = true;
      best_s = std::min(best_s, cands[i].second);
    }
  }
  out.coord = Matrix::Constant(1, 1, best_s);
  out.point = rv * rot_z(best_s);
  out.log_to = spec.log_to(y, out.point);
  out.distance = std::sqrt(spec.metric.norm_sq(out.log_to));
  return out;
}

NearestPoint nearest_spd(const GroupElement& y, const BasePoint& v) {
  const Eigen::Matrix3d yi = Eigen::Matrix3d(y).inverse();
  const Eigen::Matrix3d inner = yi * Eigen::Matrix3d(v) * yi.transpose();
  const Eigen::Matrix3d s = 0.5 * spd_log(Eigen::Matrix3d(0.5 * (inner + inner.transpose())));
  NearestPoint out;
  out.point = Eigen::Matrix3d(y) * exp_gl(s);
  out.log_to = vee_gl(s);
  out.distance = s.norm();
  out.coord = spd_inv_sqrt(Eigen::Matrix3d(v)) * out.point;
  return out;
}

NearestPoint nearest_circle(const GroupElement& y, const HomogeneousSpec& space, const BasePoint& v) {
  const double m = std::round((y(0, 0) - v(0, 0)) / kTwoPi);
  NearestPoint out;
  out.coord = Matrix::Constant(1, 1, m);
  out.point = Matrix::Constant(1, 1, v(0, 0) + kTwoPi * m);
  out.log_to = out.point - y;
  out.distance = std::sqrt(space.top.metric.norm_sq(out.log_to));
  const double other = v(0, 0) + kTwoPi * (m + ((y(0, 0) > out.point(0, 0)) ? 1.0 : -1.0));
  if (std::abs(std::abs(other - y(0, 0)) - std::abs(out.point(0, 0) - y(0, 0))) < 1e-12) {
    out.tie = true;
    if (other < out.point(0, 0)) {
      out.point(0, 0) = other;
      out.coord(0, 0) = std::round((other - v(0, 0)) / kTwoPi);
      out.log_to = out.point - y;
    }
  }
  return out;
}

double isotropic_scale(const HomogeneousSpec& space) { return space.top.metric.matrix()(0, 0); }

void require_weight_metric(const HomogeneousSpec& space) {
  if (!space.top.metric.is_isotropic(1e-12)) {
    throw InputError("fermi bridge on " + space.name + " needs an isotropic metric");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

FiberTarget FiberTarget::at_point(GroupElement v) {
  FiberTarget t;
  t.kind = Kind::Point;
  t.point = std::move(v);
  return t;
}

FiberTarget FiberTarget::over(const HomogeneousSpec& space, BasePoint v) {
  FiberTarget t;
  t.kind = Kind::Fiber;
  t.space = space;
  t.base = std::move(v);
  return t;
}

FiberTarget FiberTarget::point_set(std::vector<GroupElement> points, std::vector<double> log_c) {
  FiberTarget t;
  t.kind = Kind::PointSet;
  t.points = std::move(points);
  t.log_c = std::move(log_c);
  return t;
}

void FiberTarget::validate(const GroupSpec& spec) const {
  switch (kind) {
    case Kind::Point:
      spec.check(point);
      break;
    case Kind::Fiber:
      if (!space) throw InputError("fiber target without a space");
      space->check_base_point(base);
      break;
    case Kind::PointSet:
      if (points.empty()) throw InputError("point-set target is empty");
      if (log_c.size() != points.size()) throw InputError("point-set target: one log_c per point");
      for (double c : log_c) {
        if (!std::isfinite(c)) throw InputError("point-set target: log_c must be finite");
      }
      for (const auto& p : points) spec.check(p);
      break;
  }
}

FiberCoord fiber_coordinate(const HomogeneousSpec& space, const BasePoint& v, const GroupElement& g) {
  switch (space.kind) {
    case QuotientKind::Sphere: {
      const Eigen::Matrix3d m = s2_section(Eigen::Vector3d(v)).transpose() * Eigen::Matrix3d(g);
      return Matrix::Constant(1, 1, wrap_angle(std::atan2(m(1, 0), m(0, 0))));
    }
    case QuotientKind::SPD:
      return spd_inv_sqrt(Eigen::Matrix3d(v)) * Eigen::Matrix3d(g);
    case QuotientKind::Circle:
      return Matrix::Constant(1, 1, std::round((g(0, 0) - v(0, 0)) / kTwoPi));
  }
  return {};
}

NearestPoint nearest_fiber_point(const GroupElement& y, const HomogeneousSpec& space,
                                 const BasePoint& v) {
  space.check_base_point(v);
  space.top.check(y);
  switch (space.kind) {
    case QuotientKind::Sphere:
      return nearest_sphere(y, space, v);
    case QuotientKind::SPD:
      return nearest_spd(y, v);
    case QuotientKind::Circle:
      return nearest_circle(y, space, v);
  }
  return {};
}

double fermi_log_phi_increment(const HomogeneousSpec& space, const GroupElement& y,
                               const NearestPoint& nearest, double dt, double tau) {
  switch (space.kind) {
    case QuotientKind::Sphere: {
      // base angle between pi(y) and v; Theta_N = sin r / r
      const double r = nearest.distance / std::sqrt(isotropic_scale(space));
      if (r >= std::numbers::pi - 1e-6) throw BranchError("fermi bridge: antipodal to the fiber");
      (void)y;
      const double dlog = r < 1e-4 ? -r * r / 3.0 : r / std::tan(r) - 1.0;
      return -0.5 * dlog * dt / tau;
    }
    case QuotientKind::SPD: {
      const Eigen::Matrix3d s = hat_gl(nearest.log_to);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(Eigen::Matrix3d(0.5 * (s + s.transpose())),
                                                        Eigen::EigenvaluesOnly);
      const Eigen::Vector3d lam = es.eigenvalues();
      double dlog = 0.0;
      for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
          const double d = std::abs(lam(i) - lam(j));
          dlog += d < 1e-4 ? d * d / 3.0 : d / std::tanh(d) - 1.0;
        }
      }
      return -0.5 * dlog * dt / tau;
    }
    case QuotientKind::Circle:
      return 0.0;
  }
  return 0.0;
}

double fermi_log_q(const HomogeneousSpec& space, const BasePoint& v, double T,
                   const std::optional<GroupElement>& start) {
  if (!(T > 0.0)) throw InputError("fermi_log_q: T must be positive");
  const NearestPoint np = nearest_fiber_point(start.value_or(space.top.identity()), space, v);
  const double n = space.base_dim;
  const double a = isotropic_scale(space);
  return -0.5 * n * std::log(2.0 * std::numbers::pi * T) + 0.5 * n * std::log(a) -
         np.distance * np.distance / (2.0 * T);
}

SamplePath sample_fermi_bridge(const HomogeneousSpec& space, const BasePoint& v,
                               const TimeGrid& grid, NoiseStream& noise,
                               const BridgeOptions& options) {
  require_weight_metric(space);
  space.check_base_point(v);
  const GroupSpec& spec = space.top;
  const double dt = grid.dt();
  const int k = grid.steps();
  int failures = 0;
  for (;;) {
    try {
      SamplePath path;
      path.grid = grid;
      path.seed = noise.seed();
      path.resamples = failures;
      path.points.reserve(k + 1);
      path.points.push_back(options.start.value_or(spec.identity()));
      double log_phi = 0.0;
      for (int i = 0; i + 1 < k; ++i) {
        const double tau = grid.T() - grid.t(i);
        const GroupElement& y = path.points.back();
        const NearestPoint np = nearest_fiber_point(y, space, v);
        log_phi += fermi_log_phi_increment(space, y, np, dt, tau);
        Vector dB = noise.increment(spec.dim, dt);
        path.points.push_back(euler_heun_step(y, np.log_to / tau, dB, dt, spec));
        path.increments.push_back(std::move(dB));
      }
      path.increments.push_back(noise.increment(spec.dim, dt));
      path.points.push_back(nearest_fiber_point(path.points.back(), space, v).point);
      if (!std::isfinite(log_phi)) throw NumericalError("fermi bridge: non-finite log phi");
      path.log_phi = log_phi;
      return path;
    } catch (const BranchError& e) {
      if (++failures >= options.max_attempts) {
        throw NumericalError("fermi bridge: " + std::to_string(failures) +
                             " attempts hit the cut locus (last: " + e.what() + ")");
      }
    }
  }
}

namespace {

Vector normalised_weights(const GroupSpec& spec, const std::vector<AlgebraVector>& logs,
                          const std::vector<double>& log_c, double tau) {
  const int n = static_cast<int>(logs.size());
  Vector lw(n);
  for (int i = 0; i < n; ++i) lw(i) = log_c[i] - spec.metric.norm_sq(logs[i]) / (2.0 * tau);
  const double m = lw.maxCoeff();
  if (!std::isfinite(m)) {
    throw NumericalError("k-point weights underflow: max log weight " + std::to_string(m) +
                         " at tau " + std::to_string(tau));
  }
  Vector w = (lw.array() - m).exp().matrix();
  const double s = w.sum();
  if (!(s > 0.0) || !std::isfinite(s)) throw NumericalError("k-point weights: non-finite sum");
  return w / s;
}

std::vector<AlgebraVector> logs_to(const GroupSpec& spec, const GroupElement& y,
                                   const std::vector<GroupElement>& points) {
  std::vector<AlgebraVector> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(spec.log_to(y, p));
  return out;
}

}  // namespace

Vector kpoint_weights(const GroupSpec& spec, const GroupElement& y, const FiberTarget& target,
                      double tau) {
  if (target.kind != FiberTarget::Kind::PointSet) throw InputError("kpoint_weights needs a point set");
  return normalised_weights(spec, logs_to(spec, y, target.points), target.log_c, tau);
}

SamplePath sample_kpoint_bridge(const GroupSpec& spec, const FiberTarget& target,
                                const TimeGrid& grid, NoiseStream& noise,
                                const BridgeOptions& options) {
  if (target.kind != FiberTarget::Kind::PointSet) {
    throw InputError("sample_kpoint_bridge needs a point-set target");
  }
  target.validate(spec);
  const double dt = grid.dt();
  const int k = grid.steps();
  int failures = 0;
  for (;;) {
    try {
      SamplePath path;
      path.grid = grid;
      path.seed = noise.seed();
      path.resamples = failures;
      path.points.reserve(k + 1);
      path.points.push_back(options.start.value_or(spec.identity()));
      for (int i = 0; i + 1 < k; ++i) {
        const double tau = grid.T() - grid.t(i);
        const auto logs = logs_to(spec, path.points.back(), target.points);
        const Vector w = normalised_weights(spec, logs, target.log_c, tau);
        AlgebraVector drift = AlgebraVector::Zero(spec.dim);
        for (std::size_t j = 0; j < logs.size(); ++j) drift += w(j) * logs[j];
        Vector dB = noise.increment(spec.dim, dt);
        path.points.push_back(euler_heun_step(path.points.back(), drift / tau, dB, dt, spec));
        path.increments.push_back(std::move(dB));
      }
      path.increments.push_back(noise.increment(spec.dim, dt));
      const double tau = grid.T() - grid.t(k - 1);
      const Vector w =
          normalised_weights(spec, logs_to(spec, path.points.back(), target.points), target.log_c, tau);
      Eigen::Index best = 0;
      w.maxCoeff(&best);
      path.target_index = static_cast<int>(best);
      path.points.push_back(target.points[best]);
      return path;
    } catch (const BranchError& e) {
      if (++failures >= options.max_attempts) {
        throw NumericalError("k-point bridge: " + std::to_string(failures) +
                             " attempts hit the cut locus (last: " + e.what() + ")");
      }
    }
  }
}

ProjectedPath project_path(const SamplePath& path, const HomogeneousSpec& space) {
  ProjectedPath out;
  out.grid = path.grid;
  out.log_phi = path.log_phi;
  out.points.reserve(path.points.size());
  for (const auto& g : path.points) out.points.push_back(space.project(g));
  return out;
}

// ---------------------------------------------------------------------------
// Metropolis-Hastings
// ---------------------------------------------------------------------------

namespace {

class FiberChainModel {
 public:
  FiberChainModel(const HomogeneousSpec& space, const BasePoint& v, const MHOptions& opt)
      : space_(space), v_(v), opt_(opt), x0_(opt.start.value_or(space.top.identity())) {
    if (space.kind == QuotientKind::Circle) {
      if (opt.lattice_points < 1) throw InputError("mh: lattice_points must be >= 1");
      // the lattice_points fiber points closest to the start
      const double centre = (x0_(0, 0) - v(0, 0)) / kTwoPi;
      std::vector<std::pair<double, long>> byd;
      const long c = std::lround(centre);
      for (long m = c - opt.lattice_points - 1; m <= c + opt.lattice_points + 1; ++m) {
        byd.emplace_back(std::abs(v(0, 0) + kTwoPi * m - x0_(0, 0)), m);
      }
      std::sort(byd.begin(), byd.end());
      for (int i = 0; i < opt.lattice_points; ++i) lattice_.push_back(byd[i].second);
      std::sort(lattice_.begin(), lattice_.end());
    }
  }

  FiberCoord initial() const {
    NearestPoint np = nearest_fiber_point(x0_, space_, v_);
    if (space_.kind == QuotientKind::Sphere && opt_.grid_angles > 0) {
      const double idx = std::round(np.coord(0, 0) / (kTwoPi / opt_.grid_angles));
      return Matrix::Constant(1, 1, std::fmod(idx, opt_.grid_angles) * (kTwoPi / opt_.grid_angles));
    }
    return np.coord;
  }

  /// Symmetric proposal; std::nullopt when it leaves the truncated support.
  std::optional<FiberCoord> propose(const FiberCoord& s, NoiseStream& noise) const {
    switch (space_.kind) {
      case QuotientKind::Circle: {
        const long m = std::lround(s(0, 0)) + integer_step(noise);
        if (!std::binary_search(lattice_.begin(), lattice_.end(), m)) return std::nullopt;
        return Matrix::Constant(1, 1, static_cast<double>(m));
      }
      case QuotientKind::Sphere: {
        if (opt_.grid_angles > 0) {
          const double h = kTwoPi / opt_.grid_angles;
          long idx = std::lround(s(0, 0) / h) + integer_step(noise, 1.0 / h);
          idx = ((idx % opt_.grid_angles) + opt_.grid_angles) % opt_.grid_angles;
          return Matrix::Constant(1, 1, idx * h);
        }
        return Matrix::Constant(1, 1, wrap_angle(s(0, 0) + opt_.proposal_scale * noise.normal()));
      }
      case QuotientKind::SPD: {
        Eigen::Vector3d step;
        for (int i = 0; i < 3; ++i) step(i) = opt_.proposal_scale * noise.normal();
        return Matrix(nearest_rotation(Eigen::Matrix3d(s) * exp_so3(step)));
      }
    }
    return std::nullopt;
  }

  GroupElement point(const FiberCoord& s) const { return space_.fiber_point(v_, s); }

  double log_q(const GroupElement& u) const {
    return -space_.top.metric.norm_sq(space_.top.log_to(x0_, u)) / (2.0 * opt_.T);
  }

  const GroupElement& start() const { return x0_; }
  const std::vector<long>& lattice() const { return lattice_; }

 private:
  long integer_step(NoiseStream& noise, double unit = 1.0) const {
    const double z = noise.normal();
    long step = std::lround(opt_.proposal_scale * unit * z);
    if (step == 0) step = z < 0.0 ? -1 : 1;
    return step;
  }

  const HomogeneousSpec& space_;
  BasePoint v_;
  MHOptions opt_;
  GroupElement x0_;
  std::vector<long> lattice_;
};

double estimate_log_c(const GroupSpec& spec, const GroupElement& u, const GroupElement& x0,
                      const TimeGrid& grid, int bridges, const NoiseStream& noise,
                      std::uint64_t eval_index) {
  std::vector<double> lp(bridges);
  parallel_for(bridges, [&](std::size_t b) {
    NoiseStream ns = noise.child("mh-c", eval_index * 1000003ULL + b);
    // left translation by x0^{-1} maps bridges x0 -> u onto bridges e -> x0^{-1} u
    const GroupElement target = spec.compose(spec.inverse(x0), u);
    lp[b] = sample_guided_bridge(spec, target, grid, ns).log_phi;
  });
  const double m = *std::max_element(lp.begin(), lp.end());
  double s = 0.0;
  for (double x : lp) s += std::exp(x - m);
  return m + std::log(s / bridges);
}

}  // namespace

MHResult mh_fiber_sampler(const HomogeneousSpec& space, const BasePoint& v, int iterations,
                          int bridges_per_eval, NoiseStream& noise, const MHOptions& options) {
  if (iterations < 1) throw InputError("mh: iterations must be >= 1");
  if (bridges_per_eval < 1) throw InputError("mh: bridges_per_eval must be >= 1");
  if (!(options.T > 0.0)) throw InputError("mh: T must be positive");
  if (!(options.proposal_scale > 0.0)) throw InputError("mh: proposal_scale must be positive");
  space.check_base_point(v);
  const FiberChainModel model(space, v, options);
  const GroupSpec& spec = space.top;
  const TimeGrid grid(options.T, options.steps);
  const NoiseStream bridge_noise = noise.child("mh-bridges", 0);

  FiberCoord cur = model.initial();
  GroupElement cur_point = model.point(cur);
  double cur_log_c = estimate_log_c(spec, cur_point, model.start(), grid, bridges_per_eval,
                                    bridge_noise, 0);
  double cur_log_q = model.log_q(cur_point);

  MHResult result;
  result.chain.reserve(iterations);
  int since_accept = 0;
  int bridge_failures = 0;
  bool warned = false;
  for (int it = 0; it < iterations; ++it) {
    const std::optional<FiberCoord> prop = model.propose(cur, noise);
    const double u = noise.uniform();
    bool accept = false;
    if (prop && (*prop - cur).norm() == 0.0) {
      accept = true;
    } else if (prop) {
      const GroupElement p = model.point(*prop);
      double log_c = 0.0;
      double log_q = 0.0;
      bool ok = true;
      try {
        log_q = model.log_q(p);
        log_c = estimate_log_c(spec, p, model.start(), grid, bridges_per_eval, bridge_noise, it + 1);
      } catch (const BranchError&) {
        ok = false;  // proposal on the cut locus seen from the start
      } catch (const NumericalError&) {
        ok = false;  // every bridge attempt toward the proposal crossed the cut locus
        ++bridge_failures;
      }
      if (ok && std::log(u) < (log_q + log_c) - (cur_log_q + cur_log_c)) {
        accept = true;
        cur = *prop;
        cur_point = p;
        cur_log_c = log_c;
        cur_log_q = log_q;
      }
    }
    if (accept) {
      ++result.accepted;
      since_accept = 0;
    } else if (++since_accept >= options.zero_accept_window && !warned) {
      result.warnings.push_back("mh: no acceptance in " + std::to_string(since_accept) +
                                " consecutive iterations; try a smaller proposal_scale (now " +
                                std::to_string(options.proposal_scale) + ")");
      warned = true;
    }
    result.chain.push_back({cur, cur_point, cur_log_c, accept});
  }
  if (bridge_failures > 0) {
    result.warnings.push_back("mh: " + std::to_string(bridge_failures) +
                              " proposals rejected because their bridges kept hitting the cut locus");
  }
  return result;
}

std::vector<std::string> chain_csv_header(const HomogeneousSpec& space) {
  std::vector<std::string> h{"iteration"};
  switch (space.kind) {
    case QuotientKind::Circle:
      h.push_back("m");
      break;
    case QuotientKind::Sphere:
      h.push_back("s");
      break;
    case QuotientKind::SPD:
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) h.push_back("r" + std::to_string(r) + std::to_string(c));
      break;
  }
  h.push_back("log_c");
  h.push_back("accepted");
  return h;
}

void append_chain_rows(CsvWriter& csv, const MHResult& result) {
  for (std::size_t i = 0; i < result.chain.size(); ++i) {
    const MHEntry& e = result.chain[i];
    csv.add(static_cast<long long>(i));
    for (int r = 0; r < e.coord.rows(); ++r)
      for (int c = 0; c < e.coord.cols(); ++c) csv.add(e.coord(r, c));
    csv.add(e.log_c).add(e.accepted ? 1 : 0);
    csv.end_row();
  }
}

}  // namespace liebridge
