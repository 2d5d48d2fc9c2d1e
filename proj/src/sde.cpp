#include "liebridge/sde.hpp"

#include <cmath>
#include <numbers>

namespace liebridge {

TimeGrid::TimeGrid(double T, int k) : T_(T), k_(k) {
  if (!(T > 0.0) || !std::isfinite(T)) throw InputError("time grid needs T > 0");
  if (k < 1) throw InputError("time grid needs at least one step");
}

GroupElement euler_heun_step(const GroupElement& x, const AlgebraVector& drift, const Vector& dB,
                             double dt, const GroupSpec& spec) {
  if (!(dt > 0.0)) throw InputError("euler_heun_step: dt must be positive");
  if (dB.size() != spec.dim || drift.size() != spec.dim) {
    throw InputError("euler_heun_step: increment dimension does not match the group");
  }
  const AlgebraVector a = spec.metric.inv_sqrt() * dB + (drift - 0.5 * spec.v0) * dt;
  if (spec.kind == GroupKind::Abelian) return x + a;
  const Matrix h = spec.hat(a);
  // predictor x + x H, corrector averages the field at both ends
  GroupElement out = x + x * h + 0.5 * (x * h) * h;
  spec.reproject(out);
  return out;
}

SamplePath sample_brownian_motion(const GroupSpec& spec, const TimeGrid& grid, NoiseStream& noise,
                                  const std::optional<GroupElement>& start) {
  SamplePath path;
  path.grid = grid;
  path.seed = noise.seed();
  path.points.reserve(grid.steps() + 1);
  path.points.push_back(start.value_or(spec.identity()));
  const double dt = grid.dt();
  const AlgebraVector zero = AlgebraVector::Zero(spec.dim);
  for (int i = 0; i < grid.steps(); ++i) {
    Vector dB = noise.increment(spec.dim, dt);
    path.points.push_back(euler_heun_step(path.points.back(), zero, dB, dt, spec));
    path.increments.push_back(std::move(dB));
  }
  return path;
}

namespace {

PhiRoute resolve(PhiRoute route, const GroupSpec& spec) {
  if (route != PhiRoute::Auto) return route;
  if (spec.kind == GroupKind::Abelian) return PhiRoute::Auto;
  return spec.bi_invariant ? PhiRoute::Radial : PhiRoute::General;
}

/// Central-difference probes of rho(y) = |log(y^{-1} v)|_A^2 along the driving fields.
class RhoProbe {
 public:
  explicit RhoProbe(const GroupSpec& spec) : spec_(spec) {
    for (int i = 0; i < spec.dim; ++i) {
      const AlgebraVector dir = spec.metric.inv_sqrt().col(i);
      plus_.push_back(spec.exp(kStep * dir));
      minus_.push_back(spec.exp(-kStep * dir));
    }
    has_v0_ = spec.v0.norm() > 1e-14;
    if (has_v0_) {
      v0_plus_ = spec.exp(kStep * spec.v0);
      v0_minus_ = spec.exp(-kStep * spec.v0);
    }
  }

  /// On SO(3) the stencil log is taken on the branch nearest to the centre log `w`, so a
  /// stencil straddling the cut locus sees the smooth continuation of rho rather than its kink.
  double rho(const GroupElement& y, const GroupElement& v, const AlgebraVector& w) const {
    AlgebraVector u = spec_.log_to(y, v);
    if (spec_.kind == GroupKind::SO3) {
      const double th = u.norm();
      if (th > 0.5 * std::numbers::pi) {
        const AlgebraVector alt = u * (1.0 - 2.0 * std::numbers::pi / th);
        if ((alt - w).norm() < (u - w).norm()) u = alt;
      }
    }
    return spec_.metric.norm_sq(u);
  }

  /// First derivatives V_i rho and generator L rho = 1/2 sum V_i^2 rho - 1/2 V_0 rho.
  void derivatives(const GroupElement& y, const GroupElement& v, const AlgebraVector& w, double rho0,
                   Vector& grad, double& gen) const {
    grad.resize(spec_.dim);
    double lap = 0.0;
    for (int i = 0; i < spec_.dim; ++i) {
      const double rp = rho(spec_.compose(y, plus_[i]), v, w);
      const double rm = rho(spec_.compose(y, minus_[i]), v, w);
      grad(i) = (rp - rm) / (2.0 * kStep);
      lap += (rp - 2.0 * rho0 + rm) / (kStep * kStep);
    }
    gen = 0.5 * lap;
    if (has_v0_) {
      const double rp = rho(spec_.compose(y, v0_plus_), v, w);
      const double rm = rho(spec_.compose(y, v0_minus_), v, w);
      gen -= 0.5 * (rp - rm) / (2.0 * kStep);
    }
  }

 private:
  static constexpr double kStep = 5e-4;
  const GroupSpec& spec_;
  std::vector<GroupElement> plus_, minus_;
  GroupElement v0_plus_, v0_minus_;
  bool has_v0_ = false;
};

double general_log_phi(const SamplePath& path, const GroupElement& v, const GroupSpec& spec) {
  const RhoProbe probe(spec);
  const int k = path.grid.steps();
  const double dt = path.grid.dt();
  const double T = path.grid.T();
  const double d = spec.dim;
  const Matrix& a_sqrt = spec.metric.sqrt();
  double acc = 0.0;
  Vector grad;
  for (int i = 0; i + 1 < k; ++i) {
    const GroupElement& y = path.points[i];
    const double tau = T - path.grid.t(i);
    const AlgebraVector w = spec.log_to(y, v);
    const double rho0 = spec.metric.norm_sq(w);
    double gen = 0.0;
    probe.derivatives(y, v, w, rho0, grad, gen);
    const Vector c = a_sqrt * w / tau;
    const Vector g = -grad / (2.0 * tau);
    const Vector diff = g - c;
    acc += diff.dot(path.increments[i]);
    acc += dt * (diff.dot(c) + 0.5 * c.squaredNorm() - rho0 / (2.0 * tau * tau) -
                 (gen - d) / (2.0 * tau));
  }
  return acc;
}

double radial_log_phi(const SamplePath& path, const GroupElement& v, const GroupSpec& spec) {
  const int k = path.grid.steps();
  const double dt = path.grid.dt();
  double acc = 0.0;
  for (int i = 0; i + 1 < k; ++i) {
    const double tau = path.grid.T() - path.grid.t(i);
    acc += radial_log_phi_increment(spec.kind, spec.log_to(path.points[i], v), dt, tau);
  }
  return acc;
}

}  // namespace

double radial_log_phi_increment(GroupKind kind, const AlgebraVector& w, double dt, double tau) {
  if (kind == GroupKind::Abelian) return 0.0;
  constexpr double h = 1e-4;
  const double lp = std::log(jacobian_det_exp(kind, (1.0 + h) * w));
  const double lm = std::log(jacobian_det_exp(kind, (1.0 - h) * w));
  return -0.5 * (lp - lm) / (2.0 * h) * dt / tau;
}

double estimate_log_phi(const SamplePath& path, const GroupElement& v, const GroupSpec& spec,
                        PhiRoute route) {
  if (static_cast<int>(path.points.size()) != path.grid.steps() + 1) {
    throw InputError("estimate_log_phi: path length does not match its grid");
  }
  switch (resolve(route, spec)) {
    case PhiRoute::Auto:
      return 0.0;
    case PhiRoute::Radial:
      return radial_log_phi(path, v, spec);
    case PhiRoute::General:
      if (static_cast<int>(path.increments.size()) != path.grid.steps()) {
        throw InputError("estimate_log_phi: general weight needs the driving increments");
      }
      return general_log_phi(path, v, spec);
  }
  return 0.0;
}

SamplePath sample_guided_bridge(const GroupSpec& spec, const GroupElement& v, const TimeGrid& grid,
                                NoiseStream& noise, const BridgeOptions& options) {
  spec.check(v);
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
        const AlgebraVector drift = spec.log_to(path.points.back(), v) / tau;
        Vector dB = noise.increment(spec.dim, dt);
        path.points.push_back(euler_heun_step(path.points.back(), drift, dB, dt, spec));
        path.increments.push_back(std::move(dB));
      }
      // the drift is singular on the last interval; its noise is still drawn so the
      // stream position does not depend on the pinning
      path.increments.push_back(noise.increment(spec.dim, dt));
      path.points.push_back(v);
      path.log_phi = estimate_log_phi(path, v, spec, options.route);
      if (!std::isfinite(path.log_phi)) throw NumericalError("guided bridge: non-finite log phi");
      return path;
    } catch (const BranchError& e) {
      if (++failures >= options.max_attempts) {
        throw NumericalError("guided bridge: " + std::to_string(failures) +
                             " attempts hit the cut locus (last: " + e.what() + ")");
      }
    }
  }
}

std::vector<std::string> path_csv_header(const GroupSpec& spec) {
  std::vector<std::string> h{"path", "t"};
  if (spec.kind == GroupKind::Abelian) {
    for (int i = 0; i < spec.dim; ++i) h.push_back("x" + std::to_string(i));
  } else {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h.push_back("x" + std::to_string(r) + std::to_string(c));
  }
  h.push_back("log_phi");
  return h;
}

void append_path_rows(CsvWriter& csv, const SamplePath& path, int path_index) {
  const int n = static_cast<int>(path.points.size());
  for (int i = 0; i < n; ++i) {
    csv.add(path_index).add(path.grid.t(i));
    const GroupElement& x = path.points[i];
    for (int r = 0; r < x.rows(); ++r)
      for (int c = 0; c < x.cols(); ++c) csv.add(x(r, c));
    if (i + 1 == n) {
      csv.add(path.log_phi);
    } else {
      csv.add_empty();
    }
    csv.end_row();
  }
}

}  // namespace liebridge
