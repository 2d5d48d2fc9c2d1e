#pragma once

#include <string>
#include <vector>

#include "liebridge/fiber.hpp"

namespace liebridge {

struct DensityEstimate {
  double value = 0.0;
  double mc_std_error = 0.0;
  int n_bridges = 0;
};

/// sqrt(det A) (2 pi T)^{-d/2} exp(-||log v||_A^2 / (2T)): a density with respect to Haar
/// measure normalised to Lebesgue measure in algebra coordinates at the identity.
double q_density(const GroupElement& v, const MetricParam& A, double T, const GroupSpec& spec);
double log_q_density(const GroupElement& v, const MetricParam& A, double T, const GroupSpec& spec);

/// q_T(e, v) times the mean of phi over n guided bridges simulated under A.
DensityEstimate heat_kernel_is(const GroupElement& v, const MetricParam& A, double T, int n,
                               const GroupSpec& spec, const NoiseStream& noise, int steps = 100);

/// sum_j log[q_T(e, v_j) mean_i phi^i_j]. Observations whose bridges fail are collected and
/// reported together in one NumericalError.
double log_likelihood(const std::vector<GroupElement>& data, const MetricParam& A, double T, int m,
                      const GroupSpec& spec, const NoiseStream& noise, int steps = 20);

struct MLEIterate {
  Matrix theta;            ///< metric A or mean mu
  double loglik = 0.0;     ///< log-likelihood at theta (noise of that iteration)
  double gradnorm = 0.0;   ///< norm of the normalised gradient at theta
  bool clamped = false;    ///< eigenvalue clamp fired when producing theta
};

struct MLETrace {
  std::vector<MLEIterate> iterations;  ///< K + 1 entries: theta_0 ... theta_K
  std::vector<std::string> warnings;
};

struct MLEOptions {
  double T = 1.0;
  int steps = 20;
  double fd_step = 1e-3;
  double eigen_floor = 1e-4;
};

/// Gradient ascent on log l / (n d) over the upper triangle of A. Each iteration draws fresh
/// bridge noise shared by all finite-difference evaluations of that iteration.
MLETrace metric_mle(const std::vector<GroupElement>& data, const MetricParam& theta0, double eta,
                    int K, int m, const GroupSpec& spec, const NoiseStream& noise,
                    const MLEOptions& options = {});

/// Sum over observations of log p_T(mu, P_j), each estimated with m Fermi bridges from e to the
/// fiber over mu^{-1/2} P_j mu^{-1/2}.
double spd_log_likelihood(const std::vector<BasePoint>& data, const Eigen::Matrix3d& mu, double T,
                          int m, const NoiseStream& noise, int steps = 20);

/// Gradient ascent for the diffusion mean on SPD(3) over the 6 upper entries of mu,
/// normalised by 6 n.
MLETrace diffusion_mean_spd(const std::vector<BasePoint>& data, const Eigen::Matrix3d& mu0,
                            double eta, int K, int m, const NoiseStream& noise,
                            const MLEOptions& options = {});

/// Truncated Legendre expansion of the unit-sphere heat kernel (generator Laplacian / 2).
double s2_exact_kernel(double theta, double T, int L);

/// Fermi-bridge estimate of the S^2 density at v under the bi-invariant metric.
DensityEstimate s2_kernel_is(const BasePoint& v, double T, int n, const NoiseStream& noise,
                             int steps = 100);

/// Estimate of the S^2 density of the one-point motion at x: 2 pi times the mean over the
/// fiber angle of the SO(3) density, using n_bridges point bridges with stratified angles.
DensityEstimate pushforward_density(const GroupSpec& so3, const Eigen::Vector3d& x, double T,
                                    int n_bridges, const NoiseStream& noise, int steps = 50);

struct GridCell {
  double polar = 0.0;    ///< polar angle of the cell centre
  double azimuth = 0.0;  ///< azimuth of the cell centre
  double area = 0.0;
  double density = 0.0;
  double mc_std_error = 0.0;
};

struct DensityGrid {
  double T = 0.0;
  int bands = 0;
  int sectors = 0;
  std::vector<GridCell> cells;  ///< band-major
  /// 1/2 sum |p - 1/(4 pi)| area.
  double tv_to_uniform() const;
};

struct PushforwardOptions {
  int bands = 16;     ///< equal-area bands in cos(polar)
  int steps = 50;
};

/// One equal-area grid per T; n_samples cells (bands x n_samples / bands sectors), each
/// estimated with n_bridges bridges.
std::vector<DensityGrid> pushforward_density_grid(const MetricParam& metric,
                                                  const std::vector<double>& T_list, int n_samples,
                                                  int n_bridges, const NoiseStream& noise,
                                                  const PushforwardOptions& options = {});

/// max / min of the pushforward density over `sectors` azimuth bins on the circle of the
/// given polar angle, each bin estimated with bridges_per_sector bridges (stratified in
/// azimuth within the bin and in fiber angle).
double anisotropy_ratio(const MetricParam& metric, double T, double polar, int sectors,
                        int bridges_per_sector, const NoiseStream& noise, int steps = 50);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// iteration, 6 upper-triangle entries of theta, loglik, gradnorm.
std::vector<std::string> trace_csv_header();
void append_trace_rows(CsvWriter& csv, const MLETrace& trace);
std::string trace_json(const MLETrace& trace);

std::vector<std::string> grid_csv_header();
void append_grid_rows(CsvWriter& csv, const DensityGrid& grid);
std::string grid_json(const DensityGrid& grid);

}  // namespace liebridge
