#include "liebridge/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "liebridge/csv.hpp"
#include "liebridge/estimators.hpp"
#include "liebridge/fiber.hpp"

#ifndef LIEBRIDGE_VERSION
#define LIEBRIDGE_VERSION "0.0.0"
#endif

namespace liebridge {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> literal_numbers(const std::string& literal, const std::string& body) {
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used == 0 || used != item.size() || !std::isfinite(x)) {
      throw InputError("malformed literal '" + literal + "'");
    }
    out.push_back(x);
  }
  return out;
}

std::pair<std::string, std::vector<double>> split_literal(const std::string& literal) {
  const auto colon = literal.find(':');
  if (colon == std::string::npos) return {literal, {}};
  return {literal.substr(0, colon), literal_numbers(literal, literal.substr(colon + 1))};
}

void expect_count(const std::string& literal, const std::vector<double>& xs, std::size_t n) {
  if (xs.size() != n) {
    throw InputError("literal '" + literal + "' needs " + std::to_string(n) + " numbers");
  }
}

Matrix matrix9(const std::vector<double>& xs) {
  Matrix m(3, 3);
  for (int i = 0; i < 9; ++i) m(i / 3, i % 3) = xs[i];
  return m;
}

struct Output {
  fs::path dir;
  std::vector<FileRecord> files;

  void write(const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw InputError("cannot write " + (dir / name).string());
    f << content;
    if (!f) throw InputError("write failed for " + (dir / name).string());
    files.push_back({name, sha256_hex(content), content.size()});
  }
};

GroupSpec group_of(const ExperimentConfig& c) { return configured_space(c).group; }

HomogeneousSpec quotient_of(const ExperimentConfig& c) {
  auto sel = configured_space(c);
  if (!sel.quotient) {
    throw InputError("experiment '" + c.experiment + "' needs a homogeneous space (s2, spd3, circle)");
  }
  return *sel.quotient;
}

MetricParam metric_from(const std::vector<double>& upper, int dim) {
  return upper.empty() ? MetricParam::identity(dim) : MetricParam::from_upper(upper, dim);
}

void run_bm(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const GroupSpec spec = group_of(c);
  const TimeGrid grid(c.T, c.steps);
  std::vector<SamplePath> paths(c.n_paths);
  const NoiseStream master(c.seed);
  parallel_for(paths.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("bm", i);
    paths[i] = sample_brownian_motion(spec, grid, ns);
  });
  CsvWriter csv(path_csv_header(spec));
  double msd = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    append_path_rows(csv, paths[i], static_cast<int>(i));
    try {
      msd += spec.metric.norm_sq(spec.log(paths[i].points.back()));
    } catch (const BranchError&) {
      msd += std::nan("");
    }
  }
  out.write("paths.csv", csv.str());
  man.summary["mean_sq_distance"] = msd / c.n_paths;
}

void run_bridge(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const GroupSpec spec = group_of(c);
  const GroupElement v = parse_group_literal(c.target, spec);
  const TimeGrid grid(c.T, c.steps);
  std::vector<SamplePath> paths(c.n_paths);
  const NoiseStream master(c.seed);
  parallel_for(paths.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("bridge", i);
    paths[i] = sample_guided_bridge(spec, v, grid, ns);
  });
  CsvWriter csv(path_csv_header(spec));
  double mean_phi = 0.0, resamples = 0.0, penultimate = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    append_path_rows(csv, paths[i], static_cast<int>(i));
    mean_phi += std::exp(paths[i].log_phi);
    resamples += paths[i].resamples;
    penultimate += spec.distance(paths[i].points[c.steps - 1], v);
  }
  mean_phi /= c.n_paths;
  out.write("paths.csv", csv.str());
  man.summary["mean_phi"] = mean_phi;
  man.summary["density_estimate"] = q_density(v, spec.metric, c.T, spec) * mean_phi;
  man.summary["resamples"] = resamples;
  man.summary["mean_penultimate_distance"] = penultimate / c.n_paths;
}

void run_fermi(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const HomogeneousSpec space = quotient_of(c);
  const BasePoint v = parse_base_literal(c.target, space);
  const TimeGrid grid(c.T, c.steps);
  std::vector<SamplePath> paths(c.n_paths);
  const NoiseStream master(c.seed);
  parallel_for(paths.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("fermi", i);
    paths[i] = sample_fermi_bridge(space, v, grid, ns);
  });
  CsvWriter csv(path_csv_header(space.top));
  double mean_phi = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    append_path_rows(csv, paths[i], static_cast<int>(i));
    mean_phi += std::exp(paths[i].log_phi);
    worst = std::max(worst, space.base_distance(space.project(paths[i].points[c.steps - 1]), v));
  }
  mean_phi /= c.n_paths;
  out.write("paths.csv", csv.str());
  man.summary["mean_phi"] = mean_phi;
  man.summary["density_estimate"] = std::exp(fermi_log_q(space, v, c.T)) * mean_phi;
  man.summary["max_penultimate_base_distance"] = worst;
}

void run_kpoint(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const HomogeneousSpec space = quotient_of(c);
  if (space.kind != QuotientKind::Circle) throw InputError("kpoint runs on the circle fiber v + 2 pi Z");
  const GroupSpec& spec = space.top;
  const BasePoint v = parse_base_literal(c.target, space);
  // the lattice_points fiber points nearest the start
  std::vector<std::pair<double, long>> byd;
  for (long m = -c.lattice_points - 1; m <= c.lattice_points + 1; ++m) {
    byd.emplace_back(std::abs(v(0, 0) + kTwoPi * m), m);
  }
  std::sort(byd.begin(), byd.end());
  std::vector<long> ms;
  for (int i = 0; i < c.lattice_points; ++i) ms.push_back(byd[i].second);
  std::sort(ms.begin(), ms.end());
  std::vector<GroupElement> pts;
  for (long m : ms) pts.push_back(Matrix::Constant(1, 1, v(0, 0) + kTwoPi * m));
  const FiberTarget target = FiberTarget::point_set(pts, std::vector<double>(pts.size(), 0.0));
  const TimeGrid grid(c.T, c.steps);
  std::vector<SamplePath> paths(c.n_paths);
  const NoiseStream master(c.seed);
  parallel_for(paths.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("kpoint", i);
    paths[i] = sample_kpoint_bridge(spec, target, grid, ns);
  });
  CsvWriter csv({"path", "target_index", "m", "endpoint"});
  std::vector<double> freq(pts.size(), 0.0);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const int t = paths[i].target_index;
    csv.add(static_cast<int>(i)).add(t).add(static_cast<long long>(ms[t])).add(paths[i].points.back()(0, 0));
    csv.end_row();
    freq[t] += 1.0 / c.n_paths;
  }
  out.write("endpoints.csv", csv.str());
  std::vector<double> w(pts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    w[i] = std::exp(-spec.metric.norm_sq(pts[i]) / (2.0 * c.T));
    total += w[i];
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    man.summary["freq_m" + std::to_string(ms[i])] = freq[i];
    man.summary["weight_m" + std::to_string(ms[i])] = w[i] / total;
    tv += 0.5 * std::abs(freq[i] - w[i] / total);
  }
  man.summary["total_variation"] = tv;
}

void run_mh(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const HomogeneousSpec space = quotient_of(c);
  const BasePoint v = parse_base_literal(c.target, space);
  MHOptions opt;
  opt.T = c.T;
  opt.steps = c.steps;
  opt.proposal_scale = c.proposal_scale;
  opt.lattice_points = c.lattice_points;
  opt.grid_angles = c.grid_angles;
  NoiseStream noise(derive_seed(c.seed, "mh", 0));
  const MHResult res = mh_fiber_sampler(space, v, c.iterations, c.n_bridges, noise, opt);
  CsvWriter csv(chain_csv_header(space));
  append_chain_rows(csv, res);
  out.write("chain.csv", csv.str());
  man.summary["acceptance_rate"] = static_cast<double>(res.accepted) / c.iterations;
  man.warnings.insert(man.warnings.end(), res.warnings.begin(), res.warnings.end());
}

void run_metric_mle(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const GroupSpec base = group_of(c);
  if (base.kind == GroupKind::GL3) throw InputError("metric-mle supports so3 and abelian:d");
  const GroupSpec truth = with_metric(base, metric_from(c.true_metric, base.dim));
  const TimeGrid grid(c.T, c.steps);
  std::vector<GroupElement> data(c.n_obs);
  const NoiseStream master(c.seed);
  parallel_for(data.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("data", i);
    data[i] = sample_brownian_motion(truth, grid, ns).points.back();
  });
  MLEOptions opt;
  opt.T = c.T;
  opt.steps = c.steps;
  const MLETrace trace = metric_mle(data, metric_from(c.metric, base.dim), c.eta, c.K, c.m, base,
                                    master.child("mle", 0), opt);
  if (base.dim == 3) {
    CsvWriter csv(trace_csv_header());
    append_trace_rows(csv, trace);
    out.write("trace.csv", csv.str());
  }
  out.write("trace.json", trace_json(trace));
  const Matrix& fin = trace.iterations.back().theta;
  for (int a = 0; a < fin.rows(); ++a)
    for (int b = a; b < fin.cols(); ++b)
      man.summary["theta" + std::to_string(a) + std::to_string(b)] = fin(a, b);
  man.summary["final_loglik"] = trace.iterations.back().loglik;
  man.warnings.insert(man.warnings.end(), trace.warnings.begin(), trace.warnings.end());
}

void run_spd_mean(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const HomogeneousSpec space = spd3_space();
  if (c.space != "spd3") throw InputError("spd-mean needs space=spd3");
  const TimeGrid grid(c.T, c.steps);
  std::vector<BasePoint> data(c.n_obs);
  const NoiseStream master(c.seed);
  parallel_for(data.size(), [&](std::size_t i) {
    NoiseStream ns = master.child("data", i);
    data[i] = space.project(sample_brownian_motion(space.top, grid, ns).points.back());
  });
  const Eigen::Matrix3d mu0 = parse_base_literal(c.init, space);
  MLEOptions opt;
  opt.T = c.T;
  opt.steps = c.steps;
  const MLETrace trace = diffusion_mean_spd(data, mu0, c.eta, c.K, c.m, master.child("mean", 0), opt);
  CsvWriter csv(trace_csv_header());
  append_trace_rows(csv, trace);
  out.write("trace.csv", csv.str());
  out.write("trace.json", trace_json(trace));
  const Matrix& fin = trace.iterations.back().theta;
  man.summary["distance_to_identity_fro"] = (fin - Matrix::Identity(3, 3)).norm();
  man.summary["final_loglik"] = trace.iterations.back().loglik;
  man.warnings.insert(man.warnings.end(), trace.warnings.begin(), trace.warnings.end());
}

void run_s2_kernel(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const int g = c.grid_points;
  std::vector<DensityEstimate> est(g);
  std::vector<std::string> err(g);
  const NoiseStream master(c.seed);
  for (int j = 0; j < g; ++j) {
    const double th = std::numbers::pi * j / (g - 1);
    const BasePoint v = Eigen::Vector3d(std::sin(th), 0.0, std::cos(th));
    try {
      est[j] = s2_kernel_is(v, c.T, c.n_bridges, master.child("point", j), c.steps);
    } catch (const std::exception& e) {
      err[j] = e.what();
      est[j].value = std::nan("");
      est[j].mc_std_error = std::nan("");
    }
  }
  CsvWriter csv({"theta", "estimate", "std_error", "exact"});
  double worst = 0.0;
  for (int j = 0; j < g; ++j) {
    const double th = std::numbers::pi * j / (g - 1);
    const double exact = s2_exact_kernel(th, c.T, 20);
    csv.add(th).add(est[j].value).add(est[j].mc_std_error).add(exact);
    csv.end_row();
    if (exact > 0.01) worst = std::max(worst, std::abs(est[j].value - exact) / exact);
    if (!err[j].empty()) man.warnings.push_back("s2-kernel point " + std::to_string(j) + ": " + err[j]);
  }
  out.write("grid.csv", csv.str());
  man.summary["max_rel_error_where_exact_gt_0.01"] = worst;
}

void run_s2_aniso(const ExperimentConfig& c, Output& out, RunManifest& man) {
  const MetricParam metric = metric_from(c.metric, 3);
  const NoiseStream master(c.seed);
  PushforwardOptions opt;
  opt.steps = c.steps;
  const auto grids = pushforward_density_grid(metric, c.T_list, c.n_samples, c.n_bridges,
                                              master.child("grid", 0), opt);
  for (std::size_t i = 0; i < grids.size(); ++i) {
    CsvWriter csv(grid_csv_header());
    append_grid_rows(csv, grids[i]);
    out.write("grid_" + std::to_string(i) + ".csv", csv.str());
    man.summary["tv_to_uniform_T" + format_double(grids[i].T)] = grids[i].tv_to_uniform();
  }
  man.summary["anisotropy_ratio_T" + format_double(c.T_list.front())] =
      anisotropy_ratio(metric, c.T_list.front(), 0.5, 8, 64, master.child("aniso", 0), c.steps);
}

}  // namespace

SpaceSelection configured_space(const ExperimentConfig& c) {
  auto sel = space_from_name(c.space);
  if (c.metric.empty()) return sel;
  const MetricParam metric = MetricParam::from_upper(c.metric, sel.group.dim);
  return space_from_name(c.space, metric);
}

GroupElement parse_group_literal(const std::string& literal, const GroupSpec& spec) {
  const auto [kind, xs] = split_literal(literal);
  GroupElement g;
  if (kind == "identity" || kind == "e") {
    g = spec.identity();
  } else if (kind == "rx" || kind == "ry" || kind == "rz") {
    if (spec.kind != GroupKind::SO3) throw InputError("literal '" + literal + "' is a rotation");
    expect_count(literal, xs, 1);
    Eigen::Vector3d a = Eigen::Vector3d::Zero();
    a(kind == "rx" ? 0 : kind == "ry" ? 1 : 2) = xs[0];
    g = exp_so3(a);
  } else if (kind == "rotvec") {
    if (spec.kind != GroupKind::SO3) throw InputError("literal '" + literal + "' is a rotation");
    expect_count(literal, xs, 3);
    g = exp_so3(Eigen::Vector3d(xs[0], xs[1], xs[2]));
  } else if (kind == "vec") {
    if (spec.kind != GroupKind::Abelian) throw InputError("literal '" + literal + "' needs an abelian group");
    expect_count(literal, xs, static_cast<std::size_t>(spec.dim));
    g = Eigen::Map<const Vector>(xs.data(), spec.dim);
  } else if (kind == "diag") {
    expect_count(literal, xs, 3);
    g = Eigen::Vector3d(xs[0], xs[1], xs[2]).asDiagonal();
  } else if (kind == "mat") {
    expect_count(literal, xs, 9);
    g = matrix9(xs);
  } else {
    throw InputError("unknown group literal '" + literal + "'");
  }
  spec.check(g);
  return g;
}

BasePoint parse_base_literal(const std::string& literal, const HomogeneousSpec& space) {
  const auto [kind, xs] = split_literal(literal);
  BasePoint v;
  if (kind == "identity" || kind == "north") {
    v = space.origin();
  } else if (kind == "s2") {
    expect_count(literal, xs, 3);
    const Eigen::Vector3d p(xs[0], xs[1], xs[2]);
    if (!(p.norm() > 0.0)) throw InputError("literal '" + literal + "' is the zero vector");
    v = p.normalized();
  } else if (kind == "polar") {
    expect_count(literal, xs, 2);
    v = Eigen::Vector3d(std::sin(xs[0]) * std::cos(xs[1]), std::sin(xs[0]) * std::sin(xs[1]), std::cos(xs[0]));
  } else if (kind == "angle") {
    expect_count(literal, xs, 1);
    v = Matrix::Constant(1, 1, xs[0]);
  } else if (kind == "diag") {
    expect_count(literal, xs, 3);
    v = Eigen::Vector3d(xs[0], xs[1], xs[2]).asDiagonal();
  } else if (kind == "mat") {
    expect_count(literal, xs, 9);
    v = matrix9(xs);
  } else {
    throw InputError("unknown base-point literal '" + literal + "'");
  }
  space.check_base_point(v);
  return v;
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["tool"] = "liebridge";
  j["version"] = m.version;
  j["experiment"] = m.config.experiment;
  j["config"] = render_config(m.config);
  j["files"] = nlohmann::json::array();
  for (const auto& f : m.files) j["files"].push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["wall_time_s"] = m.wall_time_s;
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [k, v] : m.summary) {
    if (std::isfinite(v)) {
      s[k] = v;
    } else {
      s[k] = format_double(v);
    }
  }
  j["summary"] = s;
  j["warnings"] = m.warnings;
  return j.dump(2) + "\n";
}

RunManifest run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  const auto t0 = std::chrono::steady_clock::now();
  Output out;
  out.dir = config.output_dir;
  std::error_code ec;
  fs::create_directories(out.dir, ec);
  if (ec) throw InputError("cannot create output directory " + config.output_dir + ": " + ec.message());
  RunManifest man;
  man.config = config;
  man.version = LIEBRIDGE_VERSION;
  const std::string& e = config.experiment;
  if (e == "bm") {
    run_bm(config, out, man);
  } else if (e == "bridge") {
    run_bridge(config, out, man);
  } else if (e == "fermi") {
    run_fermi(config, out, man);
  } else if (e == "kpoint") {
    run_kpoint(config, out, man);
  } else if (e == "mh") {
    run_mh(config, out, man);
  } else if (e == "metric-mle") {
    run_metric_mle(config, out, man);
  } else if (e == "spd-mean") {
    run_spd_mean(config, out, man);
  } else if (e == "s2-kernel") {
    run_s2_kernel(config, out, man);
  } else if (e == "s2-aniso") {
    run_s2_aniso(config, out, man);
  } else {
    throw InputError("unknown experiment '" + e + "'");
  }
  man.files = out.files;
  man.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream f(out.dir / "manifest.json", std::ios::binary);
  f << manifest_json(man);
  if (!f) throw InputError("cannot write manifest.json");
  return man;
}

}  // namespace liebridge
