#include "liebridge/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "liebridge/csv.hpp"
#include "liebridge/error.hpp"
#include "liebridge/spaces.hpp"

namespace liebridge {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw InputError("config key '" + key + "': " + what);
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(x)) bad(key, "expected a number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) bad(key, "expected an integer, got '" + v + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto res = std::from_chars(b, e, x);
  if (res.ec != std::errc() || res.ptr != e) bad(key, "expected an unsigned 64-bit integer, got '" + v + "'");
  return x;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::string s = trim(v);
  if (s == "identity") return {};
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) bad(key, "empty list");
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

int positive_int(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x <= 0 || x > 100000000) bad(key, "must be a positive integer, got " + v);
  return static_cast<int>(x);
}

int nonnegative_int(const std::string& key, const std::string& v) {
  const long long x = to_int(key, v);
  if (x < 0 || x > 100000000) bad(key, "must be a non-negative integer, got " + v);
  return static_cast<int>(x);
}

double positive_double(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (!(x > 0.0)) bad(key, "must be positive, got " + v);
  return x;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (!is_experiment_name(v)) bad(k, "unknown experiment '" + v + "'");
         c.experiment = v;
       }},
      {"space",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (!is_valid_space_name(v)) bad(k, "unknown space '" + v + "'");
         c.space = v;
       }},
      {"T", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.T = positive_double(k, v); }},
      {"steps", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.steps = positive_int(k, v); }},
      {"n_paths", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_paths = positive_int(k, v); }},
      {"n_bridges", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_bridges = positive_int(k, v); }},
      {"K", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.K = nonnegative_int(k, v); }},
      {"m", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.m = positive_int(k, v); }},
      {"eta", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.eta = positive_double(k, v); }},
      {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"metric", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.metric = to_list(k, v); }},
      {"true_metric",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.true_metric = to_list(k, v); }},
      {"target", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.target = v; }},
      {"init", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.init = v; }},
      {"output_dir",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         if (v.empty()) bad(k, "must not be empty");
         c.output_dir = v;
       }},
      {"n_obs", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_obs = positive_int(k, v); }},
      {"T_list",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.T_list = to_list(k, v);
         if (c.T_list.empty()) bad(k, "empty list");
         for (double t : c.T_list) {
           if (!(t > 0.0)) bad(k, "all entries must be positive");
         }
       }},
      {"n_samples", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_samples = positive_int(k, v); }},
      {"grid_points",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.grid_points = positive_int(k, v); }},
      {"lattice_points",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.lattice_points = positive_int(k, v); }},
      {"grid_angles",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.grid_angles = nonnegative_int(k, v); }},
      {"iterations",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.iterations = positive_int(k, v); }},
      {"proposal_scale",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.proposal_scale = positive_double(k, v); }},
  };
  return table;
}

std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ',';
      out += json_scalar(v[i]);
    }
    return out;
  }
  throw InputError("config: unsupported JSON value " + v.dump());
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"bm",       "bridge",     "fermi",     "kpoint",   "mh",
                                                 "metric-mle", "spd-mean", "s2-kernel", "s2-aniso"};
  return names;
}

bool is_experiment_name(const std::string& name) {
  const auto& n = experiment_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  ExperimentConfig c;
  bool have_seed = false;
  const auto& table = setters();
  auto apply = [&](const std::string& key, const std::string& value, const std::string& where) {
    auto it = table.find(key);
    if (it == table.end()) throw InputError("unknown config key '" + key + "'" + where);
    try {
      it->second(c, key, value);
    } catch (const InputError& e) {
      throw InputError(std::string(e.what()) + where);
    }
    if (key == "seed") have_seed = true;
  };

  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw InputError("config: JSON document must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) apply(it.key(), json_scalar(it.value()), "");
  } else {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = " (line " + std::to_string(lineno) + ")";
      if (eq == std::string::npos) throw InputError("config: expected key=value" + where);
      apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
    }
  }
  if (seed_override) {
    c.seed = *seed_override;
    have_seed = true;
  }
  if (!have_seed) throw InputError("config key 'seed': required (no clock-based default)");
  validate_config(c);
  return c;
}

void validate_config(const ExperimentConfig& c) {
  if (!is_experiment_name(c.experiment)) bad("experiment", "unknown experiment '" + c.experiment + "'");
  if (!is_valid_space_name(c.space)) bad("space", "unknown space '" + c.space + "'");
  if (!(c.T > 0.0)) bad("T", "must be positive");
  if (c.steps < 1) bad("steps", "must be positive");
  if (c.steps < 2 && c.experiment != "bm") bad("steps", "bridges need at least 2 steps");
  if (c.n_paths < 1) bad("n_paths", "must be positive");
  if (c.n_bridges < 1) bad("n_bridges", "must be positive");
  if (c.K < 0) bad("K", "must be non-negative");
  if (c.m < 1) bad("m", "must be positive");
  if (!(c.eta > 0.0)) bad("eta", "must be positive");
  if (c.n_obs < 1) bad("n_obs", "must be positive");
  if (c.n_samples < 1) bad("n_samples", "must be positive");
  if (c.grid_points < 2) bad("grid_points", "must be at least 2");
  if (c.iterations < 1) bad("iterations", "must be positive");
  if (!(c.proposal_scale > 0.0)) bad("proposal_scale", "must be positive");
  if (c.T_list.empty()) bad("T_list", "must not be empty");
  const int dim = space_from_name(c.space).group.dim;
  auto check_metric = [&](const char* key, const std::vector<double>& upper) {
    if (upper.empty()) return;
    try {
      space_from_name(c.space, MetricParam::from_upper(upper, dim));
    } catch (const InputError& e) {
      bad(key, e.what());
    }
  };
  check_metric("metric", c.metric);
  check_metric("true_metric", c.true_metric);
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "experiment=" << c.experiment << '\n'
    << "space=" << c.space << '\n'
    << "T=" << format_double(c.T) << '\n'
    << "steps=" << c.steps << '\n'
    << "n_paths=" << c.n_paths << '\n'
    << "n_bridges=" << c.n_bridges << '\n'
    << "K=" << c.K << '\n'
    << "m=" << c.m << '\n'
    << "eta=" << format_double(c.eta) << '\n'
    << "seed=" << c.seed << '\n'
    << "metric=" << (c.metric.empty() ? "identity" : join(c.metric)) << '\n'
    << "true_metric=" << (c.true_metric.empty() ? "identity" : join(c.true_metric)) << '\n'
    << "target=" << c.target << '\n'
    << "init=" << c.init << '\n'
    << "output_dir=" << c.output_dir << '\n'
    << "n_obs=" << c.n_obs << '\n'
    << "T_list=" << join(c.T_list) << '\n'
    << "n_samples=" << c.n_samples << '\n'
    << "grid_points=" << c.grid_points << '\n'
    << "lattice_points=" << c.lattice_points << '\n'
    << "grid_angles=" << c.grid_angles << '\n'
    << "iterations=" << c.iterations << '\n'
    << "proposal_scale=" << format_double(c.proposal_scale) << '\n';
  return o.str();
}

}  // namespace liebridge
