// liebridge: run one experiment from a config file and write its artifacts.
//
//   liebridge <experiment> --config <file> [--seed N] [--out DIR] [--print-config]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "liebridge/config.hpp"
#include "liebridge/error.hpp"
#include "liebridge/experiment.hpp"

namespace {

int write_error(const std::string& dir, const std::string& kind, const std::string& message, int code) {
  nlohmann::json j{{"tool", "liebridge"}, {"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << "liebridge: " << kind << ": " << message << "\n";
  if (!dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream f(std::filesystem::path(dir) / "error.json");
    if (f) f << j.dump(2) << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brownian motion, bridges and heat-kernel estimation on Lie groups"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool print_config = false;
  app.add_option("experiment", experiment, "experiment name")->required();
  app.add_option("--config", config_path, "config file (key=value or JSON)")->required();
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--out", out_dir, "override output_dir");
  app.add_flag("--print-config", print_config, "print the effective config and exit");
  CLI11_PARSE(app, argc, argv);

  std::string err_dir = out_dir;
  try {
    std::ifstream in(config_path);
    if (!in) throw liebridge::InputError("cannot read config file " + config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();

    liebridge::ExperimentConfig cfg = liebridge::parse_config(text, seed);
    if (!liebridge::is_experiment_name(experiment)) {
      throw liebridge::InputError("unknown experiment '" + experiment + "'");
    }
    // An explicit experiment key must agree with the positional argument.
    static const std::regex key_re(R"((^|[\n{,])\s*"?experiment"?\s*[=:])");
    const bool explicit_key = std::regex_search(text, key_re);
    if (explicit_key && cfg.experiment != experiment) {
      throw liebridge::InputError("config says experiment=" + cfg.experiment + " but '" + experiment +
                                  "' was requested");
    }
    cfg.experiment = experiment;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    err_dir = cfg.output_dir;
    liebridge::validate_config(cfg);

    if (print_config) {
      std::cout << liebridge::render_config(cfg);
      return 0;
    }
    const auto manifest = liebridge::run_experiment(cfg);
    for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "wrote " << manifest.files.size() << " files + manifest.json to " << cfg.output_dir << "\n";
    return 0;
  } catch (const liebridge::InputError& e) {
    return write_error(err_dir, "InputError", e.what(), 2);
  } catch (const liebridge::BranchError& e) {
    return write_error(err_dir, "BranchError", e.what(), 3);
  } catch (const liebridge::NumericalError& e) {
    return write_error(err_dir, "NumericalError", e.what(), 3);
  } catch (const std::exception& e) {
    return write_error(err_dir, "Error", e.what(), 3);
  }
}
