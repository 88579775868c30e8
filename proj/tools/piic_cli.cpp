// Command-line front end. Talks to the library exclusively through the C API
// in piic.h; the config files it assembles are the same documents accepted by
// piic_run_create.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>

#include "piic.h"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir = "piic-out";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int execute(const std::string& subcommand, const CommonOpts& opts, const std::string& criteria, bool cross_check) {
  nlohmann::ordered_json config;
  try {
    nlohmann::ordered_json loaded = nlohmann::ordered_json::parse(read_file(opts.config_path));
    if (loaded.contains("subcommand")) {
      config = std::move(loaded);
      if (config["subcommand"].get<std::string>() != subcommand) {
        std::cerr << "error: config file is for subcommand '" << config["subcommand"].get<std::string>()
                  << "', not '" << subcommand << "'\n";
        return 2;
      }
    } else {
      // bare payload: wrap it under the subcommand key
      config["subcommand"] = subcommand;
      config[subcommand] = std::move(loaded);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (opts.seed_set) config["seed"] = opts.seed;
  if (!config.contains("seed")) config["seed"] = 1;
  if (!criteria.empty()) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    std::istringstream is(criteria);
    std::string item;
    while (std::getline(is, item, ',')) list.push_back(item);
    config[subcommand]["criteria"] = std::move(list);
  }
  if (cross_check) config[subcommand]["cross_check"] = true;

  piic_run* run = nullptr;
  piic_status st = piic_run_create(config.dump().c_str(), &run);
  if (st != PIIC_OK) {
    std::cerr << "error: " << (piic_last_error() ? piic_last_error() : "invalid config") << "\n";
    return static_cast<int>(st);
  }
  st = piic_run_execute(run, opts.out_dir.c_str());
  if (st != PIIC_OK) {
    const char* msg = piic_run_error(run);
    std::cerr << "error: " << (msg ? msg : "run failed") << "\n";
    piic_run_destroy(run);
    return static_cast<int>(st);
  }
  std::cout << piic_run_summary(run) << "\n";
  std::cout << "outputs written to " << opts.out_dir << "\n";
  piic_run_destroy(run);
  return 0;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration")->required();
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "master seed override")->each([&opts](const std::string&) {
    opts.seed_set = true;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("piic ") + piic_version() +
               " - prior intensified information criteria for Bayesian regression"};
  app.require_subcommand(1);

  CommonOpts analyze_opts, simulate_opts, causal_opts, diabetes_opts;
  std::string criteria;
  bool cross_check = false;

  CLI::App* analyze = app.add_subcommand("analyze", "criterion-driven analysis of a regression CSV");
  add_common(analyze, analyze_opts);
  analyze->add_option("--criteria", criteria, "comma-separated list: waic,piic,piic2,dic");
  analyze->add_flag("--cross-check", cross_check, "cross-validate analytic and sampled paths where conjugate");

  CLI::App* simulate = app.add_subcommand("simulate", "replicated criterion comparison on synthetic data");
  add_common(simulate, simulate_opts);

  CLI::App* causal = app.add_subcommand("causal-sim", "inverse-probability-weighted criteria on MSM data");
  add_common(causal, causal_opts);

  CLI::App* diabetes = app.add_subcommand("diabetes", "13-split sparse regression analysis of the diabetes data");
  add_common(diabetes, diabetes_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(analyze)) return execute("analyze", analyze_opts, criteria, cross_check);
    if (app.got_subcommand(simulate)) return execute("simulate", simulate_opts, "", false);
    if (app.got_subcommand(causal)) return execute("causal_sim", causal_opts, "", false);
    if (app.got_subcommand(diabetes)) return execute("diabetes", diabetes_opts, "", false);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
