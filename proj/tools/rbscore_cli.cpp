#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "rbscore/data_io.hpp"
#include "rbscore/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

Eigen::VectorXd parse_theta(const std::string& text) {
  std::vector<double> vals;
  for (const auto& cell : rbscore::split_csv_line(text)) {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument("bad parameter value '" + cell + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw std::invalid_argument("empty parameter vector");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle score and observed-information experiments"};
  app.require_subcommand(1);

  std::string config_path, dir, out_path, model_id, theta_text;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed_root;
  int horizon = 0;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config_path, "Experiment JSON")->required();
  run->add_option("--workers", workers, "Concurrent runs");
  run->add_option("--out", out_path, "Output directory (overrides the config)");
  run->add_option("--seed-root", seed_root, "Root seed (overrides the config)");

  auto* summarize = app.add_subcommand("summarize", "Recompute summary.csv from an output directory");
  summarize->add_option("dir", dir, "Experiment output directory")->required();
  summarize->add_option("--out", out_path, "Write here instead of stdout");

  auto* validate = app.add_subcommand("validate", "Check an experiment config");
  validate->add_option("config", config_path, "Experiment JSON")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate a model path to CSV");
  sim->add_option("model", model_id, "ar1 or polio")->required();
  sim->add_option("theta", theta_text, "Comma-separated parameter vector")->required();
  sim->add_option("T", horizon, "Number of time steps")->required()->check(CLI::PositiveNumber);
  sim->add_option("seed", seed, "Random seed")->required();
  sim->add_option("out", out_path, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) {
      rbscore::ExperimentConfig cfg = rbscore::load_config(config_path);
      if (workers) cfg.workers = *workers;
      if (!out_path.empty()) cfg.output = out_path;
      if (seed_root) cfg.seed_root = *seed_root;
      rbscore::validate_config(cfg);
      const auto summary = rbscore::run_experiment(cfg);
      std::cout << "wrote " << summary.rows.size() << " summary rows to " << cfg.output << "/summary.csv\n";
    } else if (*summarize) {
      const std::string text = rbscore::format_summary(rbscore::summarize_directory(dir));
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + out_path);
        f << text;
      }
    } else if (*validate) {
      const auto cfg = rbscore::load_config(config_path);
      std::cout << "ok: " << cfg.name << " (" << rbscore::grid_points(cfg).size() << " grid points x "
                << cfg.replicates << " replicates)\n";
    } else if (*sim) {
      Eigen::VectorXd theta;
      rbscore::ModelPtr model;
      try {
        theta = parse_theta(theta_text);
        model = rbscore::make_model(model_id, theta);
      } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kInvalid;
      }
      rbscore::RandomStream rng(seed);
      rbscore::write_path_csv(out_path, rbscore::simulate(*model, horizon, rng));
    }
  } catch (const rbscore::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
