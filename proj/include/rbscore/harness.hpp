#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "rbscore/estimators.hpp"
#include "rbscore/filter.hpp"
#include "rbscore/mle.hpp"
#include "rbscore/model.hpp"
#include "rbscore/particle_learning.hpp"

namespace rbscore {

// Invalid configuration. `fields` lists every offending key path.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct ModelConfig {
  std::string id = "ar1";  // ar1 | polio
  Eigen::VectorXd theta;   // parameter at which estimators run
  bool optimal_proposal = true;
};

struct DataConfig {
  enum class Source { simulate, csv };
  Source source = Source::simulate;
  int T = 500;
  Eigen::VectorXd theta;  // data-generating parameter; defaults to model.theta
  std::uint64_t seed = 1;
  bool fresh_per_replicate = false;
  std::string path;  // csv source; relative paths resolve against the config file
};

struct GridConfig {
  std::vector<double> lambda{0.95};
  std::vector<std::size_t> particles{1000};
  std::vector<int> lag{10};
};

struct MleConfig {
  bool enabled = false;
  std::string mode = "batch";  // batch | recursive
  Eigen::VectorXd theta0;
  StepSchedule schedule;
  int iterations = 100;
  bool newton = false;
  double tol = 0.0;
  bool common_random_numbers = false;
  int record_every = 1;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelConfig model;
  DataConfig data;
  std::string estimator = "rb";  // rb | poyiadjis_n | poyiadjis_n2 | fixed_lag | kalman | particle_learning
  GridConfig grid;
  int replicates = 1;
  std::uint64_t seed_root = 0;
  bool information = true;
  int trace_every = 1;
  Resampling resampling = Resampling::multinomial;
  MleConfig mle;
  PlUpdate pl_update = PlUpdate::literal;
  SuffStats pl_prior;
  std::string output = "results";
  int workers = 1;
  bool record_timing = false;
};

// Parses and validates. Relative data paths resolve against base_dir.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);
// Throws ConfigError listing every problem.
void validate_config(const ExperimentConfig& config);

// One cell of the experiment grid. Dimensions that do not apply to the
// estimator are fixed (lambda only varies for rb, lag only for fixed_lag).
struct GridPoint {
  double lambda = 1.0;
  std::size_t particles = 0;
  int lag = 0;
};
std::vector<GridPoint> grid_points(const ExperimentConfig& config);
std::string grid_key(const ExperimentConfig& config, const GridPoint& point);

// Seed of one run. Only the particle count and replicate index enter, so
// grid points differing in lambda or lag share their particle filter.
std::uint64_t run_seed(std::uint64_t seed_root, std::size_t particles, int replicate);

// Observations used by replicate r (the shared dataset unless
// data.fresh_per_replicate is set).
std::vector<double> experiment_data(const ExperimentConfig& config, int replicate);
ModelPtr make_model(const std::string& id, const Eigen::VectorXd& theta, bool optimal_proposal = true);

// Numeric CSV with a header row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
Table read_table(const std::filesystem::path& path);
void write_table(const Table& table, std::ostream& out);

struct SummaryRow {
  std::string grid;
  double index = 0.0;  // t or k
  std::string quantity;
  double mean = 0.0;
  double variance = 0.0;
  double bias = 0.0;  // NaN without an oracle
  double rmse = 0.0;  // NaN without an oracle
};

struct RunSummary {
  std::vector<SummaryRow> rows;
  std::size_t replicates = 0;
};

// `grid,index,quantity,mean,variance,bias,rmse`
std::string format_summary(const RunSummary& summary);

// Executes every grid point and replicate, writing into config.output:
//   config.json        normalized configuration
//   raw/<grid>__r<replicate>.csv   one trace per run
//   summary.csv        aggregates across replicates
//   timing.csv         wall-clock per run (only with record_timing)
RunSummary run_experiment(const ExperimentConfig& config);

// Recomputes the aggregates from an output directory's config.json and raw
// traces. Throws std::runtime_error on missing or inconsistent traces.
RunSummary summarize_directory(const std::filesystem::path& dir);

}  // namespace rbscore
