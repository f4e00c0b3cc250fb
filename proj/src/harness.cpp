#include "rbscore/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "rbscore/ar1_model.hpp"
#include "rbscore/data_io.hpp"
#include "rbscore/kalman.hpp"
#include "rbscore/polio_model.hpp"

namespace rbscore {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  " + p;
  return out;
}

// Pulls typed fields out of a JSON object, recording every problem instead of
// stopping at the first.
class Reader {
 public:
  std::vector<std::string> problems;

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    problems.push_back(path + ": expected an object");
    return false;
  }

  void known_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key())) problems.push_back(prefix(path) + it.key() + ": unknown key");
  }

  template <typename T>
  bool get(const json& j, const std::string& path, const char* key, T& out, bool required = false) {
    if (!j.contains(key)) {
      if (required) problems.push_back(prefix(path) + key + ": required");
      return false;
    }
    const json& v = j.at(key);
    const std::string where = prefix(path) + key;
    if (!convert(v, where, out)) return false;
    return true;
  }

 private:
  static std::string prefix(const std::string& path) { return path.empty() ? "" : path + "."; }

  bool fail(const std::string& where, const char* what) {
    problems.push_back(where + ": expected " + what);
    return false;
  }

  bool convert(const json& v, const std::string& where, double& out) {
    if (!v.is_number()) return fail(where, "a number");
    out = v.get<double>();
    return true;
  }
  bool convert(const json& v, const std::string& where, int& out) {
    if (!v.is_number_integer()) return fail(where, "an integer");
    out = v.get<int>();
    return true;
  }
  bool convert(const json& v, const std::string& where, std::uint64_t& out) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      return fail(where, "a non-negative integer");
    out = v.get<std::uint64_t>();
    return true;
  }
  bool convert(const json& v, const std::string& where, bool& out) {
    if (!v.is_boolean()) return fail(where, "true or false");
    out = v.get<bool>();
    return true;
  }
  bool convert(const json& v, const std::string& where, std::string& out) {
    if (!v.is_string()) return fail(where, "a string");
    out = v.get<std::string>();
    return true;
  }
  template <typename T>
  bool convert(const json& v, const std::string& where, std::vector<T>& out) {
    if (!v.is_array()) return fail(where, "an array");
    std::vector<T> tmp(v.size());
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) ok = convert(v[i], where + "[" + std::to_string(i) + "]", tmp[i]) && ok;
    if (ok) out = std::move(tmp);
    return ok;
  }
  bool convert(const json& v, const std::string& where, Eigen::VectorXd& out) {
    std::vector<double> tmp;
    if (!convert(v, where, tmp)) return false;
    out = Eigen::Map<const Eigen::VectorXd>(tmp.data(), static_cast<Eigen::Index>(tmp.size()));
    return true;
  }
};

std::vector<double> to_std(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

bool is_estimator_name(const std::string& s) {
  return s == "rb" || s == "poyiadjis_n" || s == "poyiadjis_n2" || s == "fixed_lag" || s == "kalman" ||
         s == "particle_learning";
}

bool uses_particles(const std::string& estimator) { return estimator != "kalman"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string raw_name(const std::string& key, int replicate) {
  return key + "__r" + std::to_string(replicate) + ".csv";
}

Table score_table(const ScoreEstimate& est, int d, bool information) {
  Table t;
  t.columns.push_back("t");
  for (int i = 1; i <= d; ++i) t.columns.push_back("score_" + std::to_string(i));
  if (information)
    for (int i = 1; i <= d; ++i) t.columns.push_back("info_" + std::to_string(i));
  for (const auto& p : est.trace) {
    std::vector<double> row{static_cast<double>(p.t)};
    for (int i = 0; i < d; ++i) row.push_back(p.score[i]);
    if (information)
      for (int i = 0; i < d; ++i) row.push_back(p.info_diag[i]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table ascent_table(const AscentTrace& trace) {
  Table t;
  const auto d = static_cast<int>(trace.theta0.size());
  t.columns.push_back("k");
  for (int i = 1; i <= d; ++i) t.columns.push_back("theta_" + std::to_string(i));
  t.columns.push_back("score_norm");
  t.columns.push_back("step_norm");
  for (const auto& r : trace.records) {
    std::vector<double> row{static_cast<double>(r.k)};
    for (int i = 0; i < d; ++i) row.push_back(r.theta[i]);
    row.push_back(r.score_norm);
    row.push_back(r.step_norm);
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table pl_table(const PlResult& res) {
  Table t;
  t.columns = {"t", "phi_mean", "sigma2_mean", "tau2_mean"};
  for (const auto& s : res.summaries) t.rows.push_back({static_cast<double>(s.t), s.phi_mean, s.sigma2_mean, s.tau2_mean});
  return t;
}

std::string table_text(const Table& t) {
  std::ostringstream os;
  write_table(t, os);
  return os.str();
}

// Runs tasks on up to `workers` threads; rethrows the first failure.
void run_parallel(std::vector<std::function<void()>>& tasks, int workers) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        tasks[i]();
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  if (n == 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// Oracle value per (row, column) of a raw trace, NaN where none exists.
class Oracle {
 public:
  explicit Oracle(const ExperimentConfig& cfg) : cfg_(cfg) {}

  std::vector<std::vector<double>> values(int replicate, const Table& table) {
    std::vector<std::vector<double>> out(table.rows.size(), std::vector<double>(table.columns.size(), NAN));
    const bool simulated = cfg_.data.source == DataConfig::Source::simulate;
    const Eigen::VectorXd& truth = cfg_.data.theta;
    if (cfg_.mle.enabled) {
      if (!simulated) return out;
      for (std::size_t c = 1; c < table.columns.size(); ++c) {
        const std::string& name = table.columns[c];
        if (name.rfind("theta_", 0) != 0) continue;
        const int i = std::stoi(name.substr(6)) - 1;
        for (auto& row : out) row[c] = truth[i];
      }
      return out;
    }
    if (cfg_.estimator == "particle_learning") {
      if (!simulated || cfg_.model.id != "ar1") return out;
      const double vals[3] = {truth[0], truth[1] * truth[1], truth[2] * truth[2]};
      for (auto& row : out)
        for (int c = 1; c <= 3; ++c) row[c] = vals[c - 1];
      return out;
    }
    if (cfg_.model.id != "ar1") return out;
    const auto& steps = kalman(replicate);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto t = static_cast<std::size_t>(table.rows[r][0]);
      if (t < 1 || t > steps.size()) throw std::runtime_error("trace time index outside the data range");
      const KalmanStep& s = steps[t - 1];
      for (std::size_t c = 1; c < table.columns.size(); ++c) {
        const std::string& name = table.columns[c];
        if (name.rfind("score_", 0) == 0)
          out[r][c] = s.score[std::stoi(name.substr(6)) - 1];
        else if (name.rfind("info_", 0) == 0) {
          const int i = std::stoi(name.substr(5)) - 1;
          out[r][c] = s.obs_info(i, i);
        }
      }
    }
    return out;
  }

 private:
  const std::vector<KalmanStep>& kalman(int replicate) {
    const int key = cfg_.data.fresh_per_replicate ? replicate : -1;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const auto y = experiment_data(cfg_, replicate);
    return cache_[key] = kalman_trace(Ar1Params::from_vector(cfg_.model.theta), y);
  }

  const ExperimentConfig& cfg_;
  std::map<int, std::vector<KalmanStep>> cache_;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

ModelPtr make_model(const std::string& id, const Eigen::VectorXd& theta, bool optimal_proposal) {
  if (id == "ar1") return ar1_model(Ar1Params::from_vector(theta), optimal_proposal);
  if (id == "polio") return polio_model(PolioParams::from_vector(theta));
  throw std::invalid_argument("unknown model '" + id + "'");
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  Reader rd;
  ExperimentConfig c;
  if (!rd.object(j, "config")) throw ConfigError(rd.problems);
  rd.known_keys(j, "", {"name", "model", "data", "estimator", "grid", "replicates", "seed_root", "information",
                        "trace_every", "resampling", "mle", "particle_learning", "output", "workers",
                        "record_timing"});
  rd.get(j, "", "name", c.name);
  rd.get(j, "", "estimator", c.estimator, true);
  rd.get(j, "", "replicates", c.replicates);
  rd.get(j, "", "seed_root", c.seed_root);
  rd.get(j, "", "information", c.information);
  rd.get(j, "", "trace_every", c.trace_every);
  rd.get(j, "", "output", c.output);
  rd.get(j, "", "workers", c.workers);
  rd.get(j, "", "record_timing", c.record_timing);
  std::string resampling = "multinomial";
  if (rd.get(j, "", "resampling", resampling)) {
    if (resampling == "multinomial")
      c.resampling = Resampling::multinomial;
    else if (resampling == "systematic")
      c.resampling = Resampling::systematic;
    else
      rd.problems.push_back("resampling: expected multinomial or systematic");
  }

  if (!j.contains("model")) {
    rd.problems.push_back("model: required");
  } else if (const json& m = j["model"]; rd.object(m, "model")) {
    rd.known_keys(m, "model", {"id", "theta", "optimal_proposal"});
    rd.get(m, "model", "id", c.model.id, true);
    rd.get(m, "model", "theta", c.model.theta, true);
    rd.get(m, "model", "optimal_proposal", c.model.optimal_proposal);
  }

  if (!j.contains("data")) {
    rd.problems.push_back("data: required");
  } else if (const json& d = j["data"]; rd.object(d, "data")) {
    rd.known_keys(d, "data", {"source", "T", "theta", "seed", "fresh_per_replicate", "path"});
    std::string source = "simulate";
    rd.get(d, "data", "source", source);
    if (source == "simulate") {
      c.data.source = DataConfig::Source::simulate;
      rd.get(d, "data", "T", c.data.T, true);
      if (!rd.get(d, "data", "theta", c.data.theta)) c.data.theta = c.model.theta;
      rd.get(d, "data", "seed", c.data.seed);
      rd.get(d, "data", "fresh_per_replicate", c.data.fresh_per_replicate);
    } else if (source == "csv") {
      c.data.source = DataConfig::Source::csv;
      if (rd.get(d, "data", "path", c.data.path, true)) {
        fs::path p(c.data.path);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        c.data.path = p.lexically_normal().string();
      }
      rd.get(d, "data", "theta", c.data.theta);
    } else {
      rd.problems.push_back("data.source: expected simulate or csv");
    }
  }

  if (j.contains("grid")) {
    const json& g = j["grid"];
    if (rd.object(g, "grid")) {
      rd.known_keys(g, "grid", {"lambda", "N", "L"});
      rd.get(g, "grid", "lambda", c.grid.lambda);
      std::vector<std::uint64_t> n;
      if (rd.get(g, "grid", "N", n)) c.grid.particles.assign(n.begin(), n.end());
      rd.get(g, "grid", "L", c.grid.lag);
    }
  }

  if (j.contains("mle")) {
    const json& m = j["mle"];
    if (rd.object(m, "mle")) {
      c.mle.enabled = true;
      rd.known_keys(m, "mle", {"mode", "theta0", "schedule", "K", "newton", "tol", "common_random_numbers",
                               "record_every"});
      rd.get(m, "mle", "mode", c.mle.mode);
      rd.get(m, "mle", "theta0", c.mle.theta0, true);
      rd.get(m, "mle", "K", c.mle.iterations);
      rd.get(m, "mle", "newton", c.mle.newton);
      rd.get(m, "mle", "tol", c.mle.tol);
      rd.get(m, "mle", "common_random_numbers", c.mle.common_random_numbers);
      rd.get(m, "mle", "record_every", c.mle.record_every);
      if (m.contains("schedule")) {
        const json& s = m["schedule"];
        if (rd.object(s, "mle.schedule")) {
          rd.known_keys(s, "mle.schedule", {"kind", "alpha", "scale", "per_coordinate_scale"});
          std::string kind = "power";
          rd.get(s, "mle.schedule", "kind", kind);
          if (kind == "power")
            c.mle.schedule.kind = StepSchedule::Kind::power;
          else if (kind == "constant")
            c.mle.schedule.kind = StepSchedule::Kind::constant;
          else
            rd.problems.push_back("mle.schedule.kind: expected power or constant");
          rd.get(s, "mle.schedule", "alpha", c.mle.schedule.alpha);
          rd.get(s, "mle.schedule", "scale", c.mle.schedule.scale);
          rd.get(s, "mle.schedule", "per_coordinate_scale", c.mle.schedule.per_coordinate_scale);
        }
      }
    }
  }

  if (j.contains("particle_learning")) {
    const json& p = j["particle_learning"];
    if (rd.object(p, "particle_learning")) {
      rd.known_keys(p, "particle_learning", {"update", "prior"});
      std::string update = "literal";
      if (rd.get(p, "particle_learning", "update", update)) {
        if (update == "literal")
          c.pl_update = PlUpdate::literal;
        else if (update == "textbook")
          c.pl_update = PlUpdate::textbook;
        else
          rd.problems.push_back("particle_learning.update: expected literal or textbook");
      }
      if (p.contains("prior")) {
        const json& h = p["prior"];
        if (rd.object(h, "particle_learning.prior")) {
          rd.known_keys(h, "particle_learning.prior", {"p", "q", "a", "b", "c", "d"});
          rd.get(h, "particle_learning.prior", "p", c.pl_prior.p);
          rd.get(h, "particle_learning.prior", "q", c.pl_prior.q);
          rd.get(h, "particle_learning.prior", "a", c.pl_prior.a);
          rd.get(h, "particle_learning.prior", "b", c.pl_prior.b);
          rd.get(h, "particle_learning.prior", "c", c.pl_prior.c);
          rd.get(h, "particle_learning.prior", "d", c.pl_prior.d);
        }
      }
    }
  }

  if (!rd.problems.empty()) throw ConfigError(rd.problems);
  validate_config(c);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: malformed JSON (") + e.what() + ")"});
  }
  return parse_config(j, path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["model"] = {{"id", c.model.id}, {"theta", to_std(c.model.theta)}, {"optimal_proposal", c.model.optimal_proposal}};
  if (c.data.source == DataConfig::Source::simulate) {
    j["data"] = {{"source", "simulate"},
                 {"T", c.data.T},
                 {"theta", to_std(c.data.theta)},
                 {"seed", c.data.seed},
                 {"fresh_per_replicate", c.data.fresh_per_replicate}};
  } else {
    j["data"] = {{"source", "csv"}, {"path", c.data.path}};
    if (c.data.theta.size() > 0) j["data"]["theta"] = to_std(c.data.theta);
  }
  j["estimator"] = c.estimator;
  std::vector<std::uint64_t> n(c.grid.particles.begin(), c.grid.particles.end());
  j["grid"] = {{"lambda", c.grid.lambda}, {"N", n}, {"L", c.grid.lag}};
  j["replicates"] = c.replicates;
  j["seed_root"] = c.seed_root;
  j["information"] = c.information;
  j["trace_every"] = c.trace_every;
  j["resampling"] = c.resampling == Resampling::multinomial ? "multinomial" : "systematic";
  if (c.mle.enabled) {
    json s = {{"kind", c.mle.schedule.kind == StepSchedule::Kind::power ? "power" : "constant"},
              {"alpha", c.mle.schedule.alpha},
              {"scale", c.mle.schedule.scale}};
    if (c.mle.schedule.per_coordinate_scale.size() > 0)
      s["per_coordinate_scale"] = to_std(c.mle.schedule.per_coordinate_scale);
    j["mle"] = {{"mode", c.mle.mode},
                {"theta0", to_std(c.mle.theta0)},
                {"schedule", s},
                {"K", c.mle.iterations},
                {"newton", c.mle.newton},
                {"tol", c.mle.tol},
                {"common_random_numbers", c.mle.common_random_numbers},
                {"record_every", c.mle.record_every}};
  }
  j["particle_learning"] = {
      {"update", c.pl_update == PlUpdate::literal ? "literal" : "textbook"},
      {"prior",
       {{"p", c.pl_prior.p}, {"q", c.pl_prior.q}, {"a", c.pl_prior.a}, {"b", c.pl_prior.b}, {"c", c.pl_prior.c},
        {"d", c.pl_prior.d}}}};
  j["output"] = c.output;
  j["workers"] = c.workers;
  j["record_timing"] = c.record_timing;
  return j;
}

void validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto check_theta = [&](const std::string& where, const Eigen::VectorXd& theta) {
    try {
      make_model(c.model.id, theta, c.model.optimal_proposal);
    } catch (const std::exception& e) {
      p.push_back(where + ": " + e.what());
    }
  };
  const bool known_model = c.model.id == "ar1" || c.model.id == "polio";
  if (!known_model) p.push_back("model.id: expected ar1 or polio");
  if (known_model) check_theta("model.theta", c.model.theta);
  if (c.data.source == DataConfig::Source::simulate) {
    if (c.data.T < 1) p.push_back("data.T: must be >= 1");
    if (known_model) check_theta("data.theta", c.data.theta);
  } else {
    if (c.data.path.empty()) p.push_back("data.path: required for csv data");
    if (c.data.theta.size() > 0 && known_model) check_theta("data.theta", c.data.theta);
  }
  if (!is_estimator_name(c.estimator)) {
    p.push_back("estimator: unknown estimator '" + c.estimator + "'");
  } else {
    if ((c.estimator == "kalman" || c.estimator == "particle_learning") && c.model.id != "ar1")
      p.push_back("estimator: " + c.estimator + " requires model ar1");
  }
  if (c.grid.lambda.empty()) p.push_back("grid.lambda: must not be empty");
  for (double l : c.grid.lambda)
    if (!(l > 0.0 && l <= 1.0)) p.push_back("grid.lambda: values must lie in (0, 1]");
  if (c.grid.particles.empty()) p.push_back("grid.N: must not be empty");
  for (std::size_t n : c.grid.particles)
    if (n < 2) p.push_back("grid.N: values must be >= 2");
  if (c.grid.lag.empty()) p.push_back("grid.L: must not be empty");
  for (int l : c.grid.lag)
    if (l < 1) p.push_back("grid.L: values must be >= 1");
  if (c.replicates < 1) p.push_back("replicates: must be >= 1");
  if (c.trace_every < 1) p.push_back("trace_every: must be >= 1");
  if (c.workers < 1) p.push_back("workers: must be >= 1");
  if (c.output.empty()) p.push_back("output: must not be empty");
  if (c.mle.enabled) {
    if (c.mle.mode != "batch" && c.mle.mode != "recursive") p.push_back("mle.mode: expected batch or recursive");
    if (known_model) {
      const Eigen::Index d = c.model.id == "ar1" ? 3 : PolioModel::kDim;
      if (c.mle.theta0.size() != d)
        p.push_back("mle.theta0: expected " + std::to_string(d) + " values");
      else
        check_theta("mle.theta0", c.mle.theta0);
      try {
        c.mle.schedule.validate(static_cast<int>(d));
      } catch (const std::exception& e) {
        p.push_back(std::string("mle.") + e.what());
      }
    }
    if (c.mle.iterations < 1) p.push_back("mle.K: must be >= 1");
    if (c.mle.record_every < 1) p.push_back("mle.record_every: must be >= 1");
    if (c.mle.tol < 0.0) p.push_back("mle.tol: must be >= 0");
    if (c.estimator == "particle_learning") p.push_back("mle: not available for particle_learning");
    if (c.mle.mode == "recursive" && c.estimator != "rb" && c.estimator != "poyiadjis_n")
      p.push_back("mle.mode: recursive ascent needs estimator rb or poyiadjis_n");
  }
  if (!c.pl_prior.valid() || !(c.pl_prior.a > 2.0) || !(c.pl_prior.c > 2.0))
    p.push_back("particle_learning.prior: needs q, b, d > 0 and a, c > 2");
  if (!p.empty()) throw ConfigError(p);
}

std::vector<GridPoint> grid_points(const ExperimentConfig& c) {
  std::vector<GridPoint> out;
  if (!uses_particles(c.estimator)) {
    out.push_back(GridPoint{1.0, 0, 0});
    return out;
  }
  for (std::size_t n : c.grid.particles) {
    if (c.estimator == "rb") {
      for (double l : c.grid.lambda) out.push_back(GridPoint{l, n, 0});
    } else if (c.estimator == "fixed_lag") {
      for (int l : c.grid.lag) out.push_back(GridPoint{1.0, n, l});
    } else {
      out.push_back(GridPoint{1.0, n, 0});
    }
  }
  return out;
}

std::string grid_key(const ExperimentConfig& c, const GridPoint& g) {
  std::string key = c.estimator;
  if (uses_particles(c.estimator)) key += "_N" + std::to_string(g.particles);
  if (c.estimator == "rb") key += "_lambda" + format_double(g.lambda);
  if (c.estimator == "fixed_lag") key += "_L" + std::to_string(g.lag);
  return key;
}

std::uint64_t run_seed(std::uint64_t seed_root, std::size_t particles, int replicate) {
  return derive_seed(seed_root, {static_cast<std::uint64_t>(particles), static_cast<std::uint64_t>(replicate)});
}

std::vector<double> experiment_data(const ExperimentConfig& c, int replicate) {
  if (c.data.source == DataConfig::Source::csv) return load_observations_csv(c.data.path);
  const auto model = make_model(c.model.id, c.data.theta, c.model.optimal_proposal);
  const std::uint64_t seed =
      c.data.fresh_per_replicate ? derive_seed(c.data.seed, {static_cast<std::uint64_t>(replicate)}) : c.data.seed;
  RandomStream rng(seed);
  return simulate(*model, c.data.T, rng).y;
}

Table read_table(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error(path.string() + ": empty file");
  t.columns = split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.columns.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": wrong number of fields");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        if (cell == "nan")
          row.push_back(NAN);
        else
          throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_table(const Table& table, std::ostream& out) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
}

std::string format_summary(const RunSummary& s) {
  std::ostringstream os;
  os << "grid,index,quantity,mean,variance,bias,rmse\n";
  for (const auto& r : s.rows)
    os << r.grid << ',' << format_double(r.index) << ',' << r.quantity << ',' << format_double(r.mean) << ','
       << format_double(r.variance) << ',' << format_double(r.bias) << ',' << format_double(r.rmse) << '\n';
  return os.str();
}

RunSummary summarize_directory(const fs::path& dir) {
  std::ifstream f(dir / "config.json");
  if (!f) throw std::runtime_error("no config.json in " + dir.string());
  const ExperimentConfig cfg = parse_config(json::parse(f));
  Oracle oracle(cfg);
  RunSummary summary;
  summary.replicates = static_cast<std::size_t>(cfg.replicates);
  const auto n = static_cast<double>(cfg.replicates);

  for (const auto& g : grid_points(cfg)) {
    const std::string key = grid_key(cfg, g);
    std::vector<Table> traces;
    std::vector<std::vector<std::vector<double>>> oracles;
    for (int r = 0; r < cfg.replicates; ++r) {
      const fs::path p = dir / "raw" / raw_name(key, r);
      if (!fs::exists(p)) throw std::runtime_error("missing trace " + p.string());
      traces.push_back(read_table(p));
      oracles.push_back(oracle.values(r, traces.back()));
      const Table& a = traces.front();
      const Table& b = traces.back();
      if (a.columns != b.columns || a.rows.size() != b.rows.size())
        throw std::runtime_error("inconsistent trace lengths for " + key);
      for (std::size_t i = 0; i < a.rows.size(); ++i)
        if (a.rows[i][0] != b.rows[i][0]) throw std::runtime_error("inconsistent trace indices for " + key);
    }
    const Table& first = traces.front();
    for (std::size_t i = 0; i < first.rows.size(); ++i) {
      for (std::size_t c = 1; c < first.columns.size(); ++c) {
        SummaryRow row;
        row.grid = key;
        row.index = first.rows[i][0];
        row.quantity = first.columns[c];
        double sum = 0.0;
        for (const auto& t : traces) sum += t.rows[i][c];
        row.mean = sum / n;
        double ss = 0.0;
        for (const auto& t : traces) {
          const double e = t.rows[i][c] - row.mean;
          ss += e * e;
        }
        row.variance = cfg.replicates > 1 ? ss / (n - 1.0) : 0.0;
        double bias = 0.0, sq = 0.0;
        bool have_oracle = true;
        for (int r = 0; r < cfg.replicates; ++r) {
          const double o = oracles[r][i][c];
          if (std::isnan(o)) {
            have_oracle = false;
            break;
          }
          const double e = traces[r].rows[i][c] - o;
          bias += e;
          sq += e * e;
        }
        row.bias = have_oracle ? bias / n : NAN;
        row.rmse = have_oracle ? std::sqrt(sq / n) : NAN;
        summary.rows.push_back(std::move(row));
      }
    }
  }
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const fs::path out(cfg.output);
  fs::create_directories(out / "raw");
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");

  const int d = make_model(cfg.model.id, cfg.model.theta, cfg.model.optimal_proposal)->dim();
  std::optional<std::vector<double>> shared;
  if (!cfg.data.fresh_per_replicate) shared = experiment_data(cfg, 0);
  if (shared && cfg.data.source == DataConfig::Source::simulate) {
    Table t;
    t.columns = {"t", "y"};
    for (std::size_t i = 0; i < shared->size(); ++i) t.rows.push_back({static_cast<double>(i + 1), (*shared)[i]});
    write_text(out / "data.csv", table_text(t));
  }

  struct TimingRow {
    std::string grid;
    int replicate;
    double seconds;
    double per_step;
  };
  std::mutex timing_mu;
  std::vector<TimingRow> timing;
  const auto points = grid_points(cfg);

  auto data_for = [&](int r) { return shared ? *shared : experiment_data(cfg, r); };
  auto emit = [&](const std::string& key, int r, const Table& t) { write_text(out / "raw" / raw_name(key, r), table_text(t)); };
  auto record = [&](const std::vector<std::string>& keys, int r, double seconds, double steps) {
    if (!cfg.record_timing) return;
    std::lock_guard lock(timing_mu);
    for (const auto& k : keys) timing.push_back({k, r, seconds, seconds / steps});
  };
  using clock = std::chrono::steady_clock;
  auto elapsed = [](clock::time_point start) { return std::chrono::duration<double>(clock::now() - start).count(); };

  FilterOptions filter;
  filter.resampling = cfg.resampling;
  RunOptions ropts;
  ropts.record_trace = true;
  ropts.trace_every = cfg.trace_every;

  std::vector<std::function<void()>> tasks;
  for (int r = 0; r < cfg.replicates; ++r) {
    if (cfg.mle.enabled) {
      for (const auto& g : points) {
        tasks.push_back([&, r, g] {
          const auto y = data_for(r);
          const auto model = make_model(cfg.model.id, cfg.mle.theta0, cfg.model.optimal_proposal);
          const auto start = clock::now();
          AscentTrace trace;
          if (cfg.mle.mode == "batch") {
            EstimatorConfig est;
            est.kind = parse_estimator_kind(cfg.estimator);
            est.particles = g.particles;
            est.lambda = g.lambda;
            est.lag = g.lag;
            est.filter = filter;
            BatchOptions bo;
            bo.iterations = cfg.mle.iterations;
            bo.newton = cfg.mle.newton;
            bo.tol = cfg.mle.tol;
            bo.common_random_numbers = cfg.mle.common_random_numbers;
            trace = batch_ascent(*model, y, cfg.mle.theta0, est, cfg.mle.schedule, bo,
                                 run_seed(cfg.seed_root, g.particles, r));
            if (cfg.mle.record_every > 1) {
              std::vector<AscentRecord> kept;
              for (const auto& rec : trace.records)
                if (rec.k % cfg.mle.record_every == 0 || &rec == &trace.records.back()) kept.push_back(rec);
              trace.records = std::move(kept);
            }
          } else {
            RecursiveOptions ro;
            ro.particles = g.particles;
            ro.lambda = cfg.estimator == "rb" ? g.lambda : 1.0;
            ro.filter = filter;
            ro.record_every = cfg.mle.record_every;
            RandomStream rng(run_seed(cfg.seed_root, g.particles, r));
            trace = recursive_ascent(*model, y, cfg.mle.theta0, cfg.mle.schedule, ro, rng);
          }
          const double secs = elapsed(start);
          const std::string key = grid_key(cfg, g);
          emit(key, r, ascent_table(trace));
          record({key}, r, secs, cfg.mle.mode == "batch" ? cfg.mle.iterations : static_cast<double>(y.size()));
        });
      }
    } else if (cfg.estimator == "kalman") {
      tasks.push_back([&, r] {
        const auto y = data_for(r);
        const auto model = make_model(cfg.model.id, cfg.model.theta, cfg.model.optimal_proposal);
        const auto start = clock::now();
        RunOptions ko = ropts;
        ScoreEstimate est = kalman_run(*model, y, ko);
        const double secs = elapsed(start);
        const std::string key = grid_key(cfg, points.front());
        emit(key, r, score_table(est, d, cfg.information));
        record({key}, r, secs, static_cast<double>(y.size()));
      });
    } else if (cfg.estimator == "particle_learning") {
      for (const auto& g : points) {
        tasks.push_back([&, r, g] {
          const auto y = data_for(r);
          PlOptions po;
          po.particles = g.particles;
          po.prior = cfg.pl_prior;
          po.mode = cfg.pl_update;
          RandomStream rng(run_seed(cfg.seed_root, g.particles, r));
          const auto start = clock::now();
          const PlResult res = pl_run(y, po, rng);
          const double secs = elapsed(start);
          const std::string key = grid_key(cfg, g);
          emit(key, r, pl_table(res));
          record({key}, r, secs, static_cast<double>(y.size()));
        });
      }
    } else {
      // Grid points with the same N share one filter pass.
      for (std::size_t n : cfg.grid.particles) {
        tasks.push_back([&, r, n] {
          const auto y = data_for(r);
          const auto model = make_model(cfg.model.id, cfg.model.theta, cfg.model.optimal_proposal);
          std::vector<AccumulatorSpec> specs;
          std::vector<std::string> keys;
          const EstimatorKind kind = parse_estimator_kind(cfg.estimator);
          for (const auto& g : points) {
            if (g.particles != n) continue;
            specs.push_back(AccumulatorSpec{kind, g.lambda, g.lag});
            keys.push_back(grid_key(cfg, g));
          }
          RandomStream rng(run_seed(cfg.seed_root, n, r));
          const auto start = clock::now();
          const auto results = run_shared_filter(*model, y, n, specs, cfg.information, filter, rng, ropts);
          const double secs = elapsed(start);
          for (std::size_t a = 0; a < results.size(); ++a) emit(keys[a], r, score_table(results[a], d, cfg.information));
          record(keys, r, secs, static_cast<double>(y.size()));
        });
      }
    }
  }
  run_parallel(tasks, cfg.workers);

  if (cfg.record_timing) {
    std::sort(timing.begin(), timing.end(), [](const TimingRow& a, const TimingRow& b) {
      return std::tie(a.grid, a.replicate) < std::tie(b.grid, b.replicate);
    });
    std::ostringstream os;
    os << "grid,replicate,seconds,seconds_per_step\n";
    for (const auto& t : timing)
      os << t.grid << ',' << t.replicate << ',' << format_double(t.seconds) << ',' << format_double(t.per_step) << '\n';
    write_text(out / "timing.csv", os.str());
  }

  RunSummary summary = summarize_directory(out);
  write_text(out / "summary.csv", format_summary(summary));
  return summary;
}

}  // namespace rbscore
