#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emt/mfea_rl.hpp"
#include "emt/problems.hpp"
#include "emt/stats.hpp"

namespace emt {

/// Bad command line or configuration file. `help` marks an explicit --help request.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& msg, bool help = false) : std::invalid_argument(msg), help_(help) {}
  bool help() const noexcept { return help_; }

 private:
  bool help_;
};

struct ExperimentConfig {
  std::vector<ProblemSpec> problems;
  std::vector<std::string> algorithms{"mfea"};
  std::vector<std::uint64_t> seeds;  // explicit run seeds; empty means 1..reps
  std::size_t reps = 30;
  std::uint64_t max_evals = 50'000;
  std::filesystem::path output_dir = "results";
  bool deterministic = false;
  std::optional<std::filesystem::path> data_dir;
  std::size_t threads = 0;  // 0: hardware concurrency
  std::string base_algorithm;  // empty: first algorithm
  std::uint64_t instance_seed = 1;
  std::vector<std::size_t> dims;  // one entry applies to every task

  // Algorithm parameters shared by every cell.
  std::size_t population_size = 100;
  double rmp = 0.3;
  std::size_t retrain_interval = 10;
  std::size_t vdsr_depth = ResidualNet::kDefaultDepth;
  std::size_t vdsr_hidden = ResidualNet::kDefaultHidden;
  std::size_t training_samples = 0;

  void validate() const;
  /// Seeds of the runs in rep order.
  std::vector<std::uint64_t> run_seeds() const;
  std::string base() const { return base_algorithm.empty() ? algorithms.front() : base_algorithm; }
  std::size_t worker_count() const;
};

bool is_known_algorithm(const std::string& name);

/// Sets one key (flag name without dashes, e.g. "max-evals") from its text value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat "key = value" lines, '#' comments; keys are the long flag names.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& file);

/// Defaults, then the --config file, then explicit flags. Throws UsageError.
ExperimentConfig parse_cli(int argc, const char* const* argv);
std::string cli_help();

/// Resolved configuration as "key = value" lines; parseable by read_config_file.
std::string echo_config(const ExperimentConfig& config);

/// Per-task convergence of one run.
struct RunRecord {
  std::string algorithm;
  std::string problem_id;
  std::size_t task_id = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::uint64_t, double>> trace;  // (evals, best-so-far)
  double final_best = 0.0;
  double wall_time = 0.0;  // seconds; kept out of the output files
};

struct ExperimentResult {
  std::vector<RunRecord> records;
  std::vector<RunResult> runs;
  std::vector<RunTrace> traces;  // one per cell, problem-major then algorithm then rep
  SummaryTable summary;
};

/// Seed of one (problem, algorithm, rep) cell; independent of execution order.
std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& problem, const std::string& algorithm,
                        std::size_t rep);

RunTrace run_algorithm(const std::string& algorithm, const MultitaskProblem& problem, const ExperimentConfig& config,
                       std::uint64_t seed);

/// Runs every cell and writes convergence.csv, summary.csv, events.jsonl and
/// config.echo into the output directory. Throws IoError before any run when
/// the directory cannot be written.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string problem_label(const ProblemSpec& spec);

}  // namespace emt
