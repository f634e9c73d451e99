#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emt/encoding.hpp"
#include "emt/rng.hpp"

namespace emt {

/// Harness-owned objective evaluation counter; safe to bump from several threads.
class EvalCounter {
 public:
  void increment() noexcept { count_.fetch_add(1, std::memory_order_relaxed); }
  std::uint64_t value() const noexcept { return count_.load(std::memory_order_relaxed); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

/// base(rotation * (x - shift)); x is a task-space point of length task.dim.
double evaluate_task(const Task& task, std::span<const double> x, EvalCounter* counter = nullptr);

/// Decodes unified genomes and evaluates them on one task while counting calls.
class Evaluator {
 public:
  explicit Evaluator(const MultitaskProblem& problem) : problem_(&problem) {}

  double operator()(std::span<const double> genome, std::size_t task_id);

  std::uint64_t evaluations() const noexcept { return counter_.value(); }
  EvalCounter& counter() noexcept { return counter_; }
  const MultitaskProblem& problem() const noexcept { return *problem_; }

 private:
  const MultitaskProblem* problem_;
  EvalCounter counter_;
};

enum class Suite { Cec17, Custom };

struct ProblemSpec {
  Suite suite = Suite::Cec17;
  std::string problem_id;      // "P1".."P9" or path of a custom problem file
  std::vector<std::size_t> dims;  // per task; empty means suite defaults
  std::uint64_t seed = 1;
};

/// Haar-distributed orthogonal matrix (row-major), from QR of a Gaussian matrix.
std::vector<double> random_rotation(std::size_t dim, Rng& rng);

/// Dual-task problem with the standard CEC2017 multitask pairing.
///
/// Shift and rotation come from `<id>_<task>_shift.txt` / `<id>_<task>_rot.txt`
/// (task numbered from 1) in `data_dir` when those files exist, and are
/// synthesized deterministically from `seed` otherwise.
MultitaskProblem make_cec17_pair(const std::string& problem_id, std::uint64_t seed,
                                 std::span<const std::size_t> dims = {},
                                 const std::optional<std::filesystem::path>& data_dir = std::nullopt);

/// Reads a custom problem: one task per line, `<function> dim=<n> lower=<a> upper=<b> [seed=<s>]`.
MultitaskProblem load_custom_problem(const std::filesystem::path& file, std::uint64_t seed);

MultitaskProblem make_problem(const ProblemSpec& spec,
                              const std::optional<std::filesystem::path>& data_dir = std::nullopt);

/// Whitespace-separated numbers; throws IoError if the file cannot be read.
std::vector<double> read_matrix_file(const std::filesystem::path& file);

}  // namespace emt
