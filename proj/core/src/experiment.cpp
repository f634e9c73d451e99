#include "emt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "emt/error.hpp"

namespace emt {

namespace {

using nlohmann::json;

const std::vector<std::string> kAlgorithms{"mfea", "mfea-rl:full", "mfea-rl:vdsr", "mfea-rl:res", "random-search"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_unsigned(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw UsageError("--" + key + ": expected a non-negative integer, got '" + value + "'");
  }
  try {
    return static_cast<T>(std::stoull(v));
  } catch (const std::out_of_range&) {
    throw UsageError("--" + key + ": value out of range: " + value);
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double d = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw UsageError("--" + key + ": expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw UsageError("--" + key + ": expected true or false, got '" + value + "'");
}

std::vector<ProblemSpec> parse_problems(const std::string& value) {
  std::vector<ProblemSpec> out;
  for (const auto& group : split(value, ';')) {
    const auto colon = group.find(':');
    if (colon == std::string::npos) throw UsageError("--problem: expected cec17:<ids> or custom:<file>");
    const std::string suite = group.substr(0, colon);
    const std::string rest = group.substr(colon + 1);
    if (suite == "cec17") {
      const auto ids = split(rest, ',');
      if (ids.empty()) throw UsageError("--problem: no CEC17 problem ids given");
      for (const auto& id : ids) {
        if (id.size() != 2 || id[0] != 'P' || id[1] < '1' || id[1] > '9') {
          throw UsageError("--problem: unknown CEC17 problem '" + id + "' (expected P1..P9)");
        }
        ProblemSpec spec;
        spec.suite = Suite::Cec17;
        spec.problem_id = id;
        out.push_back(spec);
      }
    } else if (suite == "custom") {
      if (rest.empty()) throw UsageError("--problem: custom problem needs a file path");
      ProblemSpec spec;
      spec.suite = Suite::Custom;
      spec.problem_id = rest;
      out.push_back(spec);
    } else {
      throw UsageError("--problem: unknown suite '" + suite + "'");
    }
  }
  if (out.empty()) throw UsageError("--problem: empty value");
  return out;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

// Keys accepted on the command line and in config files, in application order.
const std::vector<std::pair<std::string, std::string>> kKeys{
    {"problem", "cec17:P1[,P2,...] or custom:<file>; groups separated by ';'"},
    {"algo", "comma list of mfea, mfea-rl:full, mfea-rl:vdsr, mfea-rl:res, random-search"},
    {"seeds", "run count n (seeds 1..n) or a comma list of seeds"},
    {"reps", "runs per cell when --seeds is absent (default 30)"},
    {"max-evals", "function evaluations per run (default 50000)"},
    {"out", "output directory (default results)"},
    {"data-dir", "directory with <id>_<task>_shift.txt / _rot.txt instance files"},
    {"threads", "worker threads for independent cells (0: all cores)"},
    {"base", "reference algorithm for the Wilcoxon columns (default: first --algo)"},
    {"instance-seed", "seed of synthesized problem instances (default 1)"},
    {"dims", "task dimension(s); one value applies to every task"},
    {"pop-size", "population size N (even, default 100)"},
    {"rmp", "random mating probability (default 0.3)"},
    {"retrain-interval", "generations between network retraining (default 10)"},
    {"vdsr-depth", "residual network conv layers (default 8)"},
    {"vdsr-hidden", "residual network hidden channels (default 64)"},
    {"training-samples", "cap on training pairs per retrain (0: whole population)"},
};

}  // namespace

bool is_known_algorithm(const std::string& name) {
  return name == "mfea-rl" || std::find(kAlgorithms.begin(), kAlgorithms.end(), name) != kAlgorithms.end();
}

void ExperimentConfig::validate() const {
  if (problems.empty()) throw UsageError("missing --problem");
  if (algorithms.empty()) throw UsageError("no algorithms selected");
  for (const auto& a : algorithms) {
    if (!is_known_algorithm(a)) throw UsageError("unknown algorithm '" + a + "'");
  }
  if (std::find(algorithms.begin(), algorithms.end(), base()) == algorithms.end()) {
    throw UsageError("--base '" + base() + "' is not among the selected algorithms");
  }
  if (reps == 0) throw UsageError("--reps must be at least 1");
  if (population_size == 0 || population_size % 2 != 0) throw UsageError("--pop-size must be positive and even");
  if (max_evals < population_size) throw UsageError("--max-evals must be at least the population size");
  if (!(rmp >= 0.0 && rmp <= 1.0)) throw UsageError("--rmp must lie in [0, 1]");
  if (retrain_interval == 0) throw UsageError("--retrain-interval must be at least 1");
  if (vdsr_depth == 0 || vdsr_hidden == 0) throw UsageError("network sizes must be positive");
  for (std::size_t d : dims) {
    if (d == 0) throw UsageError("--dims entries must be positive");
  }
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out(reps);
  for (std::size_t i = 0; i < reps; ++i) out[i] = i + 1;
  return out;
}

std::size_t ExperimentConfig::worker_count() const {
  if (deterministic) return 1;
  if (threads != 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "problem") {
    c.problems = parse_problems(value);
  } else if (key == "algo") {
    c.algorithms = split(value, ',');
    for (auto& a : c.algorithms) {
      if (a == "mfea-rl") a = "mfea-rl:full";
      if (!is_known_algorithm(a)) throw UsageError("--algo: unknown algorithm '" + a + "'");
    }
    if (c.algorithms.empty()) throw UsageError("--algo: empty list");
  } else if (key == "seeds") {
    if (value.find(',') == std::string::npos) {
      c.reps = parse_unsigned<std::size_t>(key, value);
      c.seeds.clear();
      if (c.reps == 0) throw UsageError("--seeds: count must be at least 1");
    } else {
      c.seeds.clear();
      for (const auto& s : split(value, ',')) c.seeds.push_back(parse_unsigned<std::uint64_t>(key, s));
      c.reps = c.seeds.size();
    }
  } else if (key == "reps") {
    c.reps = parse_unsigned<std::size_t>(key, value);
  } else if (key == "max-evals") {
    c.max_evals = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "out") {
    if (value.empty()) throw UsageError("--out: empty path");
    c.output_dir = value;
  } else if (key == "deterministic") {
    c.deterministic = parse_bool(key, value);
  } else if (key == "data-dir") {
    c.data_dir = std::filesystem::path(value);
  } else if (key == "threads") {
    c.threads = parse_unsigned<std::size_t>(key, value);
  } else if (key == "base") {
    c.base_algorithm = value == "mfea-rl" ? "mfea-rl:full" : value;
  } else if (key == "instance-seed") {
    c.instance_seed = parse_unsigned<std::uint64_t>(key, value);
  } else if (key == "dims") {
    c.dims.clear();
    for (const auto& d : split(value, ',')) c.dims.push_back(parse_unsigned<std::size_t>(key, d));
  } else if (key == "pop-size") {
    c.population_size = parse_unsigned<std::size_t>(key, value);
  } else if (key == "rmp") {
    c.rmp = parse_real(key, value);
  } else if (key == "retrain-interval") {
    c.retrain_interval = parse_unsigned<std::size_t>(key, value);
  } else if (key == "vdsr-depth") {
    c.vdsr_depth = parse_unsigned<std::size_t>(key, value);
  } else if (key == "vdsr-hidden") {
    c.vdsr_hidden = parse_unsigned<std::size_t>(key, value);
  } else if (key == "training-samples") {
    c.training_samples = parse_unsigned<std::size_t>(key, value);
  } else {
    throw UsageError("unknown setting '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw UsageError("cannot read config file " + file.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.starts_with("--")) key = key.substr(2);
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::string cli_help() {
  std::ostringstream os;
  os << "Usage: emt_run --problem <spec> [options]\n\nOptions:\n";
  for (const auto& [k, d] : kKeys) os << "  --" << k << std::string(k.size() < 18 ? 18 - k.size() : 1, ' ') << d << '\n';
  os << "  --deterministic     single thread, reproducible outputs\n";
  os << "  --config <file>     key = value file with the same keys; flags override it\n";
  os << "  -h, --help          show this message\n";
  return os.str();
}

ExperimentConfig parse_cli(int argc, const char* const* argv) {
  CLI::App app{"Evolutionary multitasking experiment runner", "emt_run"};
  app.set_help_flag();  // help is handled below so usage text stays in one place
  bool help = false;
  app.add_flag("-h,--help", help);
  std::string config_file;
  app.add_option("--config", config_file);
  bool deterministic = false;
  app.add_flag("--deterministic", deterministic);
  std::map<std::string, std::string> values;
  for (const auto& [k, d] : kKeys) app.add_option("--" + k, values[k], d);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  if (help) throw UsageError(cli_help(), true);

  ExperimentConfig c;
  if (!config_file.empty()) {
    for (const auto& [k, v] : read_config_file(config_file)) apply_setting(c, k, v);
  }
  for (const auto& [k, d] : kKeys) {
    if (app.count("--" + k) > 0) apply_setting(c, k, values[k]);
  }
  if (deterministic) c.deterministic = true;
  c.validate();
  return c;
}

std::string problem_label(const ProblemSpec& spec) {
  if (spec.suite == Suite::Cec17) return spec.problem_id;
  return "custom:" + std::filesystem::path(spec.problem_id).filename().string();
}

std::string echo_config(const ExperimentConfig& c) {
  std::ostringstream os;
  std::vector<std::string> probs;
  std::vector<std::string> cec;
  std::string groups;
  for (const auto& p : c.problems) {
    if (p.suite == Suite::Cec17) {
      cec.push_back(p.problem_id);
    } else {
      probs.push_back("custom:" + p.problem_id);
    }
  }
  if (!cec.empty()) probs.insert(probs.begin(), "cec17:" + join(cec, ","));
  os << "problem = " << join(probs, ";") << '\n';
  os << "algo = " << join(c.algorithms, ",") << '\n';
  std::vector<std::string> seeds;
  for (auto s : c.run_seeds()) seeds.push_back(std::to_string(s));
  os << "seeds = " << (seeds.size() == 1 ? seeds.front() + "," : join(seeds, ",")) << '\n';
  os << "max-evals = " << c.max_evals << '\n';
  os << "out = " << c.output_dir.string() << '\n';
  os << "deterministic = " << (c.deterministic ? "true" : "false") << '\n';
  if (c.data_dir) os << "data-dir = " << c.data_dir->string() << '\n';
  os << "threads = " << c.threads << '\n';
  os << "base = " << c.base() << '\n';
  os << "instance-seed = " << c.instance_seed << '\n';
  if (!c.dims.empty()) {
    std::vector<std::string> d;
    for (auto v : c.dims) d.push_back(std::to_string(v));
    os << "dims = " << join(d, ",") << '\n';
  }
  os << "pop-size = " << c.population_size << '\n';
  os << "rmp = " << c.rmp << '\n';
  os << "retrain-interval = " << c.retrain_interval << '\n';
  os << "vdsr-depth = " << c.vdsr_depth << '\n';
  os << "vdsr-hidden = " << c.vdsr_hidden << '\n';
  os << "training-samples = " << c.training_samples << '\n';
  return os.str();
}

std::uint64_t cell_seed(std::uint64_t base_seed, const std::string& problem, const std::string& algorithm,
                        std::size_t rep) {
  std::uint64_t h = hash_combine(base_seed, hash_string(problem));
  h = hash_combine(h, hash_string(algorithm));
  return hash_combine(h, rep);
}

RunTrace run_algorithm(const std::string& algorithm, const MultitaskProblem& problem, const ExperimentConfig& c,
                       std::uint64_t seed) {
  MfeaConfig base;
  base.population_size = c.population_size;
  base.rmp = c.rmp;
  base.max_evals = c.max_evals;
  if (algorithm == "mfea") return run_mfea(problem, base, seed);
  if (algorithm == "random-search") return run_random_search(problem, base, seed);
  const auto colon = algorithm.find(':');
  if (algorithm.substr(0, colon) != "mfea-rl") throw InvalidInputError("unknown algorithm " + algorithm);
  MfeaRlConfig rl;
  static_cast<MfeaConfig&>(rl) = base;
  rl.mode = colon == std::string::npos ? RlMode::Full : parse_rl_mode(algorithm.substr(colon + 1));
  rl.retrain_interval = c.retrain_interval;
  rl.vdsr_depth = c.vdsr_depth;
  rl.vdsr_hidden = c.vdsr_hidden;
  rl.max_training_samples = c.training_samples;
  return run_mfea_rl(problem, rl, seed);
}

namespace {

void ensure_writable(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto probe = dir / ".emt_write_probe";
  {
    std::ofstream out(probe);
    if (!out || !(out << "probe") || !out.flush()) {
      throw IoError("output directory is not writable: " + dir.string());
    }
  }
  std::filesystem::remove(probe, ec);
}

std::ofstream open_output(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out.precision(17);
  return out;
}

json best_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::string cell_events(const std::string& algorithm, const std::string& problem, std::uint64_t seed,
                        std::uint64_t rng_seed, const RunTrace& trace) {
  std::string out;
  auto emit = [&](json j) {
    out += j.dump();
    out += '\n';
  };
  emit({{"type", "run_start"}, {"algorithm", algorithm}, {"problem", problem}, {"seed", seed}, {"rng_seed", rng_seed}});
  std::size_t r = 0;
  for (const auto& g : trace.generations) {
    emit({{"type", "generation"},
          {"algorithm", algorithm},
          {"problem", problem},
          {"seed", seed},
          {"generation", g.generation},
          {"evals", g.evals},
          {"best", best_array(g.best)},
          {"crossovers", g.crossovers},
          {"mutations", g.mutations},
          {"fallback_crossovers", g.fallback_crossovers},
          {"classifier_assignments", g.classifier_assignments},
          {"repaired", g.repaired}});
    for (; r < trace.retrains.size() && trace.retrains[r].generation == g.generation; ++r) {
      const auto& e = trace.retrains[r];
      emit({{"type", "retrain"},
            {"algorithm", algorithm},
            {"problem", problem},
            {"seed", seed},
            {"generation", e.generation},
            {"evals_before", e.evals_before},
            {"evals_after", e.evals_after},
            {"eval_delta", e.evals_after - e.evals_before},
            {"residual_samples", e.residual_samples},
            {"residual_loss", best_array(e.residual_loss)},
            {"classifier_samples", e.classifier_samples},
            {"classifier_val_accuracy", best_array(e.classifier_val_accuracy)},
            {"classifier_trained", e.classifier_trained},
            {"note", e.note}});
    }
  }
  emit({{"type", "run_end"},
        {"algorithm", algorithm},
        {"problem", problem},
        {"seed", seed},
        {"evaluations", trace.evaluations},
        {"final_best", best_array(trace.final_best)}});
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ensure_writable(config.output_dir);

  std::vector<MultitaskProblem> problems;
  std::vector<std::string> labels;
  for (auto spec : config.problems) {
    spec.seed = config.instance_seed;
    if (spec.suite == Suite::Cec17 && !config.dims.empty()) {
      spec.dims = config.dims.size() == 1 ? std::vector<std::size_t>(2, config.dims.front()) : config.dims;
    }
    MultitaskProblem p = make_problem(spec, config.data_dir);
    problems.push_back(std::move(p));
    labels.push_back(problem_label(spec));
  }

  const auto seeds = config.run_seeds();
  struct Cell {
    std::size_t problem;
    std::size_t algorithm;
    std::size_t rep;
  };
  std::vector<Cell> cells;
  for (std::size_t p = 0; p < problems.size(); ++p) {
    for (std::size_t a = 0; a < config.algorithms.size(); ++a) {
      for (std::size_t r = 0; r < seeds.size(); ++r) cells.push_back({p, a, r});
    }
  }

  std::vector<RunTrace> traces(cells.size());
  std::vector<double> wall(cells.size());
  std::vector<std::uint64_t> rng_seeds(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& c = cells[i];
      try {
        const auto& algo = config.algorithms[c.algorithm];
        rng_seeds[i] = cell_seed(seeds[c.rep], labels[c.problem], algo, c.rep);
        const auto t0 = std::chrono::steady_clock::now();
        traces[i] = run_algorithm(algo, problems[c.problem], config, rng_seeds[i]);
        wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(config.worker_count(), cells.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  auto conv = open_output(config.output_dir / "convergence.csv");
  auto events = open_output(config.output_dir / "events.jsonl");
  conv << "algorithm,problem,task,seed,evals,best_objective\n";
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const auto& algo = config.algorithms[c.algorithm];
    const auto& trace = traces[i];
    const std::uint64_t seed = seeds[c.rep];
    for (std::size_t t = 0; t < problems[c.problem].num_tasks(); ++t) {
      RunRecord rec;
      rec.algorithm = algo;
      rec.problem_id = labels[c.problem];
      rec.task_id = t;
      rec.seed = seed;
      rec.final_best = trace.final_best.at(t);
      rec.wall_time = wall[i];
      for (const auto& pt : trace.points) {
        rec.trace.emplace_back(pt.evals, pt.best[t]);
        conv << algo << ',' << rec.problem_id << ',' << t << ',' << seed << ',' << pt.evals << ',' << pt.best[t]
             << '\n';
      }
      result.records.push_back(std::move(rec));
    }
    result.runs.push_back(RunResult{algo, labels[c.problem], seed, trace.final_best});
    events << cell_events(algo, labels[c.problem], seed, rng_seeds[i], trace);
  }
  result.traces = std::move(traces);

  result.summary = summarize(result.runs, config.base());
  auto summary = open_output(config.output_dir / "summary.csv");
  write_summary_csv(summary, result.summary);
  auto echo = open_output(config.output_dir / "config.echo");
  echo << echo_config(config);
  for (auto* f : {&conv, &events, &summary, &echo}) {
    f->flush();
    if (!*f) throw IoError("write failed in " + config.output_dir.string());
  }
  return result;
}

}  // namespace emt
