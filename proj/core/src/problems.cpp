#include "emt/problems.hpp"

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "emt/error.hpp"

namespace emt {

double evaluate_task(const Task& task, std::span<const double> x, EvalCounter* counter) {
  if (x.size() != task.dim) throw DimensionError("evaluate_task: point dimension does not match task");
  const std::size_t d = task.dim;
  std::vector<double> diff(d);
  for (std::size_t i = 0; i < d; ++i) diff[i] = x[i] - task.shift[i];
  std::vector<double> z(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double s = 0.0;
    const double* row = task.rotation.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) s += row[c] * diff[c];
    z[r] = s;
  }
  if (counter != nullptr) counter->increment();
  return evaluate_base(task.base_function, z);
}

double Evaluator::operator()(std::span<const double> genome, std::size_t task_id) {
  const Task& task = problem_->tasks.at(task_id);
  const auto x = decode(genome, task);
  return evaluate_task(task, x, &counter_);
}

std::vector<double> random_rotation(std::size_t dim, Rng& rng) {
  Eigen::MatrixXd g(dim, dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) g(r, c) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd rr = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix on R's diagonal makes Q Haar-distributed.
  for (std::size_t c = 0; c < dim; ++c) {
    if (rr(c, c) < 0.0) q.col(c) *= -1.0;
  }
  std::vector<double> out(dim * dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c < dim; ++c) out[r * dim + c] = q(r, c);
  return out;
}

std::vector<double> read_matrix_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read " + file.string());
  std::vector<double> values;
  double v = 0.0;
  while (in >> v) values.push_back(v);
  if (!in.eof()) throw IoError("malformed number in " + file.string());
  return values;
}

namespace {

enum class Intersection { Complete, Partial, None };

struct PairDef {
  std::string_view id;
  Intersection overlap;
  std::array<FunctionKind, 2> kinds;
};

constexpr std::array<PairDef, 9> kCec17Pairs{{
    {"P1", Intersection::Complete, {FunctionKind::Griewank, FunctionKind::Rastrigin}},
    {"P2", Intersection::Complete, {FunctionKind::Ackley, FunctionKind::Rastrigin}},
    {"P3", Intersection::Complete, {FunctionKind::Ackley, FunctionKind::Schwefel}},
    {"P4", Intersection::Partial, {FunctionKind::Rastrigin, FunctionKind::Sphere}},
    {"P5", Intersection::Partial, {FunctionKind::Ackley, FunctionKind::Rosenbrock}},
    {"P6", Intersection::Partial, {FunctionKind::Ackley, FunctionKind::Weierstrass}},
    {"P7", Intersection::None, {FunctionKind::Rosenbrock, FunctionKind::Rastrigin}},
    {"P8", Intersection::None, {FunctionKind::Griewank, FunctionKind::Weierstrass}},
    {"P9", Intersection::None, {FunctionKind::Rastrigin, FunctionKind::Schwefel}},
}};

constexpr std::size_t kDefaultDim = 50;

double default_bound(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::Griewank:
    case FunctionKind::Sphere: return 100.0;
    case FunctionKind::Schwefel: return 500.0;
    case FunctionKind::Weierstrass: return 0.5;
    default: return 50.0;
  }
}

std::vector<double> identity(std::size_t d) {
  std::vector<double> m(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] = 1.0;
  return m;
}

Task make_box_task(std::size_t id, FunctionKind kind, std::size_t dim, double bound) {
  Task t;
  t.id = id;
  t.dim = dim;
  t.base_function = kind;
  t.lower.assign(dim, -bound);
  t.upper.assign(dim, bound);
  t.shift.assign(dim, 0.0);
  t.rotation = identity(dim);
  return t;
}

// Places the task optimum at unified coordinates `u`: shift = x* - R^T z*.
void place_optimum(Task& t, std::span<const double> u) {
  const double c = canonical_optimum_coordinate(t.base_function);
  for (std::size_t col = 0; col < t.dim; ++col) {
    double rt = 0.0;
    for (std::size_t row = 0; row < t.dim; ++row) rt += t.rotation[row * t.dim + col] * c;
    const double x_star = t.lower[col] + u[col] * (t.upper[col] - t.lower[col]);
    t.shift[col] = x_star - rt;
  }
}

std::vector<double> schwefel_unified_optimum(const Task& t) {
  std::vector<double> u(t.dim);
  const double c = canonical_optimum_coordinate(FunctionKind::Schwefel);
  for (std::size_t i = 0; i < t.dim; ++i) u[i] = (c - t.lower[i]) / (t.upper[i] - t.lower[i]);
  return u;
}

bool load_instance_data(Task& t, const std::filesystem::path& dir, std::string_view problem_id) {
  const std::string stem = std::string(problem_id) + "_" + std::to_string(t.id + 1);
  const auto shift_file = dir / (stem + "_shift.txt");
  const auto rot_file = dir / (stem + "_rot.txt");
  const bool has_shift = std::filesystem::exists(shift_file);
  const bool has_rot = std::filesystem::exists(rot_file);
  if (!has_shift && !has_rot) return false;
  if (has_shift) {
    auto s = read_matrix_file(shift_file);
    if (s.size() < t.dim) throw DimensionError("instance shift shorter than task dimension: " + shift_file.string());
    s.resize(t.dim);
    t.shift = std::move(s);
  }
  if (has_rot) {
    auto r = read_matrix_file(rot_file);
    if (r.size() != t.dim * t.dim) throw DimensionError("instance rotation is not dim x dim: " + rot_file.string());
    t.rotation = std::move(r);
  }
  return true;
}

}  // namespace

MultitaskProblem make_cec17_pair(const std::string& problem_id, std::uint64_t seed, std::span<const std::size_t> dims,
                                 const std::optional<std::filesystem::path>& data_dir) {
  const PairDef* def = nullptr;
  for (const auto& p : kCec17Pairs) {
    if (p.id == problem_id) def = &p;
  }
  if (def == nullptr) throw InvalidInputError("unknown CEC17 problem id: " + problem_id);
  if (!dims.empty() && dims.size() != 2) throw DimensionError("CEC17 pairs take exactly two task dimensions");

  MultitaskProblem prob;
  prob.name = problem_id;
  Rng rng(hash_combine(hash_string(problem_id), seed));
  for (std::size_t j = 0; j < 2; ++j) {
    const std::size_t dim = dims.empty() ? kDefaultDim : dims[j];
    if (dim == 0) throw InvalidInputError("task dimension must be positive");
    Task t = make_box_task(j, def->kinds[j], dim, default_bound(def->kinds[j]));
    // Schwefel keeps its canonical, unrotated form.
    if (t.base_function != FunctionKind::Schwefel) t.rotation = random_rotation(dim, rng);
    prob.tasks.push_back(std::move(t));
  }

  const std::size_t dmax = prob.unified_dim();
  std::vector<double> shared(dmax);
  for (double& v : shared) v = rng.uniform(0.1, 0.9);
  for (const auto& t : prob.tasks) {
    if (t.base_function == FunctionKind::Schwefel) {
      const auto u = schwefel_unified_optimum(t);
      std::copy(u.begin(), u.end(), shared.begin());
    }
  }
  for (auto& t : prob.tasks) {
    if (t.base_function == FunctionKind::Schwefel) continue;
    std::vector<double> u(t.dim);
    for (std::size_t i = 0; i < t.dim; ++i) {
      const double own = rng.uniform(0.1, 0.9);
      switch (def->overlap) {
        case Intersection::Complete: u[i] = shared[i]; break;
        case Intersection::Partial: u[i] = i < t.dim / 2 ? shared[i] : own; break;
        case Intersection::None: u[i] = own; break;
      }
    }
    place_optimum(t, u);
  }

  if (data_dir) {
    for (auto& t : prob.tasks) load_instance_data(t, *data_dir, problem_id);
  }
  prob.validate();
  return prob;
}

MultitaskProblem load_custom_problem(const std::filesystem::path& file, std::uint64_t seed) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot read problem file " + file.string());
  MultitaskProblem prob;
  prob.name = file.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) continue;
    const auto kind = parse_function_kind(name);
    if (!kind) throw InvalidInputError(file.string() + ":" + std::to_string(line_no) + ": unknown function " + name);
    std::size_t dim = 0;
    double lower = -default_bound(*kind);
    double upper = default_bound(*kind);
    std::uint64_t task_seed = hash_combine(seed, line_no);
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InvalidInputError(file.string() + ": expected key=value, got " + kv);
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      try {
        if (key == "dim") dim = std::stoul(value);
        else if (key == "lower") lower = std::stod(value);
        else if (key == "upper") upper = std::stod(value);
        else if (key == "seed") task_seed = std::stoull(value);
        else throw InvalidInputError(file.string() + ": unknown key " + key);
      } catch (const std::logic_error& e) {
        if (dynamic_cast<const InvalidInputError*>(&e) != nullptr) throw;
        throw InvalidInputError(file.string() + ": malformed value for " + key);
      }
    }
    if (dim == 0) throw InvalidInputError(file.string() + ":" + std::to_string(line_no) + ": dim missing");
    Task t = make_box_task(prob.tasks.size(), *kind, dim, 1.0);
    t.lower.assign(dim, lower);
    t.upper.assign(dim, upper);
    Rng rng(task_seed);
    if (*kind != FunctionKind::Schwefel) {
      t.rotation = random_rotation(dim, rng);
      std::vector<double> u(dim);
      for (double& v : u) v = rng.uniform(0.1, 0.9);
      place_optimum(t, u);
    }
    prob.tasks.push_back(std::move(t));
  }
  prob.validate();
  return prob;
}

MultitaskProblem make_problem(const ProblemSpec& spec, const std::optional<std::filesystem::path>& data_dir) {
  if (spec.suite == Suite::Cec17) return make_cec17_pair(spec.problem_id, spec.seed, spec.dims, data_dir);
  return load_custom_problem(spec.problem_id, spec.seed);
}

}  // namespace emt
