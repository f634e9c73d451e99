#include "emt/functions.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "emt/error.hpp"

namespace emt {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Weierstrass constants.
constexpr double kWeierA = 0.5;
constexpr double kWeierB = 3.0;
constexpr int kWeierKMax = 20;

constexpr double kSchwefelOptimum = 420.9687;
constexpr double kSchwefelConstant = 418.9829;

double sphere(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v;
  return s;
}

double rosenbrock(std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < z.size(); ++i) {
    const double a = z[i + 1] - z[i] * z[i];
    const double b = z[i] - 1.0;
    s += 100.0 * a * a + b * b;
  }
  return s;
}

double ackley(std::span<const double> z) {
  const double n = static_cast<double>(z.size());
  double sq = 0.0;
  double cs = 0.0;
  for (double v : z) {
    sq += v * v;
    cs += std::cos(kTwoPi * v);
  }
  return -20.0 * std::exp(-0.2 * std::sqrt(sq / n)) - std::exp(cs / n) + 20.0 + std::numbers::e;
}

double rastrigin(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * v - 10.0 * std::cos(kTwoPi * v) + 10.0;
  return s;
}

double griewank(std::span<const double> z) {
  double sum = 0.0;
  double prod = 1.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    sum += z[i] * z[i];
    prod *= std::cos(z[i] / std::sqrt(static_cast<double>(i + 1)));
  }
  return 1.0 + sum / 4000.0 - prod;
}

struct WeierstrassTables {
  std::array<double, kWeierKMax + 1> ak{};
  std::array<double, kWeierKMax + 1> bk{};
  double offset = 0.0;  // sum_k a^k cos(pi b^k)
};

const WeierstrassTables& weierstrass_tables() {
  static const WeierstrassTables t = [] {
    WeierstrassTables w;
    double a = 1.0;
    double b = 1.0;
    for (int k = 0; k <= kWeierKMax; ++k) {
      w.ak[k] = a;
      w.bk[k] = b;
      w.offset += a * std::cos(kTwoPi * b * 0.5);
      a *= kWeierA;
      b *= kWeierB;
    }
    return w;
  }();
  return t;
}

double weierstrass(std::span<const double> z) {
  const auto& t = weierstrass_tables();
  double s = 0.0;
  for (double v : z) {
    double inner = 0.0;
    for (int k = 0; k <= kWeierKMax; ++k) inner += t.ak[k] * std::cos(kTwoPi * t.bk[k] * (v + 0.5));
    // Subtracting per coordinate makes the optimum exactly zero.
    s += inner - t.offset;
  }
  return s;
}

double schwefel(std::span<const double> z) {
  double s = 0.0;
  for (double v : z) s += v * std::sin(std::sqrt(std::abs(v)));
  return kSchwefelConstant * static_cast<double>(z.size()) - s;
}

}  // namespace

std::string_view to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::Sphere: return "sphere";
    case FunctionKind::Rosenbrock: return "rosenbrock";
    case FunctionKind::Ackley: return "ackley";
    case FunctionKind::Rastrigin: return "rastrigin";
    case FunctionKind::Griewank: return "griewank";
    case FunctionKind::Weierstrass: return "weierstrass";
    case FunctionKind::Schwefel: return "schwefel";
  }
  return "unknown";
}

std::optional<FunctionKind> parse_function_kind(std::string_view name) {
  for (auto k : {FunctionKind::Sphere, FunctionKind::Rosenbrock, FunctionKind::Ackley, FunctionKind::Rastrigin,
                 FunctionKind::Griewank, FunctionKind::Weierstrass, FunctionKind::Schwefel}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

double evaluate_base(FunctionKind kind, std::span<const double> z) {
  if (z.empty()) throw InvalidInputError("evaluate_base: empty input");
  for (double v : z) {
    if (std::isnan(v)) throw InvalidInputError("evaluate_base: NaN input");
  }
  switch (kind) {
    case FunctionKind::Sphere: return sphere(z);
    case FunctionKind::Rosenbrock: return rosenbrock(z);
    case FunctionKind::Ackley: return ackley(z);
    case FunctionKind::Rastrigin: return rastrigin(z);
    case FunctionKind::Griewank: return griewank(z);
    case FunctionKind::Weierstrass: return weierstrass(z);
    case FunctionKind::Schwefel: return schwefel(z);
  }
  throw InvalidInputError("evaluate_base: unknown function kind");
}

double canonical_optimum_coordinate(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::Rosenbrock: return 1.0;
    case FunctionKind::Schwefel: return kSchwefelOptimum;
    default: return 0.0;
  }
}

double canonical_optimum_value(FunctionKind kind, std::size_t dim) {
  if (kind != FunctionKind::Schwefel) return 0.0;
  const std::vector<double> z(dim, kSchwefelOptimum);
  return schwefel(z);
}

}  // namespace emt
