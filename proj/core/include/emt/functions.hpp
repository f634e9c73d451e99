#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace emt {

enum class FunctionKind { Sphere, Rosenbrock, Ackley, Rastrigin, Griewank, Weierstrass, Schwefel };

std::string_view to_string(FunctionKind kind);
std::optional<FunctionKind> parse_function_kind(std::string_view name);

/// Canonical benchmark value at z. Throws InvalidInputError on empty or NaN input.
double evaluate_base(FunctionKind kind, std::span<const double> z);

/// Coordinate value (identical in every dimension) at which `kind` attains its minimum.
double canonical_optimum_coordinate(FunctionKind kind);

/// Minimum value of `kind` in `dim` dimensions (0 for all but Schwefel's residual).
double canonical_optimum_value(FunctionKind kind, std::size_t dim);

}  // namespace emt
