#pragma once

#include "edgestereo/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace edgestereo::ad {

/// Builds a scalar on `tape` from the checked input `x`.
using ScalarFn = std::function<Var(Tape& tape, Var x)>;

struct CoordinateCheck {
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool pass = false;
};

struct GradcheckReport {
    std::vector<CoordinateCheck> coordinates;
    double max_rel_error = 0.0;
    bool passed = true;
};

/// Central differences (f(x + h e) - f(x - h e)) / 2h against the taped gradient, every
/// coordinate of x. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradcheckReport gradcheck(const ScalarFn& f, const Grid& x, double h = 1e-5, double tol = 1e-4);

double relative_error(double analytic, double numeric);

struct OpCheckResult {
    std::string op;
    std::string wrt;
    int points = 0;
    double max_rel_error = 0.0;
    bool passed = true;
};

/// Names accepted by check_op: every differentiable exported operation.
const std::vector<std::string>& differentiable_ops();

/// Runs gradcheck for `op` at `points` random smooth points drawn from `seed`, once per
/// differentiable input. Unknown names throw std::invalid_argument.
std::vector<OpCheckResult> check_op(const std::string& op, std::uint64_t seed, int points = 100,
                                    double h = 1e-5, double tol = 1e-4);

} // namespace edgestereo::ad
