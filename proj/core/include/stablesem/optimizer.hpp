#pragma once

#include <functional>

#include "stablesem/common.hpp"

namespace stablesem {

/// Objective returning f(x); fills *gradient when non-null. Return +inf outside the domain.
using Objective = std::function<double(const Vector& x, Vector* gradient)>;

struct MinimizeOptions {
    int max_iterations = 500;
    double gradient_tolerance = 1e-5;  // infinity norm
    double relative_tolerance = 1e-9;  // |f_k - f_{k+1}| / max(|f_k|, |f_{k+1}|)
};

enum class StopReason { gradient, relative_change, line_search, max_iterations, infeasible_start };

struct MinimizeResult {
    Vector x;
    double value = 0.0;
    Vector gradient;
    int iterations = 0;
    bool converged = false;
    StopReason reason = StopReason::max_iterations;
    bool hit_infeasible = false;  // a trial point returned +inf
};

/// BFGS on the inverse Hessian with a monotone backtracking (Armijo) line search.
[[nodiscard]] MinimizeResult minimize_bfgs(const Objective& f, Vector x0, const MinimizeOptions& options = {});

/// Central-difference gradient with absolute step h.
[[nodiscard]] Vector central_difference_gradient(const Objective& f, const Vector& x, double h);

} // namespace stablesem
