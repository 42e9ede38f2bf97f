#pragma once

#include <functional>

#include "scd/autodiff.hpp"

namespace scd {

// Builds a scalar-valued graph from the input Var.
using GraphBuilder = std::function<Var(Graph&, const Var& x)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // at worst_index
    double numeric = 0.0;
};

// Compares reverse-mode gradients of `f` at `x` against central differences,
// coordinate by coordinate. Relative error per coordinate is
// |g_ad - g_fd| / max(1e-12, |g_ad| + |g_fd|).
GradCheckResult grad_check_detailed(const GraphBuilder& f, const Tensor& x, double step);

inline double grad_check(const GraphBuilder& f, const Tensor& x, double step) {
    return grad_check_detailed(f, x, step).max_rel_error;
}

}  // namespace scd
