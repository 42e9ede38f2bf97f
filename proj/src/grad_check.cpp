#include "scd/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "scd/error.hpp"

namespace scd {

namespace {
double evaluate(const GraphBuilder& f, const Tensor& x) {
    Graph g;
    return f(g, g.constant(x)).item();
}
}  // namespace

GradCheckResult grad_check_detailed(const GraphBuilder& f, const Tensor& x, double step) {
    if (!(step > 0.0)) throw ValidationError("grad_check: step must be positive");
    Graph g;
    Var xv = g.parameter(x);
    Var loss = f(g, xv);
    g.backward(loss);
    const Tensor analytic = xv.grad_tensor();

    GradCheckResult result;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double original = probe.data[i];
        probe.data[i] = original + step;
        const double up = evaluate(f, probe);
        probe.data[i] = original - step;
        const double down = evaluate(f, probe);
        probe.data[i] = original;

        const double fd = (up - down) / (2.0 * step);
        const double ad = analytic.data[i];
        const double rel = std::abs(ad - fd) / std::max(1e-12, std::abs(ad) + std::abs(fd));
        if (i == 0 || rel > result.max_rel_error) result = {rel, i, ad, fd};
    }
    return result;
}

}  // namespace scd
