#include "ctrkit/grad_check.hpp"

#include <cmath>

namespace ctrkit {

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

double grad_check(const std::function<Var(Graph&, Var)>& build, const Array& x, double eps) {
    Graph g;
    Var leaf = g.input(x);
    Var root = build(g, leaf);
    g.backward(root);
    const Array analytic = g.grad(leaf);

    double worst = 0.0;
    Array probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = probe.data[i];
        probe.data[i] = keep + eps;
        Graph gp;
        const double fp = gp.value(build(gp, gp.input(probe))).data[0];
        probe.data[i] = keep - eps;
        Graph gm;
        const double fm = gm.value(build(gm, gm.input(probe))).data[0];
        probe.data[i] = keep;
        const double numeric = (fp - fm) / (2.0 * eps);
        worst = std::max(worst, rel_err(analytic.data[i], numeric));
    }
    return worst;
}

double grad_check_params(ParamStore& params, const std::function<Var(Graph&)>& build, double eps) {
    GradStore grads(params);
    {
        Graph g(&params, &grads);
        g.backward(build(g));
    }

    double worst = 0.0;
    for (int p = 0; p < params.count(); ++p) {
        Array& arr = params.array(p);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const double keep = arr.data[i];
            arr.data[i] = keep + eps;
            Graph gp(&params, nullptr);
            const double fp = gp.value(build(gp)).data[0];
            arr.data[i] = keep - eps;
            Graph gm(&params, nullptr);
            const double fm = gm.value(build(gm)).data[0];
            arr.data[i] = keep;
            const double numeric = (fp - fm) / (2.0 * eps);
            worst = std::max(worst, rel_err(grads.array(p).data[i], numeric));
        }
    }
    return worst;
}

}  // namespace ctrkit
