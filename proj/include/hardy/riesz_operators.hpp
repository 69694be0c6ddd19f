#pragma once

#include <functional>
#include <vector>

#include "hardy/kernels.hpp"
#include "hardy/step_function.hpp"

namespace hardy {

struct PvOptions {
    // Excision radii delta and 2 delta, delta = fraction * min(cell width, distance to
    // the nearer cell edge, x/8). The extrapolated value still carries an O((delta/x)^3)
    // remainder.
    double delta_fraction = 1.0 / 16.0;
    // Allowed disagreement of the two corrected excision estimates, relative to
    // max(|value|, |f(x)|).
    double tolerance = 0.1;
};

// Rf(x) = int f(y) R(x, y) dm(y). Inside the support the integral is a principal
// value: the symmetric excision (x - delta, x + delta) leaves an error
// (f(x)/x)(2 lambda/pi) delta log(delta/x) + O(delta); the logarithmic part is added
// back in closed form and the linear part removed by Richardson on delta, 2 delta.
Estimate riesz_apply(const StepFunction& f, double x, const KernelEvaluator& k, const PvOptions& pv = {});
// R~g(x) = int g(y) R(y, x) dm(y).
Estimate riesz_adjoint_apply(const StepFunction& g, double x, const KernelEvaluator& k, const PvOptions& pv = {});

Estimate riesz_apply(const StepFunction& f, double x, BesselParam lam, const QuadratureSpec& spec = {});
Estimate riesz_adjoint_apply(const StepFunction& g, double x, BesselParam lam, const QuadratureSpec& spec = {});

// int_lo^hi R(x, y) dm(y) (or R(y, x) when transposed) for x outside (lo, hi).
Estimate kernel_cell_integral(double x, double lo, double hi, const KernelEvaluator& k, bool transposed);

// A sampled Lip_alpha symbol together with the grid it lives on.
struct LipschitzSymbol {
    StepFunction sample;
    double alpha = 0.0;
    double seminorm_estimate = 0.0;
    double domain_lo = 0.0;
    double domain_hi = 0.0;

    double operator()(double x) const { return sample(x); }
    // Midpoint samples of fn on `partition`; checks 0 < alpha < 1/(2 lambda + 1).
    static LipschitzSymbol from_function(const std::function<double(double)>& fn, double alpha,
                                         const std::vector<double>& partition, BesselParam lam);
};

// max over pairs of cell midpoints of |b(x) - b(y)| / m((x, y))^alpha
double lip_seminorm(const StepFunction& b, double alpha, BesselParam lam);

// [b, R]f(x) = b(x) Rf(x) - R(bf)(x). Both terms are excised with the same radii, so
// the excised cell cancels exactly and only cells where b differs from b(x) remain.
Estimate commutator_apply(const LipschitzSymbol& b, const StepFunction& f, double x, const KernelEvaluator& k);
// Same for a symbol known pointwise: int (b(x) - b(y)) R(x, y) f(y) dm(y), which is an
// ordinary integral once b is Holder continuous at x.
Estimate commutator_apply(const std::function<double(double)>& b, const StepFunction& f, double x,
                          const KernelEvaluator& k);

// I_alpha^+ f(x) = int |f(y)| m(I(x, |x - y|))^{alpha - 1} dm(y); the substitution
// |y - x| = t^{1/alpha} removes the singularity at y = x.
Estimate fractional_integral(const StepFunction& f, double alpha, double x, BesselParam lam,
                             const QuadratureSpec& spec = {});

// Composite Gauss-Legendre with a fixed number of nodes per panel.
double integrate_composite(const std::function<double(double)>& fn, const std::vector<double>& breaks, int nodes);
// (int_a^b |fn|^q dm)^{1/q} over the panels `breaks`, fixed rule.
double lq_norm_pointwise(const std::function<double(double)>& fn, double q, const std::vector<double>& breaks,
                         BesselParam lam, int nodes = 4);

}  // namespace hardy
