#pragma once

#include <cstddef>
#include <cstdint>
#include <shared_mutex>
#include <unordered_map>

#include "hardy/measure.hpp"
#include "hardy/quadrature.hpp"
#include "hardy/step_function.hpp"

namespace hardy {

// Weinstein-type theta integrals for one lambda. All kernel values carry the
// quadrature's own error estimate.
class KernelEvaluator {
public:
    explicit KernelEvaluator(BesselParam lam, QuadratureSpec spec = {});

    BesselParam param() const { return lam_; }
    const QuadratureSpec& spec() const { return spec_; }

    Estimate poisson(double t, double x, double y) const;
    Estimate conjugate(double t, double x, double y) const;
    Estimate riesz(double x, double y) const;
    // R(x, y1) - R(x, y2), differenced under the integral sign.
    Estimate riesz_diff_second(double x, double y1, double y2) const;
    // R(x1, y) - R(x2, y).
    Estimate riesz_diff_first(double x1, double x2, double y) const;

    // The theta integral int_0^pi (sin th)^{2 lambda - 1} d th = B(lambda, 1/2).
    double sine_mass() const { return sine_mass_; }

private:
    struct Point {
        double x, y, delta, t2;
    };
    Estimate theta_integral(const Point* pts, const double* coef, int npts, bool poisson) const;

    BesselParam lam_;
    QuadratureSpec spec_;
    double sine_mass_;
    int sine_mode_;  // 2 lambda - 1 as a small integer, or -1 for a general power
    int den_mode_;   // 2 (lambda + 1) as a small integer, or -1
    const void* table_ = nullptr;
};

Estimate poisson_kernel(double t, double x, double y, BesselParam lam, const QuadratureSpec& spec = {});
Estimate conjugate_kernel(double t, double x, double y, BesselParam lam, const QuadratureSpec& spec = {});
double riesz_kernel(double x, double y, BesselParam lam, const QuadratureSpec& spec = {});
Estimate riesz_kernel_estimate(double x, double y, BesselParam lam, const QuadratureSpec& spec = {});

// |R(x, y)| m(I(x, |x - y|))
double size_ratio(double x, double y, BesselParam lam, const QuadratureSpec& spec = {});
// |R(y, x0) - R(y, x)| / ((|x0 - x| / |x0 - y|) / m(I(x0, |x0 - y|))); needs |x0 - x| < |x0 - y| / 2.
double smoothness_ratio(double y, double x0, double x, BesselParam lam, const QuadratureSpec& spec = {});

struct KernelRegimeConstants {
    double lambda = 0.0;
    double K1 = 0.0;    // R(1, y) <= -C_K1 for 0 < y <= K1
    double K2 = 0.0;    // R(1, y) y^lambda (y - 1) >= C_K2 for 1 < y <= 1 + K2
    double C_K1 = 0.0;
    double C_K2 = 0.0;
    int grid_points = 0;
};

struct RegimeSearch {
    int grid_points = 512;
    // Certificate thresholds, as fractions of the limiting values |R(1, 0+)| and 1/pi.
    double margin = 0.5;
    double K1_cap = 0.5;
    double K2_cap = 0.45;
    double bisection_tol = 1e-6;
};

KernelRegimeConstants estimate_regime_constants(BesselParam lam, const QuadratureSpec& spec = {},
                                                const RegimeSearch& search = {});
// Cached per (lambda, spec, search); thread safe.
const KernelRegimeConstants& regime_constants(BesselParam lam, const QuadratureSpec& spec = {});

// Gamma(lambda + 1/2) / (Gamma(lambda) sqrt(pi))
double hankel_normalization(BesselParam lam);
// tau_x g(y) for a step function g, integrated exactly over the theta-cells cut out by
// the breakpoints of g.
double hankel_translate(const StepFunction& g, double x, double y, BesselParam lam);
// (f #_lambda g)(x) = int f(y) tau_x g(y) dm(y)
Estimate hankel_sharp(const StepFunction& f, const StepFunction& g, double x, BesselParam lam,
                      const QuadratureSpec& spec = {});

// Riesz kernel memo keyed on (y/x, lambda) through homogeneity. Concurrent readers and
// writers are allowed; values do not depend on insertion order.
class KernelCache {
public:
    explicit KernelCache(const KernelEvaluator& k) : k_(k) {}
    Estimate riesz(double x, double y) const;
    std::size_t size() const;

private:
    const KernelEvaluator& k_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::uint64_t, Estimate> memo_;
};

}  // namespace hardy
