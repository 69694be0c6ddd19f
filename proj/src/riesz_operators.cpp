#include "hardy/riesz_operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hardy/errors.hpp"

namespace hardy {

Estimate kernel_cell_integral(double x, double lo, double hi, const KernelEvaluator& k, bool transposed) {
    if (!(hi > lo)) return {};
    double dist = x <= lo ? lo - x : x - hi;
    if (!(dist > 0.0)) throw DomainError("kernel_cell_integral: x must lie outside the cell");
    const double w2 = 2.0 * k.param().lambda();
    auto integrand = [&](double y) {
        double K = transposed ? k.riesz(y, x).value : k.riesz(x, y).value;
        return K * std::pow(y, w2);
    };
    const double w = hi - lo;
    if (dist >= w) {
        // Single panel; the pole at y = x sits at least one width away.
        int n = dist >= 4.0 * w ? 4 : 8;
        double v = gauss_panel(integrand, lo, hi, GaussLegendre::get(n));
        double rho = 2.0 * dist / w + 1.0;
        rho += std::sqrt(rho * rho - 1.0);
        return {v, std::abs(v) * std::pow(rho, -2.0 * n)};
    }
    std::vector<double> br = x <= lo ? graded_toward_lo(lo, hi, dist) : graded_toward_hi(lo, hi, dist);
    // Nodes are rounded to ulp(y); near the pole that perturbs the integrand by ~eps y / dist.
    QuadratureSpec spec = k.spec();
    spec.rel_tol = std::max(spec.rel_tol, 16.0 * std::numeric_limits<double>::epsilon() * hi / dist);
    try {
        return integrate_adaptive(integrand, br, spec, "cell integral");
    } catch (const QuadratureError& e) {
        throw QuadratureError(std::string(e.what()) + " (x = " + std::to_string(x) + ", cell [" + std::to_string(lo) +
                                  ", " + std::to_string(hi) + "])",
                              e.estimate(), e.achieved_error());
    }
}

namespace {

// Index of the cell whose interior contains x, -1 if none; throws when x hits a
// breakpoint across which f jumps.
long locate(const StepFunction& f, double x) {
    const auto& b = f.breakpoints();
    if (f.is_zero() || x < b.front() || x > b.back()) return -1;
    auto it = std::lower_bound(b.begin(), b.end(), x);
    if (it != b.end() && *it == x)
        throw DomainError("evaluation point lies on a breakpoint where the function jumps");
    return static_cast<long>(it - b.begin()) - 1;
}

Estimate apply_impl(const StepFunction& f, double x, const KernelEvaluator& k, const PvOptions& pv,
                    bool transposed) {
    if (!(x > 0.0)) throw DomainError("Riesz transform needs x > 0");
    Estimate total;
    long ic = locate(f, x);
    for (std::size_t i = 0; i < f.cells(); ++i) {
        if (static_cast<long>(i) == ic) continue;
        double v = f.values()[i];
        if (v == 0.0) continue;
        Estimate e = kernel_cell_integral(x, f.cell_lo(i), f.cell_hi(i), k, transposed);
        total.value += v * e.value;
        total.error += std::abs(v) * e.error;
    }
    if (ic < 0 || f.values()[ic] == 0.0) return total;

    const double c = f.values()[ic], lo = f.cell_lo(ic), hi = f.cell_hi(ic);
    const double dist = std::min(x - lo, hi - x);
    const double delta = pv.delta_fraction * std::min({hi - lo, dist, 0.125 * x});
    const double lam = k.param().lambda();
    auto excised = [&](double d) {
        Estimate a = kernel_cell_integral(x, lo, x - d, k, transposed);
        Estimate b = kernel_cell_integral(x, x + d, hi, k, transposed);
        double u = d / x;
        return Estimate{a.value + b.value + (2.0 * lam / std::numbers::pi) * u * std::log(u), a.error + b.error};
    };
    Estimate f1 = excised(delta), f2 = excised(2.0 * delta);
    double value = 2.0 * f1.value - f2.value;
    double disc = std::abs(f1.value - f2.value);
    if (disc > pv.tolerance * std::max(std::abs(value), 1.0))
        throw PrincipalValueError("principal value: excision radii disagree", disc);
    total.value += c * value;
    total.error += std::abs(c) * (disc * 4.0 * delta / x + 2.0 * f1.error + f2.error);
    return total;
}

}  // namespace

Estimate riesz_apply(const StepFunction& f, double x, const KernelEvaluator& k, const PvOptions& pv) {
    return apply_impl(f, x, k, pv, false);
}

Estimate riesz_adjoint_apply(const StepFunction& g, double x, const KernelEvaluator& k, const PvOptions& pv) {
    return apply_impl(g, x, k, pv, true);
}

Estimate riesz_apply(const StepFunction& f, double x, BesselParam lam, const QuadratureSpec& spec) {
    return riesz_apply(f, x, KernelEvaluator(lam, spec));
}

Estimate riesz_adjoint_apply(const StepFunction& g, double x, BesselParam lam, const QuadratureSpec& spec) {
    return riesz_adjoint_apply(g, x, KernelEvaluator(lam, spec));
}

LipschitzSymbol LipschitzSymbol::from_function(const std::function<double(double)>& fn, double alpha,
                                               const std::vector<double>& partition, BesselParam lam) {
    if (!(alpha > 0.0) || !(alpha < 1.0 / lam.dim()))
        throw DomainError("Lip_alpha symbol needs 0 < alpha < 1/(2 lambda + 1)");
    if (partition.size() < 2) throw DomainError("symbol partition needs at least one cell");
    LipschitzSymbol s;
    s.sample = sample_midpoint(fn, partition);
    s.alpha = alpha;
    s.seminorm_estimate = lip_seminorm(s.sample, alpha, lam);
    s.domain_lo = partition.front();
    s.domain_hi = partition.back();
    return s;
}

double lip_seminorm(const StepFunction& b, double alpha, BesselParam lam) {
    const std::size_t n = b.cells();
    std::vector<double> mid(n), F(n);
    for (std::size_t i = 0; i < n; ++i) {
        mid[i] = 0.5 * (b.cell_lo(i) + b.cell_hi(i));
        F[i] = measure(0.0, mid[i], lam);
    }
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dv = std::abs(b.values()[i] - b.values()[j]);
            if (dv == 0.0) continue;
            // m((mid_i, mid_j)); the direct form avoids cancellation in F_j - F_i
            double m = (mid[j] - mid[i]) < 1e-3 * mid[j] ? measure(mid[i], mid[j], lam) : F[j] - F[i];
            best = std::max(best, dv / std::pow(m, alpha));
        }
    return best;
}

Estimate commutator_apply(const LipschitzSymbol& b, const StepFunction& f, double x, const KernelEvaluator& k) {
    if (f.is_zero()) return {};
    if (x < b.domain_lo || x > b.domain_hi || f.support_lo() < b.domain_lo || f.support_hi() > b.domain_hi)
        throw DomainError("commutator: symbol grid must cover the support of f and the point x");
    locate(f, x);
    locate(b.sample, x);
    const double bx = b(x);
    const auto& bb = b.sample.breakpoints();
    Estimate total;
    for (std::size_t i = 0; i < f.cells(); ++i) {
        double fv = f.values()[i];
        if (fv == 0.0) continue;
        double lo = f.cell_lo(i), hi = f.cell_hi(i);
        auto it = std::upper_bound(bb.begin(), bb.end(), lo);
        double a = lo;
        while (a < hi) {
            double e = (it != bb.end() && *it < hi) ? *it++ : hi;
            double coef = bx - b(0.5 * (a + e));
            if (coef != 0.0) {
                Estimate ce = kernel_cell_integral(x, a, e, k, false);
                total.value += coef * fv * ce.value;
                total.error += std::abs(coef * fv) * ce.error;
            }
            a = e;
        }
    }
    return total;
}

Estimate commutator_apply(const std::function<double(double)>& b, const StepFunction& f, double x,
                          const KernelEvaluator& k) {
    if (f.is_zero()) return {};
    if (!(x > 0.0)) throw DomainError("commutator needs x > 0");
    const double w2 = 2.0 * k.param().lambda(), bx = b(x);
    // points closer to x than this are dropped; the integrand is O(|x - y|^{alpha - 1})
    const double gap = 1e-10 * x;
    auto g = [&](double y) {
        if (std::abs(y - x) < gap) return 0.0;
        return (bx - b(y)) * k.riesz(x, y).value * std::pow(y, w2);
    };
    Estimate total;
    auto piece = [&](double lo, double hi, double fv) {
        if (!(hi > lo)) return;
        std::vector<double> br;
        double w = hi - lo;
        if (lo >= x) {
            double d = lo - x;
            br = d < w ? graded_toward_lo(lo, hi, std::max(d, 1e-6 * w)) : std::vector<double>{lo, hi};
        } else {
            double d = x - hi;
            br = d < w ? graded_toward_hi(lo, hi, std::max(d, 1e-6 * w)) : std::vector<double>{lo, hi};
        }
        // b(x) - b(y) cancels near x; its rounding sets the attainable accuracy
        auto noise = [&](double y) {
            if (std::abs(y - x) < gap) return 0.0;
            return (std::abs(bx) + std::abs(b(y))) * std::abs(k.riesz(x, y).value) * std::pow(y, w2);
        };
        double floor = 0.0;
        for (std::size_t j = 0; j + 1 < br.size(); ++j) floor += gauss_panel(noise, br[j], br[j + 1], GaussLegendre::get(8));
        floor *= 16.0 * std::numeric_limits<double>::epsilon();
        Estimate e;
        try {
            e = integrate_adaptive(g, br, k.spec(), "commutator", floor);
        } catch (const QuadratureError& err) {
            throw QuadratureError(std::string(err.what()) + " (x = " + std::to_string(x) + ", cell [" +
                                      std::to_string(lo) + ", " + std::to_string(hi) + "])",
                                  err.estimate(), err.achieved_error());
        }
        total.value += fv * e.value;
        total.error += std::abs(fv) * e.error;
    };
    for (std::size_t i = 0; i < f.cells(); ++i) {
        double fv = f.values()[i];
        if (fv == 0.0) continue;
        double lo = f.cell_lo(i), hi = f.cell_hi(i);
        if (x > lo && x < hi) {
            piece(lo, x, fv);
            piece(x, hi, fv);
        } else {
            piece(lo, hi, fv);
        }
    }
    return total;
}

namespace {

// m(I(x, s)) from x and s directly; x - s, x + s round to x once s < ulp(x).
double ball_measure(double x, double s, BesselParam lam) {
    if (s >= x) return std::pow(x + s, lam.dim()) / lam.dim();
    double lo = x - s, d = lam.dim();
    return std::pow(lo, d) * std::expm1(d * std::log1p(2.0 * s / lo)) / d;
}

}  // namespace

Estimate fractional_integral(const StepFunction& f, double alpha, double x, BesselParam lam,
                             const QuadratureSpec& spec) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw DomainError("fractional integral needs 0 < alpha < 1");
    if (!(x > 0.0)) throw DomainError("fractional integral needs x > 0");
    const double w2 = 2.0 * lam.lambda(), ia = 1.0 / alpha;
    Estimate total;
    // one side of x: y = x + sign * s for s in [s0, s1], s = t^{1/alpha}
    auto side = [&](double v, double s0, double s1, double sign) {
        if (!(s1 > s0)) return;
        auto g = [&](double t) {
            double s = std::pow(t, ia);
            double y = x + sign * s;
            double m = ball_measure(x, s, lam);
            return std::pow(m, alpha - 1.0) * std::pow(y, w2) * ia * std::pow(t, ia - 1.0);
        };
        std::vector<double> br{std::pow(s0, alpha)};
        if (sign > 0 && s0 < x && x < s1) br.push_back(std::pow(x, alpha));
        br.push_back(std::pow(s1, alpha));
        Estimate e = integrate_adaptive(g, br, spec, "fractional integral");
        total.value += v * e.value;
        total.error += v * e.error;
    };
    for (std::size_t i = 0; i < f.cells(); ++i) {
        double v = std::abs(f.values()[i]);
        if (v == 0.0) continue;
        double lo = f.cell_lo(i), hi = f.cell_hi(i);
        if (hi <= x) {
            side(v, x - hi, x - lo, -1.0);
        } else if (lo >= x) {
            side(v, lo - x, hi - x, 1.0);
        } else {
            side(v, 0.0, x - lo, -1.0);
            side(v, 0.0, hi - x, 1.0);
        }
    }
    return total;
}

double integrate_composite(const std::function<double(double)>& fn, const std::vector<double>& breaks, int nodes) {
    const GaussLegendre& rule = GaussLegendre::get(nodes);
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) s += gauss_panel(fn, breaks[i], breaks[i + 1], rule);
    return s;
}

double lq_norm_pointwise(const std::function<double(double)>& fn, double q, const std::vector<double>& breaks,
                         BesselParam lam, int nodes) {
    const double w2 = 2.0 * lam.lambda();
    double s = integrate_composite([&](double x) { return std::pow(std::abs(fn(x)), q) * std::pow(x, w2); },
                                   breaks, nodes);
    return std::pow(s, 1.0 / q);
}

}  // namespace hardy
