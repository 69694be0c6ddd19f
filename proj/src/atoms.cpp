#include "hardy/atoms.hpp"

#include <algorithm>
#include <cmath>

#include "hardy/errors.hpp"

namespace hardy {

AtomCertificate validate_atom(const Atom& a, BesselParam lam) {
    AtomCertificate c;
    const Interval& I = a.support;
    double m = measure(I, lam);
    if (a.profile.is_zero()) {
        c.support_ok = c.sup_ok = c.moment_ok = true;
        return c;
    }
    double leak = std::max({0.0, I.lo() - a.profile.support_lo(), a.profile.support_hi() - I.hi()});
    c.support_excess = leak / I.radius();
    c.support_ok = c.support_excess <= 1e-12;
    double sup = a.profile.sup_norm();
    c.sup_ratio = sup * std::pow(m, 1.0 / a.p);
    c.sup_ok = c.sup_ratio <= 1.0 + 1e-12;
    c.moment_ratio = std::abs(integrate(a.profile, lam)) / (sup * m);
    c.moment_ok = c.moment_ratio <= 1e-10;
    return c;
}

double AtomicDecomposition::tally() const {
    double s = 0.0;
    for (const auto& t : terms) s += std::pow(std::abs(t.coefficient), p);
    return s;
}

StepFunction AtomicDecomposition::reconstruct() const {
    StepFunction s;
    for (const auto& t : terms) s = s + t.coefficient * t.atom.profile;
    return s;
}

double hp_norm_upper(const AtomicDecomposition& d) { return std::pow(d.tally(), 1.0 / d.p); }

void TwoBumpFunction::check(BesselParam lam) const {
    if (!(r > 0.0)) throw HypothesisViolation("two-bump radius must be positive");
    if (std::abs(x1 - x2) < 4.0 * r * (1.0 - 1e-12))
        throw HypothesisViolation("two-bump separation |x1 - x2| must be at least 4r");
    auto inside = [&](const StepFunction& f, double x, double C, const char* name) {
        if (f.is_zero()) return;
        Interval I(x, r);
        double slack = 1e-12 * r;
        if (f.support_lo() < I.lo() - slack || f.support_hi() > I.hi() + slack)
            throw HypothesisViolation(std::string(name) + " is not supported in I(x_i, r)");
        if (f.sup_norm() > C * (1.0 + 1e-12))
            throw HypothesisViolation(std::string(name) + " exceeds its bound C_i");
    };
    inside(f1, x1, C1, "f1");
    inside(f2, x2, C2, "f2");
    double i1 = integrate(f1, lam), i2 = integrate(f2, lam);
    double scale = lp_norm(f1, 1.0, lam) + lp_norm(f2, 1.0, lam);
    if (std::abs(i1 + i2) > 1e-9 * scale)
        throw HypothesisViolation("two-bump function must have vanishing integral");
}

int smallest_integer_above_log2(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("log2 argument must be positive and finite");
    int e = 0;
    std::frexp(s, &e);  // s = m 2^e with m in [1/2, 1), so floor(log2 s) = e - 1
    return e;
}

TwoBumpDecomposition decompose_two_bump(const TwoBumpFunction& f, double p, BesselParam lam) {
    if (!p_range(lam).contains(p)) throw HypothesisViolation("p outside the admissible range");
    TwoBumpDecomposition out;
    out.decomposition.p = p;
    if (f.f1.is_zero() && f.f2.is_zero()) return out;
    f.check(lam);

    const double r = f.r;
    const int J0 = smallest_integer_above_log2(std::abs(f.x1 - f.x2) / r);
    out.J0 = J0;
    auto push = [&](const StepFunction& piece, const Interval& I, int bump, int level) {
        double sup = piece.sup_norm();
        if (sup == 0.0) return;
        double alpha = sup * std::pow(measure(I, lam), 1.0 / p);
        out.decomposition.terms.push_back({alpha, Atom{I, (1.0 / alpha) * piece, p}, bump, level});
    };

    const StepFunction* fi[2] = {&f.f1, &f.f2};
    const double xi[2] = {f.x1, f.x2};
    double mass[2], top_avg[2];
    for (int i = 0; i < 2; ++i) {
        mass[i] = integrate(*fi[i], lam);
        // level 1: f_i - a~^1 chi_{I(x_i, 2r)}
        Interval I1(xi[i], 2.0 * r);
        double prev = mass[i] / measure(I1, lam);
        push(*fi[i] - StepFunction::indicator(I1, prev), I1, i + 1, 1);
        for (int j = 2; j <= J0; ++j) {
            Interval Iprev(xi[i], std::ldexp(r, j - 1)), Ij(xi[i], std::ldexp(r, j));
            double cur = mass[i] / measure(Ij, lam);
            push(StepFunction::indicator(Iprev, prev) - StepFunction::indicator(Ij, cur), Ij, i + 1, j);
            prev = cur;
        }
        top_avg[i] = prev;
    }
    // joint level on the interval around the midpoint
    Interval top(0.5 * (f.x1 + f.x2), std::ldexp(r, J0 + 1));
    double a_top = mass[0] / measure(top, lam);
    push(StepFunction::indicator(Interval(xi[0], std::ldexp(r, J0)), top_avg[0]) - StepFunction::indicator(top, a_top),
         top, 1, J0 + 1);
    push(StepFunction::indicator(top, a_top) + StepFunction::indicator(Interval(xi[1], std::ldexp(r, J0)), top_avg[1]),
         top, 2, J0 + 1);
    out.bound = hp_norm_upper(out.decomposition);
    return out;
}

double two_bump_closed_form_bound(const TwoBumpFunction& f, double p, BesselParam lam) {
    double s = std::abs(f.x1 - f.x2) / f.r;
    double mix = std::pow(f.C1, p) * measure(Interval(f.x1, f.r), lam) +
                 std::pow(f.C2, p) * measure(Interval(f.x2, f.r), lam);
    return std::pow(s, 1.0 / p - 1.0) * std::pow(std::log2(s), 1.0 / p) * std::pow(mix, 1.0 / p);
}

}  // namespace hardy
