#include "hardy/measure.hpp"

#include <cmath>
#include <string>

#include "hardy/errors.hpp"

namespace hardy {

BesselParam::BesselParam(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("lambda must be positive, got " + std::to_string(lambda));
}

Interval::Interval(double center, double radius) : center_(center), radius_(radius) {
    if (!(center > 0.0) || !std::isfinite(center))
        throw DomainError("interval center must be positive");
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw DomainError("interval radius must be positive");
}

Interval Interval::from_bounds(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi > lo)) throw DomainError("interval bounds must satisfy 0 <= lo < hi");
    return Interval(0.5 * (lo + hi), 0.5 * (hi - lo));
}

Interval Interval::normalized() const {
    if (radius_ <= center_) return *this;
    double h = 0.5 * (center_ + radius_);
    return Interval(h, h);
}

double measure(double lo, double hi, BesselParam lam) {
    double d = lam.dim();
    if (hi <= lo) return 0.0;
    if (lo <= 0.0) return std::pow(hi, d) / d;
    // hi^d - lo^d without cancellation for narrow cells far from the origin.
    return std::pow(lo, d) * std::expm1(d * std::log1p((hi - lo) / lo)) / d;
}

double measure(const Interval& I, BesselParam lam) { return measure(I.lo(), I.hi(), lam); }

double size_proxy(double x, double r, BesselParam lam) {
    return std::pow(x, 2.0 * lam.lambda()) * r + std::pow(r, lam.dim());
}

Comparability doubling_comparability(double x, double r, BesselParam lam) {
    double m = measure(Interval(x, r), lam);
    double proxy = size_proxy(x, r, lam);
    return {m / proxy, proxy / m};
}

PRange p_range(BesselParam lam) { return {lam.dim() / (lam.dim() + 1.0), 1.0}; }

}  // namespace hardy
