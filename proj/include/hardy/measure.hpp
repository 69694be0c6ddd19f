#pragma once

namespace hardy {

// The parameter of the Bessel operator; the measure is x^{2 lambda} dx on (0, inf).
class BesselParam {
public:
    explicit BesselParam(double lambda);
    double lambda() const { return lambda_; }
    // Homogeneous dimension 2 lambda + 1.
    double dim() const { return 2.0 * lambda_ + 1.0; }

private:
    double lambda_;
};

// I(center, radius) intersected with (0, inf). Construction rejects radius <= 0.
class Interval {
public:
    Interval(double center, double radius);
    // Interval with the given endpoints, stored as center/radius.
    static Interval from_bounds(double lo, double hi);

    double center() const { return center_; }
    double radius() const { return radius_; }
    double lo() const { return center_ > radius_ ? center_ - radius_ : 0.0; }
    double hi() const { return center_ + radius_; }
    bool clipped() const { return radius_ > center_; }
    bool contains(double x) const { return x > lo() && x < hi(); }

    // Same point set, rewritten so that radius <= center: I(x, r) with r > x
    // equals I((x + r)/2, (x + r)/2).
    Interval normalized() const;
    // I(center, factor * radius).
    Interval dilated(double factor) const { return Interval(center_, factor * radius_); }

    friend bool operator==(const Interval&, const Interval&) = default;

private:
    double center_;
    double radius_;
};

// m((lo, hi)) by the closed-form antiderivative; 0 <= lo <= hi.
double measure(double lo, double hi, BesselParam lam);
double measure(const Interval& I, BesselParam lam);

// x^{2 lambda} r + r^{2 lambda + 1}
double size_proxy(double x, double r, BesselParam lam);

struct Comparability {
    double ratio;       // m(I(x, r)) / proxy
    double reciprocal;  // proxy / m(I(x, r))
};
Comparability doubling_comparability(double x, double r, BesselParam lam);

// Half-open range (lo, hi] of Hardy exponents.
struct PRange {
    double lo;
    double hi;
    bool contains(double p) const { return p > lo && p <= hi; }
};
PRange p_range(BesselParam lam);

}  // namespace hardy
