#pragma once

#include <vector>

#include "hardy/measure.hpp"
#include "hardy/step_function.hpp"

namespace hardy {

struct Atom {
    Interval support;
    StepFunction profile;
    double p = 1.0;
};

struct AtomCertificate {
    bool support_ok = false;
    bool sup_ok = false;
    bool moment_ok = false;
    double support_excess = 0.0;  // how far the profile leaks outside the support, relative to the radius
    double sup_ratio = 0.0;       // ||a||_inf m(I)^{1/p}, at most 1
    double moment_ratio = 0.0;    // |int a dm| / (||a||_inf m(I))
    bool valid() const { return support_ok && sup_ok && moment_ok; }
};

// Never throws; failed conditions show up in the certificate.
AtomCertificate validate_atom(const Atom& a, BesselParam lam);

struct AtomTerm {
    double coefficient = 0.0;
    Atom atom;
    int bump = 0;   // 1 or 2 for the two-bump pieces, 0 otherwise
    int level = 0;  // j in 1..J0+1
};

struct AtomicDecomposition {
    double p = 1.0;
    std::vector<AtomTerm> terms;

    // sum |alpha|^p
    double tally() const;
    StepFunction reconstruct() const;
};

// (sum |alpha|^p)^{1/p}, the atomic upper bound for the H^p quasi-norm.
double hp_norm_upper(const AtomicDecomposition& d);

// f1 + f2 with supp f_i in I(x_i, r), |f_i| <= C_i, total integral 0, |x1 - x2| >= 4r.
struct TwoBumpFunction {
    StepFunction f1, f2;
    double x1 = 0.0, x2 = 0.0, r = 0.0;
    double C1 = 0.0, C2 = 0.0;

    StepFunction sum() const { return f1 + f2; }
    // Throws HypothesisViolation naming the first failed condition.
    void check(BesselParam lam) const;
};

struct TwoBumpDecomposition {
    AtomicDecomposition decomposition;
    int J0 = 0;
    double bound = 0.0;  // hp_norm_upper of the decomposition
};

// Smallest integer strictly larger than log2(s), exact at powers of two.
int smallest_integer_above_log2(double s);

// Telescoping averages over I(x_i, 2^j r), j = 1..J0, closed by a joint level on
// I((x1 + x2)/2, 2^{J0+1} r). Yields 2 (J0 + 1) atoms (zero pieces dropped) that sum
// back to f1 + f2.
TwoBumpDecomposition decompose_two_bump(const TwoBumpFunction& f, double p, BesselParam lam);

// s^{1/p - 1} (log2 s)^{1/p} (C1^p m(I(x1, r)) + C2^p m(I(x2, r)))^{1/p}, s = |x1 - x2|/r
double two_bump_closed_form_bound(const TwoBumpFunction& f, double p, BesselParam lam);

}  // namespace hardy
