#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hardy/measure.hpp"

namespace hardy {

// Compactly supported piecewise-constant function on (0, inf), kept in canonical form:
// equal neighbouring values merged, zero cells at either end trimmed. The zero function
// has no breakpoints.
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(std::vector<double> breakpoints, std::vector<double> values);

    static StepFunction indicator(double lo, double hi, double height = 1.0);
    static StepFunction indicator(const Interval& I, double height = 1.0);

    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t cells() const { return values_.size(); }
    bool is_zero() const { return values_.empty(); }
    double support_lo() const { return breaks_.empty() ? 0.0 : breaks_.front(); }
    double support_hi() const { return breaks_.empty() ? 0.0 : breaks_.back(); }
    double cell_lo(std::size_t i) const { return breaks_[i]; }
    double cell_hi(std::size_t i) const { return breaks_[i + 1]; }

    // Value at x; at an interior breakpoint the cell to the right wins.
    double operator()(double x) const;
    double sup_norm() const;

    // f restricted to (lo, hi).
    StepFunction restrict(double lo, double hi) const;
    StepFunction restrict(const Interval& I) const { return restrict(I.lo(), I.hi()); }
    // f restricted to the complement of (lo, hi).
    StepFunction restrict_complement(double lo, double hi) const;

    StepFunction operator-() const;
    StepFunction& operator*=(double s);

    friend StepFunction operator+(const StepFunction& f, const StepFunction& g);
    friend StepFunction operator-(const StepFunction& f, const StepFunction& g);
    friend StepFunction operator*(const StepFunction& f, const StepFunction& g);
    friend StepFunction operator*(double s, const StepFunction& f);
    friend StepFunction operator*(const StepFunction& f, double s) { return s * f; }
    friend bool operator==(const StepFunction&, const StepFunction&) = default;

    // Pointwise op(f, g) on the merged partition.
    static StepFunction combine(const StepFunction& f, const StepFunction& g,
                                const std::function<double(double, double)>& op);

private:
    void canonicalize();
    std::vector<double> breaks_;
    std::vector<double> values_;
};

double integrate(const StepFunction& f, BesselParam lam);
// (sum |v|^p m(cell))^{1/p}; p = infinity gives the sup norm. For p < 1 this is the
// p-quasi-norm.
double lp_norm(const StepFunction& f, double p, BesselParam lam);

// Sorted union of two breakpoint lists.
std::vector<double> merge_partitions(const std::vector<double>& a, const std::vector<double>& b);
// n equal cells on [lo, hi].
std::vector<double> uniform_partition(double lo, double hi, int n);
// `base` merged with n uniform cells on [front, back].
std::vector<double> refine_partition(const std::vector<double>& base, int n);

// Step function taking the value fn(midpoint) on each cell of `partition`.
StepFunction sample_midpoint(const std::function<double(double)>& fn, const std::vector<double>& partition);
// Step function of dm-weighted cell averages of fn, by Gauss-Legendre with `nodes` points per cell.
StepFunction sample_average(const std::function<double(double)>& fn, const std::vector<double>& partition,
                            BesselParam lam, int nodes = 8);

// Two lines: "breakpoints: ..." and "values: ...", round-trip exact.
std::string to_text(const StepFunction& f);
StepFunction from_text(const std::string& text);

}  // namespace hardy
