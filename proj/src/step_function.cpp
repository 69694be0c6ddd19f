#include "hardy/step_function.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "hardy/errors.hpp"
#include "hardy/quadrature.hpp"

namespace hardy {

StepFunction::StepFunction(std::vector<double> breakpoints, std::vector<double> values)
    : breaks_(std::move(breakpoints)), values_(std::move(values)) {
    if (breaks_.empty() && values_.empty()) return;
    if (breaks_.size() != values_.size() + 1)
        throw DomainError("step function needs one more breakpoint than values");
    if (breaks_.front() < 0.0) throw DomainError("step function breakpoints must be nonnegative");
    for (std::size_t i = 0; i + 1 < breaks_.size(); ++i)
        if (!(breaks_[i + 1] > breaks_[i])) throw DomainError("step function breakpoints must increase");
    for (double v : values_)
        if (!std::isfinite(v)) throw DomainError("step function values must be finite");
    canonicalize();
}

void StepFunction::canonicalize() {
    std::vector<double> b{breaks_.front()}, v;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!v.empty() && v.back() == values_[i]) {
            b.back() = breaks_[i + 1];
        } else {
            v.push_back(values_[i]);
            b.push_back(breaks_[i + 1]);
        }
    }
    std::size_t first = 0, last = v.size();
    while (first < last && v[first] == 0.0) ++first;
    while (last > first && v[last - 1] == 0.0) --last;
    if (first == last) {
        breaks_.clear();
        values_.clear();
        return;
    }
    breaks_.assign(b.begin() + first, b.begin() + last + 1);
    values_.assign(v.begin() + first, v.begin() + last);
}

StepFunction StepFunction::indicator(double lo, double hi, double height) {
    return StepFunction({lo, hi}, {height});
}

StepFunction StepFunction::indicator(const Interval& I, double height) {
    return indicator(I.lo(), I.hi(), height);
}

double StepFunction::operator()(double x) const {
    if (values_.empty() || x < breaks_.front() || x >= breaks_.back()) return 0.0;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), x);
    return values_[static_cast<std::size_t>(it - breaks_.begin()) - 1];
}

double StepFunction::sup_norm() const {
    double s = 0.0;
    for (double v : values_) s = std::max(s, std::abs(v));
    return s;
}

StepFunction StepFunction::restrict(double lo, double hi) const {
    std::vector<double> b, v;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        double a = std::max(breaks_[i], lo), c = std::min(breaks_[i + 1], hi);
        if (c <= a) continue;
        if (!b.empty() && b.back() < a) {
            b.push_back(a);
            v.push_back(0.0);
        }
        if (b.empty()) b.push_back(a);
        b.push_back(c);
        v.push_back(values_[i]);
    }
    if (v.empty()) return {};
    return StepFunction(std::move(b), std::move(v));
}

StepFunction StepFunction::restrict_complement(double lo, double hi) const {
    return *this - restrict(lo, hi);
}

StepFunction StepFunction::operator-() const { return -1.0 * *this; }

StepFunction& StepFunction::operator*=(double s) {
    *this = s * *this;
    return *this;
}

StepFunction StepFunction::combine(const StepFunction& f, const StepFunction& g,
                                   const std::function<double(double, double)>& op) {
    std::vector<double> part = merge_partitions(f.breaks_, g.breaks_);
    if (part.size() < 2) return {};
    std::vector<double> vals(part.size() - 1);
    std::size_t i = 0, j = 0;
    for (std::size_t c = 0; c + 1 < part.size(); ++c) {
        double mid = 0.5 * (part[c] + part[c + 1]);
        while (i < f.values_.size() && f.breaks_[i + 1] <= mid) ++i;
        while (j < g.values_.size() && g.breaks_[j + 1] <= mid) ++j;
        double fv = (i < f.values_.size() && f.breaks_[i] <= mid) ? f.values_[i] : 0.0;
        double gv = (j < g.values_.size() && g.breaks_[j] <= mid) ? g.values_[j] : 0.0;
        vals[c] = op(fv, gv);
    }
    return StepFunction(std::move(part), std::move(vals));
}

StepFunction operator+(const StepFunction& f, const StepFunction& g) {
    return StepFunction::combine(f, g, [](double a, double b) { return a + b; });
}

StepFunction operator-(const StepFunction& f, const StepFunction& g) {
    return StepFunction::combine(f, g, [](double a, double b) { return a - b; });
}

StepFunction operator*(const StepFunction& f, const StepFunction& g) {
    return StepFunction::combine(f, g, [](double a, double b) { return a * b; });
}

StepFunction operator*(double s, const StepFunction& f) {
    if (s == 0.0 || f.is_zero()) return {};
    std::vector<double> v = f.values_;
    for (double& x : v) x *= s;
    return StepFunction(f.breaks_, std::move(v));
}

double integrate(const StepFunction& f, BesselParam lam) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.cells(); ++i) s += f.values()[i] * measure(f.cell_lo(i), f.cell_hi(i), lam);
    return s;
}

double lp_norm(const StepFunction& f, double p, BesselParam lam) {
    if (!(p > 0.0)) throw DomainError("lp_norm needs p > 0");
    if (std::isinf(p)) return f.sup_norm();
    double s = 0.0;
    for (std::size_t i = 0; i < f.cells(); ++i)
        s += std::pow(std::abs(f.values()[i]), p) * measure(f.cell_lo(i), f.cell_hi(i), lam);
    return std::pow(s, 1.0 / p);
}

std::vector<double> merge_partitions(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<double> uniform_partition(double lo, double hi, int n) {
    if (n < 1 || !(hi > lo)) throw DomainError("uniform_partition needs n >= 1 and hi > lo");
    std::vector<double> p(n + 1);
    for (int i = 0; i <= n; ++i) p[i] = lo + (hi - lo) * i / n;
    p.back() = hi;
    return p;
}

std::vector<double> refine_partition(const std::vector<double>& base, int n) {
    if (base.size() < 2) return base;
    return merge_partitions(base, uniform_partition(base.front(), base.back(), n));
}

StepFunction sample_midpoint(const std::function<double(double)>& fn, const std::vector<double>& partition) {
    if (partition.size() < 2) return {};
    std::vector<double> v(partition.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(0.5 * (partition[i] + partition[i + 1]));
    return StepFunction(partition, std::move(v));
}

StepFunction sample_average(const std::function<double(double)>& fn, const std::vector<double>& partition,
                            BesselParam lam, int nodes) {
    if (partition.size() < 2) return {};
    const GaussLegendre& rule = GaussLegendre::get(nodes);
    double w = 2.0 * lam.lambda();
    std::vector<double> v(partition.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        double lo = partition[i], hi = partition[i + 1];
        double s = gauss_panel([&](double x) { return fn(x) * std::pow(x, w); }, lo, hi, rule);
        v[i] = s / measure(lo, hi, lam);
    }
    return StepFunction(partition, std::move(v));
}

namespace {

std::string fmt(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::vector<double> parse_list(const std::string& line, const std::string& key) {
    auto colon = line.find(':');
    if (colon == std::string::npos || line.substr(0, colon) != key)
        throw ConfigError("expected line starting with '" + key + ":'");
    std::vector<double> out;
    std::istringstream in(line.substr(colon + 1));
    std::string tok;
    while (in >> tok) {
        double v = 0.0;
        auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
            throw ConfigError("bad number '" + tok + "' in " + key);
        out.push_back(v);
    }
    return out;
}

}  // namespace

std::string to_text(const StepFunction& f) {
    std::string s = "breakpoints:";
    for (double b : f.breakpoints()) s += " " + fmt(b);
    s += "\nvalues:";
    for (double v : f.values()) s += " " + fmt(v);
    s += "\n";
    return s;
}

StepFunction from_text(const std::string& text) {
    std::istringstream in(text);
    std::string l1, l2;
    while (std::getline(in, l1) && l1.find_first_not_of(" \t\r") == std::string::npos) {}
    while (std::getline(in, l2) && l2.find_first_not_of(" \t\r") == std::string::npos) {}
    auto b = parse_list(l1, "breakpoints");
    auto v = parse_list(l2, "values");
    try {
        return StepFunction(std::move(b), std::move(v));
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid step function: ") + e.what());
    }
}

}  // namespace hardy
