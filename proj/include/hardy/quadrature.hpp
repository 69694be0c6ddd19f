#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "hardy/errors.hpp"

namespace hardy {

struct QuadratureSpec {
    double rel_tol = 1e-10;
    int max_subdivisions = 60;
    int nodes_per_panel = 16;

    void validate() const;
    QuadratureSpec with_nodes(int n) const {
        QuadratureSpec s = *this;
        s.nodes_per_panel = n;
        return s;
    }
};

struct Estimate {
    double value = 0.0;
    double error = 0.0;

    Estimate& operator+=(const Estimate& o) {
        value += o.value;
        error += o.error;
        return *this;
    }
};

// Gauss-Legendre rule on [-1, 1]; nodes ascending.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int n);
    int size() const { return static_cast<int>(nodes.size()); }
    // Cached rule, safe for concurrent use.
    static const GaussLegendre& get(int n);
};

template <class F>
double gauss_panel(F&& f, double a, double b, const GaussLegendre& rule) {
    double c = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
    for (int i = 0; i < rule.size(); ++i) s += rule.weights[i] * f(c + h * rule.nodes[i]);
    return s * h;
}

namespace detail {

struct Panel {
    double a, b, whole, halves, abs_sum;
    double err() const { return std::abs(whole - halves); }
    bool operator<(const Panel& o) const { return err() < o.err(); }
};

template <class F>
Panel make_panel(F& f, double a, double b, const GaussLegendre& rule) {
    double m = 0.5 * (a + b);
    double cm = 0.5 * (a + b), h = 0.5 * (b - a);
    double whole = 0.0, absw = 0.0;
    for (int i = 0; i < rule.size(); ++i) {
        double v = f(cm + h * rule.nodes[i]);
        whole += rule.weights[i] * v;
        absw += rule.weights[i] * std::abs(v);
    }
    double left = gauss_panel(f, a, m, rule), right = gauss_panel(f, m, b, rule);
    return {a, b, whole * h, left + right, absw * h};
}

}  // namespace detail

// Adaptive bisection over the panels delimited by `breaks` (ascending). Each panel is
// integrated with one n-point rule and with two half-panel rules; the panel with the
// largest disagreement is split until the summed disagreement meets rel_tol. The
// tolerance is taken relative to the integral of |f| when the signed integral cancels,
// and never below `abs_floor`.
template <class F>
Estimate integrate_adaptive(F&& f, std::span<const double> breaks, const QuadratureSpec& spec,
                            const char* label = "integral", double abs_floor = 0.0) {
    const GaussLegendre& rule = GaussLegendre::get(spec.nodes_per_panel);
    std::priority_queue<detail::Panel> heap;
    double total = 0.0, err = 0.0, mass = 0.0;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (!(breaks[i + 1] > breaks[i])) continue;
        detail::Panel p = detail::make_panel(f, breaks[i], breaks[i + 1], rule);
        total += p.halves;
        err += p.err();
        mass += p.abs_sum;
        heap.push(p);
    }
    auto tolerance = [&] {
        return std::max({spec.rel_tol * std::abs(total),
                         std::max(spec.rel_tol * 1e-3, 64 * std::numeric_limits<double>::epsilon()) * mass, abs_floor});
    };
    int splits = 0;
    while (err > tolerance() && !heap.empty()) {
        if (splits >= spec.max_subdivisions)
            throw QuadratureError(std::string(label) + ": subdivision limit reached", total, err);
        detail::Panel p = heap.top();
        heap.pop();
        double m = 0.5 * (p.a + p.b);
        detail::Panel l = detail::make_panel(f, p.a, m, rule);
        detail::Panel r = detail::make_panel(f, m, p.b, rule);
        total += l.halves + r.halves - p.halves;
        err += l.err() + r.err() - p.err();
        mass += l.abs_sum + r.abs_sum - p.abs_sum;
        heap.push(l);
        heap.push(r);
        ++splits;
    }
    return {total, err};
}

template <class F>
Estimate integrate_adaptive(F&& f, double a, double b, const QuadratureSpec& spec,
                            const char* label = "integral") {
    double br[2] = {a, b};
    return integrate_adaptive(f, std::span<const double>(br, 2), spec, label);
}

// Breakpoints from a to b refined geometrically toward `a`: the first panel has
// width `first` and widths double until the remainder is covered.
std::vector<double> graded_toward_lo(double a, double b, double first);
// Same, refined toward b.
std::vector<double> graded_toward_hi(double a, double b, double first);

}  // namespace hardy
