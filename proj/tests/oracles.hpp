#pragma once

// Reference computations used only by the tests. They deliberately avoid the library's
// quadrature so that agreement is evidence rather than self-consistency.

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>

namespace oracle {

// Composite 5-point Gauss-Legendre with hard-coded nodes.
inline double gl5(const std::function<double(double)>& f, double a, double b, int panels) {
    static const double x[5] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                -0.9061798459386640};
    static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665, 0.2369268850561891,
                                0.2369268850561891};
    double h = (b - a) / panels, s = 0.0;
    for (int i = 0; i < panels; ++i) {
        double c = a + (i + 0.5) * h;
        for (int k = 0; k < 5; ++k) s += w[k] * f(c + 0.5 * h * x[k]);
    }
    return 0.5 * h * s;
}

// Same rule on panels that are uniform in log y; suited to kernels decaying like a power.
inline double gl5_log(const std::function<double(double)>& f, double a, double b, int panels) {
    return gl5([&](double t) { double y = std::exp(t); return f(y) * y; }, std::log(a), std::log(b), panels);
}

// Trapezoid rule with n panels.
inline double trapezoid(const std::function<double(double)>& f, double a, double b, long n) {
    double h = (b - a) / n, s = 0.5 * (f(a) + f(b));
    for (long i = 1; i < n; ++i) s += f(a + i * h);
    return s * h;
}

// Riesz kernel by brute force in theta (bounded integrand needs lambda >= 1/2).
inline double riesz_theta(double x, double y, double lam, long n) {
    auto g = [&](double th) {
        double c = std::cos(th), s = std::sin(th);
        return (x - y * c) * std::pow(s, 2 * lam - 1) / std::pow(x * x + y * y - 2 * x * y * c, lam + 1);
    };
    return -(2 * lam / std::numbers::pi) * trapezoid(g, 0.0, std::numbers::pi, n);
}

inline double poisson_theta(double t, double x, double y, double lam, long n) {
    auto g = [&](double th) {
        return std::pow(std::sin(th), 2 * lam - 1) / std::pow(x * x + y * y + t * t - 2 * x * y * std::cos(th), lam + 1);
    };
    return (2 * lam * t / std::numbers::pi) * trapezoid(g, 0.0, std::numbers::pi, n);
}

// For lambda = 1 the theta integral reduces, with u = cos(theta), to a rational integral:
// R(x, y) = -(2/pi) int_{-1}^{1} (x - y u) / (x^2 + y^2 - 2 x y u)^2 du.
inline double riesz_lambda1_closed(double x, double y) {
    // antiderivative of (x - y u)/(A - B u)^2 with A = x^2 + y^2, B = 2xy
    double A = x * x + y * y, B = 2 * x * y;
    auto F = [&](double u) {
        double d = A - B * u;
        // (x - y u) = (y/B) d + (x - y A / B)
        return (y / B) * (-std::log(d) / B) + (x - y * A / B) / (B * d);
    };
    return -(2 / std::numbers::pi) * (F(1.0) - F(-1.0));
}

inline double measure(double lo, double hi, double lam) {
    double e = 2 * lam + 1;
    return (std::pow(hi, e) - std::pow(lo, e)) / e;
}

struct Rng {
    std::mt19937_64 g;
    explicit Rng(std::uint64_t seed) : g(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(g); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(g); }
};

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace oracle
