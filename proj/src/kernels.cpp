#include "hardy/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <tuple>

#include <boost/math/special_functions/beta.hpp>

#include "hardy/errors.hpp"

namespace hardy {

namespace {

constexpr double kPi = std::numbers::pi;

int small_integer(double v) {
    double r = std::round(v);
    return (std::abs(v - r) < 1e-14 && r >= 0.0 && r <= 6.0) ? static_cast<int>(r) : -1;
}

}  // namespace


namespace {

// Nodes of the dyadic theta panels [0, 2^j], [2^j, 2^{j+1}] (j <= 0) and [2, pi], each
// with the whole-panel rule followed by the two half-panel rules. Per node we keep
// sin^2(theta/2) and weight * sin(theta)^{2 lambda - 1}.
struct ThetaTable {
    static constexpr int kMinExp = -48;
    int n = 0;
    struct Nodes {
        std::vector<double> s2, w;
    };
    std::vector<Nodes> head;  // [0, 2^j], j = kMinExp..1
    std::vector<Nodes> mid;   // [2^j, 2^{j+1}], j = kMinExp..0
    Nodes tail;               // [2, pi]

    ThetaTable(double lambda, int nodes) : n(nodes) {
        const GaussLegendre& rule = GaussLegendre::get(nodes);
        auto build = [&](double a, double b) {
            Nodes out;
            auto add = [&](double lo, double hi) {
                double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
                for (int i = 0; i < rule.size(); ++i) {
                    double th = c + h * rule.nodes[i], s = std::sin(0.5 * th);
                    out.s2.push_back(s * s);
                    out.w.push_back(rule.weights[i] * h * std::pow(std::sin(th), 2.0 * lambda - 1.0));
                }
            };
            add(a, b);
            add(a, 0.5 * (a + b));
            add(0.5 * (a + b), b);
            return out;
        };
        for (int j = kMinExp; j <= 1; ++j) head.push_back(build(0.0, std::ldexp(1.0, j)));
        for (int j = kMinExp; j <= 0; ++j) mid.push_back(build(std::ldexp(1.0, j), std::ldexp(1.0, j + 1)));
        tail = build(2.0, kPi);
    }
};

const ThetaTable& theta_table(double lambda, int nodes) {
    static std::mutex mu;
    static std::map<std::pair<double, int>, std::unique_ptr<ThetaTable>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{lambda, nodes}];
    if (!slot) slot = std::make_unique<ThetaTable>(lambda, nodes);
    return *slot;
}

}  // namespace

KernelEvaluator::KernelEvaluator(BesselParam lam, QuadratureSpec spec)
    : lam_(lam), spec_(spec), sine_mass_(std::beta(lam.lambda(), 0.5)) {
    spec_.validate();
    sine_mode_ = small_integer(2.0 * lam.lambda() - 1.0);
    den_mode_ = small_integer(2.0 * (lam.lambda() + 1.0));
    if (lam.lambda() >= 0.5) table_ = &theta_table(lam.lambda(), spec_.nodes_per_panel);
}

Estimate KernelEvaluator::theta_integral(const Point* pts, const double* coef, int npts, bool poisson) const {
    const double lam = lam_.lambda();
    const double a = 2.0 * lam - 1.0, e = lam + 1.0;
    auto sin_pow = [&](double s) {
        switch (sine_mode_) {
            case 0: return 1.0;
            case 1: return s;
            case 2: return s * s;
            case 3: return s * s * s;
            default: return std::pow(s, a);
        }
    };
    auto den_pow = [&](double D) {
        switch (den_mode_) {
            case 3: return D * std::sqrt(D);
            case 4: return D * D;
            case 5: return D * D * std::sqrt(D);
            case 6: return D * D * D;
            default: return std::pow(D, e);
        }
    };
    // s2 = sin^2(theta/2), st = sin(theta)
    auto core = [&](double s2, double st) {
        double acc = 0.0;
        for (int k = 0; k < npts; ++k) {
            const Point& q = pts[k];
            double den = q.delta * q.delta + 4.0 * q.x * q.y * s2 + q.t2;
            double num = poisson ? 1.0 : q.delta + 2.0 * q.y * s2;
            acc += coef[k] * num / den_pow(den);
        }
        return acc * sin_pow(st);
    };

    // A difference of kernels loses the digits the terms share; rounding in the terms
    // sets the attainable absolute accuracy.
    auto term_mass = [&](double s2, double st) {
        double acc = 0.0;
        for (int k = 0; k < npts; ++k) {
            const Point& q = pts[k];
            double den = q.delta * q.delta + 4.0 * q.x * q.y * s2 + q.t2;
            double num = poisson ? 1.0 : q.delta + 2.0 * q.y * s2;
            acc += std::abs(coef[k] * num / den_pow(den));
        }
        return acc * sin_pow(st);
    };
    const double noise = 64 * std::numeric_limits<double>::epsilon();

    double d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < npts; ++k)
        d = std::min(d, std::sqrt(pts[k].delta * pts[k].delta + pts[k].t2) / std::sqrt(pts[k].x * pts[k].y));

    if (table_) {
        const ThetaTable& tab = *static_cast<const ThetaTable*>(table_);
        auto density = [&](double s2) {
            double acc = 0.0;
            for (int k = 0; k < npts; ++k) {
                const Point& q = pts[k];
                double den = q.delta * q.delta + 4.0 * q.x * q.y * s2 + q.t2;
                double num = poisson ? 1.0 : q.delta + 2.0 * q.y * s2;
                acc += coef[k] * num / den_pow(den);
            }
            return acc;
        };
        int j0 = std::min(1, static_cast<int>(std::floor(std::log2(d))));
        if (j0 >= ThetaTable::kMinExp) {
            double total = 0.0, err = 0.0, mass = 0.0, terms = 0.0;
            auto run = [&](const ThetaTable::Nodes& nd) {
                const int n = tab.n;
                double whole = 0.0, halves = 0.0;
                for (int i = 0; i < n; ++i) {
                    double v = density(nd.s2[i]) * nd.w[i];
                    whole += v;
                    mass += std::abs(v);
                    if (npts > 1) terms += term_mass(nd.s2[i], 1.0) * std::abs(nd.w[i]);
                }
                for (int i = n; i < 3 * n; ++i) halves += density(nd.s2[i]) * nd.w[i];
                total += halves;
                err += std::abs(whole - halves);
            };
            run(tab.head[j0 - ThetaTable::kMinExp]);
            for (int j = j0; j <= 0; ++j) run(tab.mid[j - ThetaTable::kMinExp]);
            run(tab.tail);
            double tol = std::max(spec_.rel_tol * std::abs(total),
                                  std::max(spec_.rel_tol * 1e-3, noise) * mass);
            if (err <= std::max(tol, noise * terms)) return {total, err};
        }
    }
    std::vector<double> br = d < kPi / 4 ? graded_toward_lo(0.0, kPi, d) : std::vector<double>{0.0, kPi / 2, kPi};

    auto floor_of = [&](auto&& g, const std::vector<double>& b) {
        if (npts == 1) return 0.0;
        const GaussLegendre& rule = GaussLegendre::get(spec_.nodes_per_panel);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < b.size(); ++i) acc += gauss_panel(g, b[i], b[i + 1], rule);
        return noise * acc;
    };

    Estimate est;
    if (lam >= 0.5) {
        auto f = [&](double th) {
            double h = std::sin(0.5 * th);
            return core(h * h, std::sin(th));
        };
        auto fm = [&](double th) {
            double h = std::sin(0.5 * th);
            return term_mass(h * h, std::sin(th));
        };
        est = integrate_adaptive(f, br, spec_, "theta integral", floor_of(fm, br));
    } else {
        // theta = u^beta near 0 and pi - u^beta near pi cancel the endpoint power.
        const double beta = 1.0 / (2.0 * lam);
        std::vector<double> left;
        for (double t : br) {
            if (t >= kPi / 2) break;
            left.push_back(std::pow(t, 1.0 / beta));
        }
        left.push_back(std::pow(kPi / 2, 1.0 / beta));
        std::vector<double> right{0.0, left.back()};
        auto jac = [&](double u) { return beta * std::pow(u, beta - 1.0); };
        auto fl = [&](double u) {
            double phi = std::pow(u, beta), h = std::sin(0.5 * phi);
            return core(h * h, std::sin(phi)) * jac(u);
        };
        auto fr = [&](double u) {
            double phi = std::pow(u, beta), c = std::cos(0.5 * phi);
            return core(c * c, std::sin(phi)) * jac(u);
        };
        auto fml = [&](double u) {
            double phi = std::pow(u, beta), h = std::sin(0.5 * phi);
            return term_mass(h * h, std::sin(phi)) * jac(u);
        };
        auto fmr = [&](double u) {
            double phi = std::pow(u, beta), c = std::cos(0.5 * phi);
            return term_mass(c * c, std::sin(phi)) * jac(u);
        };
        est = integrate_adaptive(fl, left, spec_, "theta integral", floor_of(fml, left));
        est += integrate_adaptive(fr, right, spec_, "theta integral", floor_of(fmr, right));
    }
    return est;
}

Estimate KernelEvaluator::poisson(double t, double x, double y) const {
    if (!(t > 0.0) || !(x > 0.0) || !(y > 0.0)) throw DomainError("poisson kernel needs t, x, y > 0");
    Point q{x, y, x - y, t * t};
    double c = 1.0;
    Estimate e = theta_integral(&q, &c, 1, true);
    double pre = 2.0 * lam_.lambda() * t / kPi;
    return {pre * e.value, pre * e.error};
}

Estimate KernelEvaluator::conjugate(double t, double x, double y) const {
    if (!(t >= 0.0) || !(x > 0.0) || !(y > 0.0)) throw DomainError("conjugate kernel needs t >= 0, x, y > 0");
    if (t == 0.0) return riesz(x, y);
    Point q{x, y, x - y, t * t};
    double c = 1.0;
    Estimate e = theta_integral(&q, &c, 1, false);
    double pre = -2.0 * lam_.lambda() / kPi;
    return {pre * e.value, std::abs(pre) * e.error};
}

namespace {

void check_off_diagonal(double x, double y) {
    if (!(x > 0.0) || !(y > 0.0)) throw DomainError("riesz kernel needs x, y > 0");
    if (x == y) throw DomainError("riesz kernel is singular on the diagonal x = y");
    if (std::abs(x - y) < 1e-12 * std::max(x, y))
        throw QuadratureError("riesz kernel: |x - y|/x below 1e-12, theta quadrature cannot resolve the peak",
                              std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity());
}

}  // namespace

Estimate KernelEvaluator::riesz(double x, double y) const {
    check_off_diagonal(x, y);
    Point q{x, y, x - y, 0.0};
    double c = 1.0;
    Estimate e = theta_integral(&q, &c, 1, false);
    double pre = -2.0 * lam_.lambda() / kPi;
    return {pre * e.value, std::abs(pre) * e.error};
}

Estimate KernelEvaluator::riesz_diff_second(double x, double y1, double y2) const {
    check_off_diagonal(x, y1);
    check_off_diagonal(x, y2);
    if (y1 == y2) return {0.0, 0.0};
    Point q[2] = {{x, y1, x - y1, 0.0}, {x, y2, x - y2, 0.0}};
    double c[2] = {1.0, -1.0};
    Estimate e = theta_integral(q, c, 2, false);
    double pre = -2.0 * lam_.lambda() / kPi;
    return {pre * e.value, std::abs(pre) * e.error};
}

Estimate KernelEvaluator::riesz_diff_first(double x1, double x2, double y) const {
    check_off_diagonal(x1, y);
    check_off_diagonal(x2, y);
    if (x1 == x2) return {0.0, 0.0};
    Point q[2] = {{x1, y, x1 - y, 0.0}, {x2, y, x2 - y, 0.0}};
    double c[2] = {1.0, -1.0};
    Estimate e = theta_integral(q, c, 2, false);
    double pre = -2.0 * lam_.lambda() / kPi;
    return {pre * e.value, std::abs(pre) * e.error};
}

Estimate poisson_kernel(double t, double x, double y, BesselParam lam, const QuadratureSpec& spec) {
    return KernelEvaluator(lam, spec).poisson(t, x, y);
}

Estimate conjugate_kernel(double t, double x, double y, BesselParam lam, const QuadratureSpec& spec) {
    return KernelEvaluator(lam, spec).conjugate(t, x, y);
}

double riesz_kernel(double x, double y, BesselParam lam, const QuadratureSpec& spec) {
    return KernelEvaluator(lam, spec).riesz(x, y).value;
}

Estimate riesz_kernel_estimate(double x, double y, BesselParam lam, const QuadratureSpec& spec) {
    return KernelEvaluator(lam, spec).riesz(x, y);
}

double size_ratio(double x, double y, BesselParam lam, const QuadratureSpec& spec) {
    double R = riesz_kernel(x, y, lam, spec);
    return std::abs(R) * measure(Interval(x, std::abs(x - y)), lam);
}

double smoothness_ratio(double y, double x0, double x, BesselParam lam, const QuadratureSpec& spec) {
    if (!(std::abs(x0 - x) < 0.5 * std::abs(x0 - y)))
        throw HypothesisViolation("smoothness_ratio needs |x0 - x| < |x0 - y| / 2");
    if (x == x0) return 0.0;
    double diff = std::abs(KernelEvaluator(lam, spec).riesz_diff_second(y, x0, x).value);
    double bracket = (std::abs(x0 - x) / std::abs(x0 - y)) / measure(Interval(x0, std::abs(x0 - y)), lam);
    return diff / bracket;
}

KernelRegimeConstants estimate_regime_constants(BesselParam lam, const QuadratureSpec& spec,
                                                const RegimeSearch& search) {
    KernelEvaluator k(lam, spec);
    const int N = search.grid_points;
    const double anchor = 2.0 * lam.lambda() / kPi * k.sine_mass();  // |R(1, 0+)|
    const double c1 = search.margin * anchor, c2 = search.margin / kPi;
    const double l = lam.lambda();

    auto grid1 = [&](double K, double* worst) {
        double inf = anchor;
        for (int i = 1; i <= N; ++i) {
            double R = k.riesz(1.0, K * i / N).value;
            if (!(R <= -c1)) return false;
            inf = std::min(inf, -R);
        }
        if (worst) *worst = inf;
        return true;
    };
    auto normalized = [&](double y) { return k.riesz(1.0, y).value * std::pow(y, l) * (y - 1.0); };
    auto grid2 = [&](double K, double* worst) {
        double inf = std::numeric_limits<double>::infinity();
        for (int i = 1; i <= N; ++i) {
            double v = normalized(1.0 + K * i / N);
            if (!(v >= c2)) return false;
            inf = std::min(inf, v);
        }
        if (worst) *worst = inf;
        return true;
    };
    auto largest = [&](auto&& pass, double cap) {
        if (pass(cap, nullptr)) return cap;
        double lo = 0.0, hi = cap;
        while (hi - lo > search.bisection_tol) {
            double mid = 0.5 * (lo + hi);
            (pass(mid, nullptr) ? lo : hi) = mid;
        }
        return lo;
    };

    KernelRegimeConstants out;
    out.lambda = l;
    out.grid_points = N;
    out.K1 = largest(grid1, search.K1_cap);
    out.K2 = largest(grid2, search.K2_cap);
    if (!(out.K1 > 0.0) || !(out.K1 < 1.0) || !grid1(out.K1, &out.C_K1))
        throw CertificationFailure("no K1 in (0,1) passes the sign certificate; check the quadrature settings");
    if (!(out.K2 > 0.0) || !(out.K2 < 0.5) || !grid2(out.K2, &out.C_K2))
        throw CertificationFailure("no K2 in (0,1/2) passes the lower-bound certificate; check the quadrature settings");
    return out;
}

const KernelRegimeConstants& regime_constants(BesselParam lam, const QuadratureSpec& spec) {
    static std::mutex mu;
    static std::map<std::tuple<double, double, int, int>, std::unique_ptr<KernelRegimeConstants>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{lam.lambda(), spec.rel_tol, spec.max_subdivisions, spec.nodes_per_panel}];
    if (!slot) slot = std::make_unique<KernelRegimeConstants>(estimate_regime_constants(lam, spec));
    return *slot;
}

double hankel_normalization(BesselParam lam) {
    return std::tgamma(lam.lambda() + 0.5) / (std::tgamma(lam.lambda()) * std::sqrt(kPi));
}

double hankel_translate(const StepFunction& g, double x, double y, BesselParam lam) {
    if (!(x > 0.0) || !(y > 0.0)) throw DomainError("hankel_translate needs x, y > 0");
    const double l = lam.lambda();
    const double dxy = std::abs(x - y), sxy = x + y;
    // Fraction of the normalized sine measure on theta < theta(b), where b is the
    // distance sqrt(x^2 + y^2 - 2xy cos theta); sin^2(theta/2) = (b^2 - (x-y)^2)/(4xy).
    auto F = [&](double b) {
        if (b <= dxy) return 0.0;
        if (b >= sxy) return 1.0;
        double T = (b - dxy) * (b + dxy) / (4.0 * x * y);
        return boost::math::ibeta(l, l, std::clamp(T, 0.0, 1.0));
    };
    double s = 0.0;
    for (std::size_t i = 0; i < g.cells(); ++i) {
        double lo = g.cell_lo(i), hi = g.cell_hi(i);
        if (hi <= dxy || lo >= sxy) continue;
        s += g.values()[i] * (F(hi) - F(lo));
    }
    return s;
}

Estimate hankel_sharp(const StepFunction& f, const StepFunction& g, double x, BesselParam lam,
                      const QuadratureSpec& spec) {
    if (f.is_zero() || g.is_zero()) return {};
    std::vector<double> br = f.breakpoints();
    for (double b : g.breakpoints())
        for (double y : {b - x, x - b, x + b})
            if (y > f.support_lo() && y < f.support_hi()) br.push_back(y);
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    const double w = 2.0 * lam.lambda();
    auto integrand = [&](double y) { return f(y) * hankel_translate(g, x, y, lam) * std::pow(y, w); };
    return integrate_adaptive(integrand, br, spec, "hankel sharp");
}

Estimate KernelCache::riesz(double x, double y) const {
    double ratio = y / x;
    std::uint64_t key = std::bit_cast<std::uint64_t>(ratio);
    double scale = std::pow(x, -k_.param().dim());
    {
        std::shared_lock lock(mu_);
        auto it = memo_.find(key);
        if (it != memo_.end()) return {it->second.value * scale, it->second.error * scale};
    }
    Estimate e = k_.riesz(1.0, ratio);
    {
        std::unique_lock lock(mu_);
        memo_.emplace(key, e);
    }
    return {e.value * scale, e.error * scale};
}

std::size_t KernelCache::size() const {
    std::shared_lock lock(mu_);
    return memo_.size();
}

}  // namespace hardy
