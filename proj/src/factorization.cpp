#include "hardy/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "hardy/errors.hpp"
#include "hardy/parallel.hpp"

namespace hardy {

namespace {

// Chebyshev points of the first kind on [a, b] with barycentric weights.
struct Chebyshev {
    std::vector<double> x, w;
    Chebyshev(double a, double b, int n) : x(n), w(n) {
        for (int k = 0; k < n; ++k) {
            double t = (2.0 * k + 1.0) * std::numbers::pi / (2.0 * n);
            x[k] = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(t);
            w[k] = (k % 2 ? -1.0 : 1.0) * std::sin(t);
        }
    }
    // Lagrange basis values at t.
    void basis(double t, double* out) const {
        const int n = static_cast<int>(x.size());
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            if (t == x[k]) {
                std::fill(out, out + n, 0.0);
                out[k] = 1.0;
                return;
            }
            out[k] = w[k] / (t - x[k]);
            sum += out[k];
        }
        for (int k = 0; k < n; ++k) out[k] /= sum;
    }
    double eval(const std::vector<double>& f, double t) const {
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (t == x[k]) return f[k];
            double c = w[k] / (t - x[k]);
            num += c * f[k];
            den += c;
        }
        return num / den;
    }
};

// int_lo^hi fn(x) dm(x) / m((lo, hi)) with a fixed rule.
template <class F>
double cell_average(F&& fn, double lo, double hi, BesselParam lam, const GaussLegendre& rule) {
    const double w2 = 2.0 * lam.lambda();
    double s = gauss_panel([&](double x) { return fn(x) * std::pow(x, w2); }, lo, hi, rule);
    return s / measure(lo, hi, lam);
}

// Two-halves atom on I: +v on the left half, -v mL/mR on the right, sup = m(I)^{-1/p}.
Atom dipole_atom(const Interval& I, double p, BesselParam lam) {
    double lo = I.lo(), hi = I.hi(), c = 0.5 * (lo + hi);
    double mL = measure(lo, c, lam), mR = measure(c, hi, lam);
    double top = std::pow(measure(I, lam), -1.0 / p);
    double ratio = mL / mR;
    double v = top / std::max(1.0, ratio);
    return Atom{I, StepFunction({lo, c, hi}, {v, -v * ratio}), p};
}

double smallest_admissible_M(double K0, double p, double eps) {
    double M = 1.0;
    while (M < 100.0 * K0 || !(std::log2(M) / std::pow(M, 2.0 * p - 1.0) < std::pow(eps, p))) {
        M *= 2.0;
        if (M > 1e300) throw ConfigError("no admissible M for the requested epsilon and p");
    }
    return M;
}

}  // namespace

void ConstantSchedule::validate() const {
    double lower = std::max(1.0 / regime.K1, 1.0 / regime.K2) + 1.0;
    if (!(K0 > lower)) throw ConfigError("schedule: K0 must exceed max(1/K1, 1/K2) + 1");
    if (!(M >= 100.0 * K0)) throw ConfigError("schedule: M must be at least 100 K0");
    if (!(std::log2(M) / std::pow(M, 2.0 * p - 1.0) < std::pow(epsilon, p)))
        throw ConfigError("schedule: log2(M)/M^{2p-1} must be below epsilon^p");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("schedule: epsilon must lie in (0, 1)");
    if (!(q > 1.0 && r > 1.0)) throw ConfigError("schedule: q and r must exceed 1");
    if (std::abs(1.0 / p - 1.0 / q - 1.0 / r) > 1e-12) throw ConfigError("schedule: need 1/p = 1/q + 1/r");
    BesselParam lam(lambda);
    if (!p_range(lam).contains(p)) throw ConfigError("schedule: p outside the admissible range");
}

ConstantSchedule make_schedule(const KernelEvaluator& k, double p, double M, const ScheduleOptions& opt) {
    ConstantSchedule s;
    s.lambda = k.param().lambda();
    s.regime = regime_constants(k.param(), k.spec());
    s.K0 = std::max(1.0 / s.regime.K1, 1.0 / s.regime.K2) + 1.0 + opt.K0_slack;
    s.epsilon = opt.epsilon;
    s.p = p;
    s.q = opt.q > 0.0 ? opt.q : 2.0 * p;
    s.r = opt.r > 0.0 ? opt.r : 1.0 / (1.0 / p - 1.0 / s.q);
    s.M_minimal = smallest_admissible_M(s.K0, p, opt.epsilon);
    s.M = M > 0.0 ? M : s.M_minimal;
    s.validate();
    return s;
}

ConstantSchedule select_schedule(const KernelEvaluator& k, double p, const ScheduleOptions& opt) {
    if (!p_range(k.param()).contains(p)) throw ConfigError("schedule: p outside the admissible range");
    ConstantSchedule s = make_schedule(k, p, 0.0, opt);
    ApproxOptions ao;
    ao.resolution = opt.resolution;
    auto probe = [&](const ConstantSchedule& sc) {
        double worst = 0.0;
        const double M = sc.M;
        for (double x0 : {1.0, 0.5 * M, 2.0 * M, 2.05 * M, 4.0 * M, 16.0 * M}) {
            Atom a = dipole_atom(Interval(x0, 1.0), p, k.param());
            worst = std::max(worst, approximate_atom(a, sc, k, ao).certified_eps);
        }
        return worst;
    };
    s.probe_eps = probe(s);
    if (!opt.calibrate) return s;
    while (s.probe_eps > opt.probe_margin * s.epsilon) {
        if (s.doublings >= opt.max_doublings)
            throw CertificationFailure("schedule: probe atoms never certified below the target epsilon");
        s.M *= 2.0;
        ++s.doublings;
        s.probe_eps = probe(s);
    }
    return s;
}

AtomApproximation approximate_atom(const Atom& a, const ConstantSchedule& s, const KernelEvaluator& k,
                                   const ApproxOptions& opt) {
    const BesselParam lam = k.param();
    if (a.profile.is_zero()) throw HypothesisViolation("approximate_atom: zero atom");
    if (!validate_atom(a, lam).valid()) throw HypothesisViolation("approximate_atom needs a valid p-atom");

    const Interval I = a.support.normalized();
    const double x0 = I.center(), r = I.radius();
    const ApproxCase tag = x0 <= 2.0 * s.M * r ? ApproxCase::a : ApproxCase::b;
    const double y0 = tag == ApproxCase::a ? x0 + 2.0 * s.M * s.K0 * r : x0 - s.M * r / s.K0;
    if (std::abs(x0 - y0) < 4.0 * r) throw HypothesisViolation("approximate_atom: separation |x0 - y0| below 4r");
    const Interval J(y0, r);
    if (tag == ApproxCase::a && !(x0 / J.lo() < s.regime.K1))
        throw HypothesisViolation("approximate_atom: case a point outside the sign regime");
    if (tag == ApproxCase::b && !(J.hi() < x0 && x0 / J.lo() - 1.0 < s.regime.K2))
        throw HypothesisViolation("approximate_atom: case b point outside the lower-bound regime");

    const int n = opt.cheb_nodes;
    const double w2 = 2.0 * lam.lambda(), l = lam.lambda();
    const GaussLegendre& gl = GaussLegendre::get(n);
    std::vector<double> yg(n), wg(n);
    for (int m = 0; m < n; ++m) {
        yg[m] = y0 + r * gl.nodes[m];
        wg[m] = r * gl.weights[m] * std::pow(yg[m], w2);
    }
    double rtg = 0.0;
    for (int m = 0; m < n; ++m) rtg += wg[m] * k.riesz(yg[m], x0).value;

    AtomApproximation out;
    double bound = 0.0;
    if (tag == ApproxCase::a) {
        bound = s.regime.C_K1 * std::log(J.hi() / J.lo());
    } else {
        for (int m = 0; m < n; ++m)
            bound += wg[m] * s.regime.C_K2 * std::pow(yg[m] * x0, -l) / (x0 - yg[m]);
    }
    out.denominator_bound = bound;
    if (!(std::abs(rtg) >= bound * (1.0 - 1e-9)))
        throw DegenerateDenominator("approximate_atom: |R~g(x0)| below its certified lower bound");

    FactorPair& pair = out.pair;
    pair.g_support = J;
    pair.h = (-1.0 / rtg) * a.profile;
    pair.x0 = x0;
    pair.r = r;
    pair.y0 = y0;
    pair.tag = tag;
    pair.rtg_x0 = rtg;
    pair.product_norm = std::pow(measure(J, lam), 1.0 / s.q) * lp_norm(a.profile, s.r, lam) / std::abs(rtg);

    const double plo = a.profile.support_lo(), phi = a.profile.support_hi();
    const GaussLegendre& avg_rule = GaussLegendre::get(6);

    // W1 = a (R~g(x0) - R~g(x)) / R~g(x0) on the atom's cells
    Chebyshev cx(plo, phi, n);
    std::vector<double> delta(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        if (cx.x[i] != x0)
            for (int m = 0; m < n; ++m) acc += wg[m] * k.riesz_diff_second(yg[m], x0, cx.x[i]).value;
        delta[i] = acc;
    }
    std::vector<double> part1 = refine_partition(a.profile.breakpoints(), opt.resolution);
    std::vector<double> v1(part1.size() - 1);
    for (std::size_t c = 0; c < v1.size(); ++c) {
        double lo = part1[c], hi = part1[c + 1];
        double av = a.profile(0.5 * (lo + hi));
        v1[c] = av == 0.0 ? 0.0
                          : av * cell_average([&](double x) { return cx.eval(delta, x); }, lo, hi, lam, avg_rule) / rtg;
    }
    StepFunction W1(part1, v1);

    // W2 = Ra / R~g(x0) on I(y0, r), Ra(x) = int [R(x, y) - R(x, x0)] a(y) dm(y) + R(x, x0) int a
    Chebyshev cy(plo, phi, n);
    std::vector<double> omega(n, 0.0), basis(n);
    const GaussLegendre& wrule = GaussLegendre::get(n + 4);
    for (std::size_t c = 0; c < a.profile.cells(); ++c) {
        double v = a.profile.values()[c];
        if (v == 0.0) continue;
        double lo = a.profile.cell_lo(c), hi = a.profile.cell_hi(c);
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        for (int q = 0; q < wrule.size(); ++q) {
            double y = mid + half * wrule.nodes[q];
            double wy = v * half * wrule.weights[q] * std::pow(y, w2);
            cy.basis(y, basis.data());
            for (int i = 0; i < n; ++i) omega[i] += wy * basis[i];
        }
    }
    const double A0 = integrate(a.profile, lam);
    Chebyshev cj(J.lo(), J.hi(), n);
    std::vector<double> ra(n);
    for (int j = 0; j < n; ++j) {
        double acc = k.riesz(cj.x[j], x0).value * A0;
        for (int i = 0; i < n; ++i)
            if (cy.x[i] != x0) acc += omega[i] * k.riesz_diff_second(cj.x[j], cy.x[i], x0).value;
        ra[j] = acc;
    }
    std::vector<double> part2 = uniform_partition(J.lo(), J.hi(), opt.resolution);
    std::vector<double> v2(part2.size() - 1);
    for (std::size_t c = 0; c < v2.size(); ++c)
        v2[c] = cell_average([&](double x) { return cj.eval(ra, x); }, part2[c], part2[c + 1], lam, avg_rule) / rtg;

    // After sampling, int (W1 + W2) dm equals int a dm up to quadrature error; project
    // that error out so the residual is exactly mean-zero.
    StepFunction W2(part2, v2);
    double imbalance = integrate(W1, lam) + integrate(W2, lam);
    out.cancellation = std::abs(imbalance) / lp_norm(a.profile, 1.0, lam);
    double shift = imbalance / measure(J.lo(), J.hi(), lam);
    for (double& v : v2) v -= shift;
    W2 = StepFunction(part2, v2);

    out.residual = TwoBumpFunction{W1, W2, x0, y0, r, W1.sup_norm(), W2.sup_norm()};
    out.residual_decomposition = decompose_two_bump(out.residual, s.p, lam);
    out.certified_eps = out.residual_decomposition.bound;
    const double mI = measure(I, lam), mJ = measure(J, lam), D = std::abs(x0 - y0);
    out.C1_reference = mJ * std::pow(mI, -1.0 / s.p) / measure(Interval(x0, D), lam);
    out.C2_reference = std::pow(mI, 1.0 - 1.0 / s.p) / measure(Interval(y0, D), lam);
    return out;
}

StepFunction pi_form(const StepFunction& g, const StepFunction& h, const KernelEvaluator& k, int resolution) {
    if (g.is_zero() || h.is_zero()) return {};
    const BesselParam lam = k.param();
    std::vector<double> part = merge_partitions(refine_partition(g.breakpoints(), resolution),
                                                refine_partition(h.breakpoints(), resolution));
    bool overlap = g.support_lo() <= h.support_hi() && h.support_lo() <= g.support_hi();
    if (overlap) {
        // Rh and R~g have logarithmic singularities at the jumps; grade the cells there.
        std::vector<double> extra;
        for (const auto* f : {&g, &h})
            for (double b : f->breakpoints()) {
                auto it = std::lower_bound(part.begin(), part.end(), b);
                double left = it != part.begin() ? b - *std::prev(it) : 0.0;
                double right = (it != part.end() && std::next(it) != part.end()) ? *std::next(it) - b : 0.0;
                for (int j = 1; j <= 12; ++j) {
                    if (left > 0.0) extra.push_back(b - std::ldexp(left, -j));
                    if (right > 0.0) extra.push_back(b + std::ldexp(right, -j));
                }
            }
        std::sort(extra.begin(), extra.end());
        part = merge_partitions(part, extra);
    }
    const GaussLegendre& rule = GaussLegendre::get(4);
    std::vector<double> vals(part.size() - 1);
    for (std::size_t c = 0; c < vals.size(); ++c) {
        vals[c] = cell_average(
            [&](double x) {
                double gx = g(x), hx = h(x), v = 0.0;
                if (gx != 0.0) v += gx * riesz_apply(h, x, k).value;
                if (hx != 0.0) v -= hx * riesz_adjoint_apply(g, x, k).value;
                return v;
            },
            part[c], part[c + 1], lam, rule);
    }
    return StepFunction(part, vals);
}

namespace {

struct PoolItem {
    double coef;
    Atom atom;
};

}  // namespace

FactorizationResult weak_factorize(const AtomicDecomposition& f, const ConstantSchedule& s, int K_max,
                                   const KernelEvaluator& k, const FactorizeOptions& opt) {
    s.validate();
    if (K_max < 0) throw ConfigError("weak_factorize: K_max must be nonnegative");
    if (std::abs(f.p - s.p) > 1e-15) throw ConfigError("weak_factorize: decomposition and schedule use different p");
    const BesselParam lam = k.param();
    const double p = s.p;
    for (const auto& t : f.terms)
        if (!validate_atom(t.atom, lam).valid()) throw HypothesisViolation("weak_factorize: input term is not a p-atom");

    FactorizationResult res;
    res.input = f;
    res.schedule = s;
    std::vector<PoolItem> pool;
    for (const auto& t : f.terms)
        if (t.coefficient != 0.0) pool.push_back({t.coefficient, t.atom});
    auto tally_of = [&](const std::vector<PoolItem>& v) {
        double acc = 0.0;
        for (const auto& it : v) acc += std::pow(std::abs(it.coef), p);
        return acc;
    };
    const double bound0 = std::pow(tally_of(pool), 1.0 / p);
    res.residual_bounds.push_back(bound0);
    int rising = 0;

    for (int level = 1; level <= K_max && !pool.empty(); ++level) {
        const bool last = level == K_max;
        LevelRecord rec;
        std::vector<std::size_t> order(pool.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> mass(pool.size());
        double T = 0.0;
        for (std::size_t i = 0; i < pool.size(); ++i) T += (mass[i] = std::pow(std::abs(pool[i].coef), p));
        std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return mass[i] > mass[j]; });
        std::size_t take = 0;
        double remaining = T;
        while (take < order.size() && take < opt.max_atoms_per_level && remaining > opt.tail_fraction * T) {
            remaining -= mass[order[take]];
            ++take;
        }
        std::vector<char> chosen(pool.size(), 0);
        for (std::size_t i = 0; i < take; ++i) chosen[order[i]] = 1;

        std::vector<PoolItem> next;
        const std::size_t chunk = 2048;
        for (std::size_t start = 0; start < take; start += chunk) {
            std::size_t stop = std::min(take, start + chunk);
            std::vector<AtomApproximation> approx(stop - start);
            parallel_for(stop - start, opt.threads,
                         [&](std::size_t i) { approx[i] = approximate_atom(pool[order[start + i]].atom, s, k, opt.approx); });
            for (std::size_t i = 0; i < approx.size(); ++i) {
                AtomApproximation& ap = approx[i];
                const double c = pool[order[start + i]].coef;
                rec.alphas.push_back(c);
                rec.tally += mass[order[start + i]];
                rec.max_eps = std::max(rec.max_eps, ap.certified_eps);
                rec.max_cancellation = std::max(rec.max_cancellation, ap.cancellation);
                (ap.pair.tag == ApproxCase::a ? rec.case_a : rec.case_b)++;
                if (!opt.keep_pairs) ap.pair.h = StepFunction();
                rec.pairs.push_back(std::move(ap.pair));
                for (auto& t : ap.residual_decomposition.decomposition.terms) {
                    if (last && !opt.keep_final_atoms) t.atom.profile = StepFunction();
                    next.push_back({c * t.coefficient, std::move(t.atom)});
                    ++rec.children;
                }
            }
        }
        rec.processed = take;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (!chosen[i]) {
                rec.carried_tally += mass[i];
                ++rec.carried;
                next.push_back(std::move(pool[i]));
            }
        pool = std::move(next);
        rec.bound = std::pow(tally_of(pool), 1.0 / p);
        res.eC_emp = std::max(res.eC_emp, rec.max_eps);
        double ratio = rec.bound / res.residual_bounds.back();
        res.eC_ratio = std::max(res.eC_ratio, ratio);
        rising = ratio >= 1.0 ? rising + 1 : 0;
        res.residual_bounds.push_back(rec.bound);
        res.coefficient_tallies.push_back(rec.tally);
        res.levels.push_back(std::move(rec));
        if (rising >= 2)
            throw DivergenceDetected("weak_factorize: residual bounds failed to decrease for two consecutive levels",
                                     ratio);
        if (res.eC_emp >= 1.0)
            throw DivergenceDetected("weak_factorize: an atom certified eps >= 1, the iteration cannot contract",
                                     res.eC_emp);
        if (res.residual_bounds.back() < opt.floor * bound0) break;
    }
    res.residual.p = p;
    for (auto& it : pool) res.residual.terms.push_back({it.coef, std::move(it.atom), 0, 0});
    return res;
}

double commutator_pairing(const LipschitzSymbol& b, const FactorPair& pair, const KernelEvaluator& k,
                          int cheb_nodes) {
    const StepFunction& h = pair.h;
    if (h.is_zero()) return 0.0;
    const BesselParam lam = k.param();
    const Interval& J = pair.g_support;
    if (J.lo() < b.domain_lo || J.hi() > b.domain_hi || h.support_lo() < b.domain_lo || h.support_hi() > b.domain_hi)
        throw DomainError("commutator_pairing: symbol grid must cover supp g and supp h");
    if (!(J.hi() <= h.support_lo() || h.support_hi() <= J.lo()))
        throw DomainError("commutator_pairing: supports of g and h must be disjoint");
    const int n = cheb_nodes;
    const double w2 = 2.0 * lam.lambda();
    Chebyshev cx(J.lo(), J.hi(), n), cy(h.support_lo(), h.support_hi(), n);
    const GaussLegendre& rule = GaussLegendre::get(n + 4);
    std::vector<double> basis(n);
    // sum over cells of f1 (x) f2 against the Lagrange basis of `ch`
    auto moments = [&](const Chebyshev& ch, const StepFunction& f1, const StepFunction& f2, std::vector<double>& out) {
        out.assign(n, 0.0);
        std::vector<double> part = merge_partitions(f1.breakpoints(), f2.breakpoints());
        for (std::size_t c = 0; c + 1 < part.size(); ++c) {
            double lo = part[c], hi = part[c + 1];
            double v = f1(0.5 * (lo + hi)) * f2(0.5 * (lo + hi));
            if (v == 0.0) continue;
            double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            for (int q = 0; q < rule.size(); ++q) {
                double y = mid + half * rule.nodes[q];
                double wy = v * half * rule.weights[q] * std::pow(y, w2);
                ch.basis(y, basis.data());
                for (int i = 0; i < n; ++i) out[i] += wy * basis[i];
            }
        }
    };
    StepFunction gJ = StepFunction::indicator(J);
    std::vector<double> B, G, H, BH;
    moments(cx, gJ, b.sample, B);
    moments(cx, gJ, gJ, G);
    moments(cy, h, StepFunction::indicator(h.support_lo(), h.support_hi()), H);
    moments(cy, h, b.sample, BH);
    double total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) total += k.riesz(cx.x[i], cy.x[l]).value * (B[i] * H[l] - G[i] * BH[l]);
    return total;
}

PairingReport pairing_check(const LipschitzSymbol& b, const FactorizationResult& res, const KernelEvaluator& k,
                            int K) {
    const BesselParam lam = k.param();
    PairingReport rep;
    for (const auto& t : res.input.terms) rep.lhs += t.coefficient * integrate(b.sample * t.atom.profile, lam);
    int levels = K < 0 ? static_cast<int>(res.levels.size()) : std::min<int>(K, static_cast<int>(res.levels.size()));
    double acc = 0.0;
    for (int lv = 0; lv < levels; ++lv) {
        const LevelRecord& rec = res.levels[lv];
        if (rec.pairs.size() != rec.alphas.size() ||
            std::any_of(rec.pairs.begin(), rec.pairs.end(), [](const FactorPair& q) { return q.h.is_zero(); }))
            throw ConfigError("pairing_check needs a factorization run with keep_pairs");
        for (std::size_t j = 0; j < rec.pairs.size(); ++j) acc += rec.alphas[j] * commutator_pairing(b, rec.pairs[j], k);
        rep.rhs.push_back(acc);
        rep.discrepancy.push_back(std::abs(rep.lhs - acc) / std::abs(rep.lhs));
    }
    return rep;
}

}  // namespace hardy
