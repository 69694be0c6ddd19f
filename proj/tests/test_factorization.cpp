#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "hardy/errors.hpp"
#include "hardy/experiments.hpp"
#include "hardy/factorization.hpp"
#include "oracles.hpp"

using namespace hardy;

namespace {

Atom halves_atom(const Interval& I, double p, BesselParam lam) {
    double c = I.center(), top = std::pow(measure(I, lam), -1 / p);
    double s = measure(I.lo(), c, lam) / measure(c, I.hi(), lam);
    return Atom{I, StepFunction({I.lo(), c, I.hi()}, {top, -top * s}), p};
}

AtomicDecomposition battery_decomposition(const Battery& b, double p) {
    AtomicDecomposition f{p, {}};
    oracle::Rng rng(99);
    for (const auto& a : b.atoms) f.terms.push_back({rng.uniform(0.2, 1.0) * (rng.uniform(0, 1) < 0.5 ? -1 : 1), a.atom, 0, 0});
    return f;
}

}  // namespace

TEST_SUITE("factorization") {

TEST_CASE("schedule constraints") {
    for (double l : {0.5, 1.0, 2.0}) {
        KernelEvaluator k{BesselParam(l)};
        ConstantSchedule s = make_schedule(k, 0.9, 0.0);
        CHECK(s.K0 > std::max(1 / s.regime.K1, 1 / s.regime.K2) + 1);
        CHECK(s.M >= 100 * s.K0);
        CHECK(std::log2(s.M) / std::pow(s.M, 2 * s.p - 1) < std::pow(s.epsilon, s.p));
        CHECK(std::exp2(std::round(std::log2(s.M))) == s.M);
        // the previous power of two fails one of the constraints
        double half = s.M / 2;
        CHECK((half < 100 * s.K0 || std::log2(half) / std::pow(half, 2 * s.p - 1) >= std::pow(s.epsilon, s.p)));
        CHECK(oracle::rel(1 / s.p, 1 / s.q + 1 / s.r) < 1e-14);

        ConstantSchedule c = select_schedule(k, 0.9);
        CHECK(c.M == c.M_minimal * std::exp2(c.doublings));
        CHECK(c.probe_eps <= 0.5 * c.epsilon);
        CHECK_NOTHROW(c.validate());

        auto broken = [&](auto edit) {
            ConstantSchedule t = s;
            edit(t);
            CHECK_THROWS_AS(t.validate(), ConfigError);
        };
        broken([](ConstantSchedule& t) { t.M = 128; });
        broken([](ConstantSchedule& t) { t.K0 = 1.0; });
        broken([](ConstantSchedule& t) { t.epsilon = 1.5; });
        broken([](ConstantSchedule& t) { t.q = 1.5; });
        broken([](ConstantSchedule& t) { t.p = 0.5; });
    }
    CHECK_THROWS_AS(select_schedule(KernelEvaluator{BesselParam(1.0)}, 0.6), ConfigError);
}

TEST_CASE("case split") {
    BesselParam lam(1.0);
    KernelEvaluator k{lam};
    ConstantSchedule s = make_schedule(k, 0.9, 0.0);
    s.M = 128;  // below 100 K0, but the case arithmetic does not depend on that
    AtomApproximation a = approximate_atom(halves_atom(Interval(1.0, 0.25), 0.9, lam), s, k);
    CHECK(a.pair.tag == ApproxCase::a);
    CHECK(a.pair.y0 == doctest::Approx(1 + 64 * s.K0).epsilon(1e-15));
    AtomApproximation b = approximate_atom(halves_atom(Interval(1e4, 1.0), 0.9, lam), s, k);
    CHECK(b.pair.tag == ApproxCase::b);
    CHECK(b.pair.y0 == doctest::Approx(1e4 - 128 / s.K0).epsilon(1e-15));
    CHECK(a.pair.g_support.center() == a.pair.y0);
    CHECK(a.pair.g_support.radius() == 0.25);
}

TEST_CASE("battery pairs: certificates, cancellation, disjointness") {
    for (double l : {0.5, 1.0, 2.0}) {
        BesselParam lam(l);
        KernelEvaluator k{lam};
        double p = 0.95;
        ConstantSchedule s = select_schedule(k, p);
        Battery bat = battery_generate(5, l, p, s.M, 10, 0);
        double prod = 0.0, c1 = 0.0;
        for (const auto& ba : bat.atoms) {
            AtomApproximation ap = approximate_atom(ba.atom, s, k);
            const FactorPair& q = ap.pair;
            CHECK(ap.certified_eps < s.epsilon);
            double sep = std::abs(q.x0 - q.y0);
            CHECK(sep == doctest::Approx(q.tag == ApproxCase::a ? 2 * s.M * s.K0 * q.r : s.M * q.r / s.K0).epsilon(1e-14));
            CHECK(sep >= 100 * q.r);
            double gap = std::max(q.g_support.lo() - q.h.support_hi(), q.h.support_lo() - q.g_support.hi());
            CHECK(gap >= (sep - 2 * q.r) * (1 - 1e-12));
            StepFunction pi = pi_form(q.g(), q.h, k);
            double l1 = lp_norm(ba.atom.profile, 1.0, lam);
            CHECK(std::abs(integrate(ba.atom.profile - pi, lam)) <= 1e-7 * l1);
            CHECK(std::abs(integrate(pi, lam)) <= 1e-7 * lp_norm(pi, 1.0, lam));
            // the sampled bumps carry no mass once the mean is projected out
            double w = std::abs(integrate(ap.residual.sum(), lam));
            CHECK(w <= 1e-12 * l1);
            prod = std::max(prod, q.product_norm / std::pow(s.M, 2 * l / s.q + 1));
            c1 = std::max(c1, ap.residual.C1 / ap.C1_reference);
        }
        MESSAGE("lambda " << l << ": product_norm / M^{2 lambda/q + 1} <= " << prod << ", C1 / reference <= " << c1);
        CHECK(std::isfinite(prod));
        CHECK(std::isfinite(c1));
    }
}

TEST_CASE("Pi form: bilinearity and symmetric cancellation") {
    BesselParam lam(1.0);
    KernelEvaluator k{lam};
    StepFunction g = StepFunction::indicator(Interval(40.0, 0.5));
    std::vector<double> br{0.5, 0.8, 1.1, 1.5};
    StepFunction h1(br, {1.0, -0.3, 0.7}), h2(br, {-0.2, 0.9, 0.5});
    StepFunction lhs = pi_form(g, h1 + 2.0 * h2, k), rhs = pi_form(g, h1, k) + 2.0 * pi_form(g, h2, k);
    double scale = lhs.sup_norm();
    for (double x : lhs.breakpoints()) CHECK(std::abs(lhs(x) - rhs(x)) <= 1e-9 * scale);
    StepFunction lhs2 = pi_form(3.0 * g, h1, k), rhs2 = 3.0 * pi_form(g, h1, k);
    for (double x : lhs2.breakpoints()) CHECK(std::abs(lhs2(x) - rhs2(x)) <= 1e-9 * lhs2.sup_norm());

    // Pi(g, g) = g (Rg - R~g) integrates to zero by the swap symmetry of the double integral
    StepFunction gg = StepFunction::indicator(1.0, 2.0);
    StepFunction self = pi_form(gg, gg, k);
    CHECK(std::abs(integrate(self, lam)) <= 1e-6 * lp_norm(self, 1.0, lam));
}

TEST_CASE("single atom, one level") {
    for (double l : {0.5, 1.0, 2.0}) {
        BesselParam lam(l);
        KernelEvaluator k{lam};
        ConstantSchedule s = select_schedule(k, 0.9);
        AtomicDecomposition f{0.9, {{0.7, halves_atom(Interval(3.0, 1.0), 0.9, lam), 0, 0}}};
        FactorizationResult res = weak_factorize(f, s, 1, k);
        REQUIRE(res.levels.size() == 1);
        CHECK(res.levels[0].alphas.size() == 1);
        CHECK(res.levels[0].pairs.size() == 1);
        CHECK(res.residual_bounds[0] == doctest::Approx(0.7));
        CHECK(res.residual_bounds[1] < s.epsilon * 0.7);
    }
}

TEST_CASE("weak factorization: decay, tally and determinism") {
    BesselParam lam(1.0);
    KernelEvaluator k{lam};
    double p = 0.9;
    ConstantSchedule s = select_schedule(k, p);
    AtomicDecomposition f = battery_decomposition(battery_generate(3, 1.0, p, s.M, 5, 0), p);
    FactorizeOptions o;
    FactorizationResult res = weak_factorize(f, s, 3, k, o);
    REQUIRE(res.residual_bounds.size() == 4);
    CHECK(res.eC_emp < 1);
    for (std::size_t i = 1; i < res.residual_bounds.size(); ++i)
        CHECK(res.residual_bounds[i] <= res.eC_emp * res.residual_bounds[i - 1] * (1 + 1e-12));
    for (const auto& L : res.levels) CHECK(L.max_eps < s.epsilon);
    // sum over levels of sum_j |alpha_j^k|^p against bound[0]^p / (1 - (eps C)^p)
    double total = 0.0;
    for (double t : res.coefficient_tallies) total += t;
    double geometric = std::pow(res.residual_bounds[0], p) / (1 - std::pow(res.eC_emp, p));
    CHECK(total <= geometric * (1 + 1e-12));
    CHECK(total >= 0.5 * geometric);
    std::string first = factorization_ledger_json(res);
    CHECK(factorization_ledger_json(weak_factorize(f, s, 3, k, o)) == first);
    o.threads = 3;
    CHECK(factorization_ledger_json(weak_factorize(f, s, 3, k, o)) == first);

    CHECK_THROWS_AS(weak_factorize(f, s, -1, k), ConfigError);
    AtomicDecomposition wrong_p = f;
    wrong_p.p = 0.95;
    CHECK_THROWS_AS(weak_factorize(wrong_p, s, 1, k), ConfigError);
    AtomicDecomposition bad = f;
    bad.terms[0].atom.profile = 2.0 * bad.terms[0].atom.profile;
    CHECK_THROWS_AS(weak_factorize(bad, s, 1, k), HypothesisViolation);
}

TEST_CASE("pairing identity") {
    BesselParam lam(1.0);
    KernelEvaluator k{lam};
    double p = 0.9, alpha = 1 / p - 1;
    ConstantSchedule s = select_schedule(k, p);
    Battery bat = battery_generate(7, 1.0, p, s.M, 5, 2);
    AtomicDecomposition f = battery_decomposition(bat, p);
    FactorizationResult res = weak_factorize(f, s, 3, k);

    LipschitzSymbol constant = LipschitzSymbol::from_function([](double) { return 2.0; }, alpha, {0.0, 1e12}, lam);
    PairingReport c = pairing_check(constant, res, k);
    double mass = 0.0;
    for (const auto& t : f.terms) mass += std::abs(t.coefficient) * lp_norm(t.atom.profile, 1.0, lam);
    CHECK(std::abs(c.lhs) <= 1e-12 * mass);
    for (double v : c.rhs) CHECK(std::abs(v) <= 1e-10 * mass);

    for (const SymbolSpec& sp : bat.symbols) {
        LipschitzSymbol b = pairing_symbol(sp, alpha, res, lam);
        PairingReport rep = pairing_check(b, res, k);
        REQUIRE(rep.discrepancy.size() == 3);
        CHECK(rep.discrepancy[2] < rep.discrepancy[0]);
        CHECK(rep.discrepancy[1] < rep.discrepancy[0]);
        CHECK(rep.discrepancy[2] < rep.discrepancy[1]);
        // each residual atom pairs with b to at most lip(b), and the sum to at most lip(b) bound
        for (std::size_t K = 0; K < 3; ++K)
            CHECK(rep.discrepancy[K] * std::abs(rep.lhs) <= b.seminorm_estimate * res.residual_bounds[K + 1] * 1.01);
    }

    FactorizeOptions lean;
    lean.keep_pairs = false;
    FactorizationResult no_pairs = weak_factorize(f, s, 1, k, lean);
    CHECK_THROWS_AS(pairing_check(constant, no_pairs, k), ConfigError);
}

}  // TEST_SUITE
