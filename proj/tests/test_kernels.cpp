#include <cmath>
#include <numbers>
#include <thread>

#include "doctest.h"
#include "hardy/errors.hpp"
#include "hardy/kernels.hpp"
#include "oracles.hpp"

using namespace hardy;

TEST_SUITE("kernels") {

TEST_CASE("Riesz kernel against independent references") {
    // lambda = 1 reduces to a rational integral in cos(theta)
    CHECK(oracle::rel(riesz_kernel(1, 2, BesselParam(1.0)), oracle::riesz_lambda1_closed(1, 2)) < 1e-12);
    CHECK(oracle::rel(riesz_kernel(1, 2, BesselParam(1.0)), oracle::riesz_theta(1, 2, 1.0, 1000000)) < 1e-9);
    oracle::Rng rng(21);
    for (int t = 0; t < 100; ++t) {
        // the closed form cancels badly once y/x leaves (1/20, 20)
        double x = rng.log_uniform(1e-2, 1e2), y = x * rng.log_uniform(0.05, 20.0);
        if (std::abs(y / x - 1) < 1e-6) continue;
        CHECK(oracle::rel(riesz_kernel(x, y, BesselParam(1.0)), oracle::riesz_lambda1_closed(x, y)) < 1e-9);
    }
    // high-precision theta quadrature, including singular sine weights (lambda < 1/2)
    struct Ref {
        double x, y, lam, value;
    };
    for (Ref r : {Ref{1, 2, 0.25, 0.13371994014377699741}, Ref{1, 0.5, 0.25, -1.0641518200752251948},
                  Ref{1, 3, 0.5, 0.021135490571461233969}, Ref{1, 1.01, 2, 28.658368663136677407},
                  Ref{2, 1, 0.1, -0.4092234953096925756194}, Ref{1, 1.001, 1, 315.73362645080557434},
                  Ref{1.3864782221618344, 1342.2802474839038, 1, 1.8127156117987940332e-13},
                  Ref{0.012529724226945477, 9.8333295648587882, 1, 5.6875973509668053541e-7}})
        CHECK(oracle::rel(riesz_kernel(r.x, r.y, BesselParam(r.lam)), r.value) < 1e-10);
}

TEST_CASE("Riesz kernel homogeneity") {
    oracle::Rng rng(22);
    for (double l : {0.25, 0.5, 1.0, 2.0}) {
        BesselParam lam(l);
        for (int t = 0; t < 25; ++t) {
            double x = rng.log_uniform(1e-2, 1e2), y = x * rng.log_uniform(1e-2, 1e2);
            if (std::abs(y / x - 1) < 1e-3) continue;
            double base = riesz_kernel(x, y, lam);
            for (double s : {0.125, 0.25, 0.5, 2.0, 4.0, 8.0})
                CHECK(oracle::rel(riesz_kernel(s * x, s * y, lam) * std::pow(s, lam.dim()), base) < 1e-10);
        }
    }
}

TEST_CASE("Riesz kernel domain and near-diagonal limits") {
    BesselParam lam(1.0);
    CHECK_THROWS_AS(riesz_kernel(1, 1, lam), DomainError);
    CHECK_THROWS_AS(riesz_kernel(-1, 1, lam), DomainError);
    CHECK_THROWS_AS(riesz_kernel(1, 1 + 1e-14, lam), QuadratureError);
    // Hilbert-type leading term (1/pi) (xy)^{-lambda} / (y - x)
    for (double d : {1e-3, 1e-5, 1e-7}) {
        double y = 1 + d;
        double lead = 1 / (std::numbers::pi * std::pow(y, 1.0) * d);
        CHECK(oracle::rel(riesz_kernel(1, y, lam), lead) < 20 * d * std::abs(std::log(d)));
    }
}

TEST_CASE("size bound is uniform on a log grid") {
    for (double l : {0.5, 1.0, 2.0}) {
        BesselParam lam(l);
        double worst = 0.0;
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                double x = std::pow(10.0, -3 + 6 * i / 15.0), y = x * std::pow(10.0, -3 + 6 * (j + 0.5) / 16.0);
                worst = std::max(worst, size_ratio(x, y, lam));
            }
        CHECK(std::isfinite(worst));
        CHECK(worst < 20.0);
    }
}

TEST_CASE("Poisson kernel") {
    oracle::Rng rng(23);
    for (double l : {0.25, 1.0, 2.0}) {
        BesselParam lam(l);
        for (int n = 0; n < 20; ++n) {
            double t = rng.log_uniform(1e-2, 1e1), x = rng.log_uniform(1e-2, 1e2), y = rng.log_uniform(1e-2, 1e2);
            double p = poisson_kernel(t, x, y, lam).value;
            CHECK(p > 0);
            CHECK(oracle::rel(poisson_kernel(t, y, x, lam).value, p) < 1e-12);
            for (double s : {0.1, 3.0})
                CHECK(oracle::rel(poisson_kernel(s * t, s * x, s * y, lam).value * std::pow(s, lam.dim()), p) < 1e-10);
        }
    }
    CHECK(oracle::rel(poisson_kernel(1, 1, 3, BesselParam(2.0)).value, 0.0019403094588577772496) < 1e-10);
    CHECK(oracle::rel(poisson_kernel(0.5, 1, 2, BesselParam(0.25)).value, 0.1199123012937561146) < 1e-10);
    CHECK(oracle::rel(poisson_kernel(0.7, 1.3, 2.1, BesselParam(1.0)).value, oracle::poisson_theta(0.7, 1.3, 2.1, 1.0, 200000)) < 1e-9);
    CHECK_THROWS_AS(poisson_kernel(0, 1, 1, BesselParam(1.0)), DomainError);
}

TEST_CASE("Poisson kernel has unit mass") {
    // int_0^inf P_1(1, y) y^2 dy for lambda = 1: log-panel Gauss on (1e-8, Y) and the
    // leading tail P ~ (2 lambda t / pi) B(lambda, 1/2) y^{-2 lambda - 2}
    BesselParam lam(1.0);
    KernelEvaluator k(lam);
    const double Y = 1e5;
    double body = oracle::gl5_log([&](double y) { return k.poisson(1.0, 1.0, y).value * y * y; }, 1e-8, Y, 400);
    double tail = (2.0 / std::numbers::pi) * 2.0 / Y;  // B(1, 1/2) = 2
    CHECK(std::abs(body + tail - 1.0) < 1e-6);
}

TEST_CASE("conjugate kernel") {
    BesselParam lam(1.0);
    double R = riesz_kernel(1, 2, lam);
    CHECK(std::abs(conjugate_kernel(1e-6, 1, 2, lam).value - R) < 1e-8 * std::abs(R));
    CHECK(conjugate_kernel(0, 1, 2, lam).value == doctest::Approx(R).epsilon(1e-12));
    double c = std::abs(conjugate_kernel(1e-2, 1, 2, lam).value - R) / 1e-2;
    for (double t : {1e-3, 1e-4}) CHECK(std::abs(conjugate_kernel(t, 1, 2, lam).value - R) <= c * t);
    for (double y : {0.01, 0.05, 0.1})
        for (double t : {1e-3, 1e-2}) CHECK(conjugate_kernel(t, 1, y, lam).value < 0);
    CHECK_THROWS_AS(conjugate_kernel(0, 1, 1, lam), DomainError);
    // |Q_t| against t: an observation only
    int monotone = 0, total = 0;
    for (double y : {0.2, 0.5, 2.0, 5.0}) {
        double prev = INFINITY;
        bool ok = true;
        for (double t = 1e-3; t < 10; t *= 2) {
            double q = std::abs(conjugate_kernel(t, 1, y, lam).value);
            ok = ok && q <= prev;
            prev = q;
        }
        monotone += ok;
        ++total;
    }
    MESSAGE("|Q_t| nonincreasing in t at " << monotone << " of " << total << " sample pairs");
}

TEST_CASE("regime constants") {
    for (double l : {0.5, 1.0, 2.0}) {
        BesselParam lam(l);
        KernelRegimeConstants c = estimate_regime_constants(lam);
        CHECK(c.K1 > 0);
        CHECK(c.K1 < 1);
        CHECK(c.K2 > 0);
        CHECK(c.K2 < 0.5);
        CHECK(c.C_K1 > 0);
        CHECK(c.C_K2 > 0);
        CHECK(c.grid_points == 512);
        // independent grids, offset from the search's own
        for (int i = 1; i <= 512; ++i) {
            double y = c.K1 * (i - 0.37) / 512.0;
            CHECK(riesz_kernel(1, y, lam) <= -c.C_K1 * (1 - 1e-6));
            double z = 1 + c.K2 * (i - 0.37) / 512.0;
            CHECK(riesz_kernel(1, z, lam) * std::pow(z, l) * (z - 1) >= c.C_K2 * (1 - 1e-6));
        }
        // scaling moves the certificate to x = 7
        for (int i = 1; i <= 32; ++i) {
            double y = c.K1 * i / 32.0;
            CHECK(oracle::rel(riesz_kernel(7, 7 * y, lam) * std::pow(7.0, lam.dim()), riesz_kernel(1, y, lam)) < 1e-9);
        }
        const KernelRegimeConstants& cached = regime_constants(lam);
        CHECK(cached.K1 == c.K1);
        CHECK(&cached == &regime_constants(lam));
    }
}

TEST_CASE("smoothness ratio") {
    BesselParam lam(1.0);
    CHECK(smoothness_ratio(5, 1, 1, lam) == 0.0);
    CHECK_THROWS_AS(smoothness_ratio(2, 1, 1.6, lam), HypothesisViolation);
    oracle::Rng rng(24);
    double worst = 0.0, worst_fine = 0.0;
    QuadratureSpec fine;
    fine.nodes_per_panel = 32;
    for (int t = 0; t < 200; ++t) {
        double x0 = rng.log_uniform(1e-2, 1e2), y = x0 * rng.log_uniform(1e-2, 1e2);
        if (std::abs(y / x0 - 1) < 1e-3) continue;
        double x = x0 + 0.49 * std::abs(x0 - y) * rng.uniform(-1, 1);
        if (x <= 0 || x == x0) continue;
        double s = smoothness_ratio(y, x0, x, lam);
        worst = std::max(worst, s);
        worst_fine = std::max(worst_fine, smoothness_ratio(y, x0, x, lam, fine));
        if (t < 20) CHECK(oracle::rel(smoothness_ratio(3 * y, 3 * x0, 3 * x, lam), s) < 1e-9);
    }
    CHECK(std::isfinite(worst));
    CHECK(oracle::rel(worst_fine, worst) < 1e-6);
}

TEST_CASE("Hankel translation") {
    for (double l : {0.25, 1.0, 2.0}) {
        BesselParam lam(l);
        // normalization against tgamma and a theta quadrature of the sine weight
        double B = std::tgamma(l) * std::tgamma(0.5) / std::tgamma(l + 0.5);
        CHECK(oracle::rel(hankel_normalization(lam) * B, 1.0) < 1e-13);
        StepFunction big = StepFunction::indicator(0, 10);
        CHECK(hankel_translate(big, 2, 3, lam) == doctest::Approx(1.0).epsilon(1e-13));
        oracle::Rng rng(25);
        StepFunction g({0.5, 1.1, 2.0, 2.6}, {1.0, -0.4, 2.5});
        for (int t = 0; t < 20; ++t) {
            double x = rng.uniform(0.1, 3), y = rng.uniform(0.1, 3);
            CHECK(std::abs(hankel_translate(g, x, y, lam) - hankel_translate(g, y, x, lam)) < 1e-10);
        }
        // mass is preserved: y-integral of tau_x g against dm_lambda
        for (double x : {0.3, 1.7}) {
            std::vector<double> br{1e-12};
            for (double b : g.breakpoints())
                for (double c : {std::abs(x - b), x + b})
                    if (c > 1e-12) br.push_back(c);
            std::sort(br.begin(), br.end());
            double m = 0;
            for (std::size_t i = 0; i + 1 < br.size(); ++i)
                if (br[i + 1] > br[i])
                    m += oracle::gl5([&](double y) { return hankel_translate(g, x, y, lam) * std::pow(y, 2 * l); }, br[i],
                                     br[i + 1], 200);
            CHECK(std::abs(m - integrate(g, lam)) < 1e-6 * lp_norm(g, 1.0, lam));
        }
    }
    CHECK(oracle::rel(hankel_normalization(BesselParam(1.0)), 0.5) < 1e-14);
}

TEST_CASE("Hankel convolution against a brute-force double integral") {
    BesselParam lam(1.0);
    StepFunction f = StepFunction::indicator(0.5, 1.5), g = StepFunction::indicator(0.2, 0.9, 2.0);
    double x = 1.1;
    double v = hankel_sharp(f, g, x, lam).value;
    // the inner function of y has kinks where |x - y| or x + y meets a breakpoint of g
    std::vector<double> br{0.5, 1.5};
    for (double b : g.breakpoints())
        for (double c : {x - b, b - x, x + b})
            if (c > 0.5 && c < 1.5) br.push_back(c);
    std::sort(br.begin(), br.end());
    double ref = 0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i)
        ref += oracle::gl5([&](double y) {
            auto inner = [&](double th) { double z = std::sqrt(x * x + y * y - 2 * x * y * std::cos(th)); return g(z) * std::sin(th); };
            return 0.5 * oracle::trapezoid(inner, 0, std::numbers::pi, 20000) * y * y;
        }, br[i], br[i + 1], 20);
    CHECK(std::abs(v - ref) < 1e-6);
}

TEST_CASE("kernel cache") {
    BesselParam lam(2.0);
    KernelEvaluator k(lam);
    KernelCache cache(k);
    double a = cache.riesz(1.0, 3.0).value;
    CHECK(a == k.riesz(1.0, 3.0).value);
    // a scaled pair hits the same memo entry
    CHECK(oracle::rel(cache.riesz(2.0, 6.0).value, k.riesz(2.0, 6.0).value) < 1e-13);
    CHECK(cache.size() == 1);
    std::vector<double> out(8);
    std::vector<std::thread> ts;
    for (int i = 0; i < 8; ++i) ts.emplace_back([&, i] { out[i] = cache.riesz(1.0 + i, 0.5 + i).value; });
    for (auto& t : ts) t.join();
    // memo entries are stored at x = 1 and rescaled
    for (int i = 0; i < 8; ++i) CHECK(oracle::rel(out[i], k.riesz(1.0 + i, 0.5 + i).value) < 1e-14);
    for (int i = 0; i < 8; ++i) CHECK(out[i] == cache.riesz(1.0 + i, 0.5 + i).value);
}

}  // TEST_SUITE
