// Acceptance run: one PASS/FAIL line per criterion, with the recorded constants and
// the wall-clock time against its limit. Exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hardy/errors.hpp"
#include "hardy/experiments.hpp"

using namespace hardy;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream note;
    void require(bool ok, const std::string& why) {
        if (!ok) {
            if (pass) note << " | failed: ";
            else note << "; ";
            note << why;
            pass = false;
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ostringstream lim;
    lim << secs << " s > " << limit_s << " s";
    o.require(secs < limit_s, "runtime " + lim.str());
    if (!o.pass) ++failures;
    std::printf("%s C%d %s [%.2f s / %.0f s]: %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), secs, limit_s,
                o.note.str().c_str());
    std::fflush(stdout);
}

const std::vector<double> kLambdas{0.5, 1.0, 2.0};

std::string num(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

}  // namespace

int main() {
    const ExperimentConfig cfg;
    const int threads = cfg.thread_count();
    std::map<double, double> C_scan;

    criterion(1, "doubling comparability on a 64x64 grid", 1.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            double C = 0.0;
            for (int i = 0; i < 64; ++i)
                for (int j = 0; j < 64; ++j) {
                    double x = 1e-3 * std::pow(1e6, i / 63.0), r = 1e-3 * std::pow(1e6, j / 63.0);
                    Comparability c = doubling_comparability(x, r, lam);
                    C = std::max({C, c.ratio, c.reciprocal});
                }
            o.note << "C(" << l << ") = " << num(C) << " ";
            o.require(std::isfinite(C) && C <= std::pow(2.0, lam.dim()), "ratio unbounded at lambda " + num(l));
        }
    });

    criterion(2, "kernel homogeneity, 100 random triples per lambda", 10.0, [&](Outcome& o) {
        std::mt19937_64 g(cfg.seed);
        std::uniform_real_distribution<double> u(std::log(1e-2), std::log(1e2)), us(std::log(1e-3), std::log(1e3));
        for (double l : kLambdas) {
            KernelEvaluator k{BesselParam(l)};
            double worst = 0.0;
            for (int t = 0; t < 100; ++t) {
                double x = std::exp(u(g)), y = std::exp(u(g)), s = std::exp(us(g));
                double a = k.riesz(s * x, s * y).value * std::pow(s, 2 * l + 1), b = k.riesz(x, y).value;
                worst = std::max(worst, std::abs(a - b) / std::abs(b));
            }
            o.note << "max rel(" << l << ") = " << num(worst) << " ";
            o.require(worst <= 1e-10, "homogeneity off at lambda " + num(l));
        }
    });

    criterion(3, "size bound with node doubling", 60.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            QuadratureSpec spec = cfg.quadrature;
            KernelScan a = kernel_scan(lam, spec, 64, 1e-3, 1e3);
            KernelScan b = kernel_scan(lam, spec.with_nodes(2 * spec.nodes_per_panel), 64, 1e-3, 1e3);
            C_scan[l] = a.C_scan;
            double drift = std::abs(b.C_scan / a.C_scan - 1);
            bool finite = std::all_of(a.bound_ratio.begin(), a.bound_ratio.end(), [](double v) { return std::isfinite(v); });
            o.note << "C_scan(" << l << ") = " << num(a.C_scan) << " drift " << num(drift) << " ";
            o.require(finite && drift <= 0.05, "C_scan unstable at lambda " + num(l));
        }
    });

    criterion(4, "kernel sign regimes and tolerance invariance", 60.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            QuadratureSpec loose = cfg.quadrature, tight = cfg.quadrature;
            loose.rel_tol = 1e-8;
            tight.rel_tol = 1e-10;
            KernelRegimeConstants a = estimate_regime_constants(lam, loose), b = estimate_regime_constants(lam, tight);
            o.note << "lambda " << l << ": K1 = " << num(b.K1) << ", K2 = " << num(b.K2) << " ";
            o.require(b.K1 > 0 && b.K1 < 1 && b.K2 > 0 && b.K2 < 0.5, "K1 or K2 out of range at lambda " + num(l));
            o.require(a.grid_points == 512 && b.grid_points == 512, "certificate grid is not 512 points");
            o.require(std::round(a.K1 * 1e3) == std::round(b.K1 * 1e3) && std::round(a.K2 * 1e3) == std::round(b.K2 * 1e3),
                      "K1/K2 change under rel_tol at lambda " + num(l));
            // re-check both certificates on an independent 512-point grid
            KernelEvaluator k(lam, tight);
            bool ok = true;
            for (int i = 1; i <= 512; ++i) {
                double y1 = b.K1 * i / 512.0, y2 = 1 + b.K2 * i / 512.0;
                ok = ok && k.riesz(1.0, y1).value <= -b.C_K1 * (1 - 1e-9);
                ok = ok && k.riesz(1.0, y2).value * std::pow(y2, l) * (y2 - 1) >= b.C_K2 * (1 - 1e-9);
            }
            o.require(ok && b.C_K1 > 0 && b.C_K2 > 0, "sign certificate fails at lambda " + num(l));
        }
    });

    criterion(5, "two-bump decomposition, 100 cases", 30.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            auto battery = two_bump_battery(cfg.seed, lam, 100);
            for (double p : cfg.p_list) {
                double C = 0.0, Cp = 0.0, recon = 0.0;
                bool valid = true;
                for (const TwoBumpFunction& f : battery) {
                    TwoBumpDecomposition d = decompose_two_bump(f, p, lam);
                    recon = std::max(recon, (d.decomposition.reconstruct() - f.sum()).sup_norm() / std::max(f.C1, f.C2));
                    for (const AtomTerm& t : d.decomposition.terms) {
                        valid = valid && validate_atom(t.atom, lam).valid();
                        double Ci = t.bump == 1 ? f.C1 : f.C2, xi = t.bump == 1 ? f.x1 : f.x2;
                        C = std::max(C, std::abs(t.coefficient) / (std::pow(2.0, t.level * (1 / p - 1)) * Ci *
                                                                   std::pow(measure(Interval(xi, f.r), lam), 1 / p)));
                    }
                    Cp = std::max(Cp, d.bound / two_bump_closed_form_bound(f, p, lam));
                }
                o.note << "(" << l << "," << p << "): C = " << num(C) << ", C' = " << num(Cp) << " ";
                o.require(recon <= 1e-12, "reconstruction error " + num(recon));
                o.require(valid, "invalid atom at lambda " + num(l));
                o.require(std::isfinite(C) && std::isfinite(Cp), "unbounded constant");
            }
        }
    });

    struct Run {
        ConstantSchedule s;
        AtomicDecomposition f;
        Battery bat;
    };
    std::map<std::pair<double, double>, Run> runs;

    criterion(6, "single-atom approximation on the 50-atom battery", 600.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            KernelEvaluator k(lam, cfg.quadrature);
            double prodC = 0.0;
            for (double p : cfg.p_list) {
                ScheduleOptions so;
                so.epsilon = cfg.epsilon;
                so.resolution = cfg.resolution;
                Run run;
                run.s = select_schedule(k, p, so);
                run.bat = battery_generate(cfg.seed, l, p, run.s.M, cfg.battery_atoms, 0);
                double worst = 0.0, cancel = 0.0;
                std::mt19937_64 g(cfg.seed + 17);
                std::uniform_real_distribution<double> u(0.2, 1.0);
                run.f.p = p;
                for (const BatteryAtom& ba : run.bat.atoms) {
                    ApproxOptions ao;
                    ao.resolution = cfg.resolution;
                    AtomApproximation ap = approximate_atom(ba.atom, run.s, k, ao);
                    worst = std::max(worst, ap.certified_eps);
                    prodC = std::max(prodC, ap.pair.product_norm / std::pow(run.s.M, 2 * l / run.s.q + 1));
                    StepFunction pi = pi_form(ap.pair.g(), ap.pair.h, k, cfg.resolution);
                    cancel = std::max(cancel, std::abs(integrate(ba.atom.profile - pi, lam)) /
                                                  lp_norm(ba.atom.profile, 1.0, lam));
                    run.f.terms.push_back({u(g) * (g() % 2 ? -1.0 : 1.0), ba.atom, 0, 0});
                }
                o.note << "(" << l << "," << p << "): M = " << run.s.M << ", max eps = " << num(worst) << ", |int| "
                       << num(cancel) << " ";
                o.require(worst < run.s.epsilon, "certified eps " + num(worst) + " at (" + num(l) + "," + num(p) + ")");
                o.require(cancel <= 1e-7, "cancellation " + num(cancel));
                runs[{l, p}] = std::move(run);
            }
            o.note << "C_prod(" << l << ") = " << num(prodC) << " ";
            o.require(std::isfinite(prodC), "product norm unbounded");
        }
    });

    criterion(7, "five-level weak factorization", 1800.0, [&](Outcome& o) {
        for (auto& [key, run] : runs) {
            auto [l, p] = key;
            KernelEvaluator k(BesselParam(l), cfg.quadrature);
            FactorizeOptions fo;
            fo.approx.resolution = cfg.resolution;
            fo.tail_fraction = cfg.tail_fraction;
            fo.threads = threads;
            fo.keep_pairs = false;
            FactorizationResult res = weak_factorize(run.f, run.s, 5, k, fo);
            double worst = 0.0, total = 0.0;
            bool ok = res.levels.size() == 5 && res.eC_emp < 1;
            for (std::size_t i = 1; i < res.residual_bounds.size(); ++i) {
                double ratio = res.residual_bounds[i] / res.residual_bounds[i - 1];
                worst = std::max(worst, ratio);
                ok = ok && ratio <= res.eC_emp;
            }
            for (double t : res.coefficient_tallies) total += t;
            double geometric = res.coefficient_tallies.front() / (1 - std::pow(res.eC_emp, p));
            double tally_ratio = total / geometric;
            o.note << "(" << l << "," << p << "): eC = " << num(res.eC_emp) << ", max ratio " << num(worst)
                   << ", tally/geom " << num(tally_ratio) << " ";
            o.require(ok, "decay ratio exceeds eC_emp at (" + num(l) + "," + num(p) + ")");
            o.require(tally_ratio >= 0.5 && tally_ratio <= 2.0, "tally off the geometric bound");
        }
    });

    criterion(8, "commutator domination and norm-ratio stability", 600.0, [&](Outcome& o) {
        for (double l : kLambdas) {
            BesselParam lam(l);
            KernelEvaluator k(lam, cfg.quadrature);
            std::vector<double> alphas, ps;
            for (double p : cfg.p_list)
                if (p > 0.5 && p < 1.0) {
                    ps.push_back(p);
                    alphas.push_back(1 / p - 1);
                }
            double M = make_schedule(k, ps.front(), 0.0).M_minimal;
            Battery bat = battery_generate(cfg.seed, l, ps.front(), M, cfg.bench_atoms, cfg.bench_symbols);
            double C = C_scan.count(l) ? C_scan[l] : kernel_scan(lam, cfg.quadrature, 64, 1e-3, 1e3).C_scan;
            auto benches = commutator_bench(bat, k, alphas, cfg.p_in, cfg.bench_points, threads, C, cfg.bench_cells);
            for (const CommutatorBench& b : benches) {
                double drift = std::abs(b.max_ratio_refined / b.max_ratio - 1), pair_drift = 0.0;
                for (std::size_t i = 0; i < b.ratio.size(); ++i)
                    pair_drift = std::max(pair_drift, std::abs(b.ratio_refined[i] / b.ratio[i] - 1));
                o.note << "(" << l << ", alpha " << num(b.alpha) << "): " << b.points << " pts, " << b.violations
                       << " violations, max ratio " << num(b.max_ratio) << ", drift " << num(pair_drift) << " ";
                o.require(b.points >= 1000 && b.violations == 0, "domination violated");
                o.require(std::isfinite(b.max_ratio) && drift <= 0.1 && pair_drift <= 0.1, "norm ratio unstable");
            }
        }
    });

    criterion(9, "pairing identity under truncation, 5 cases", 300.0, [&](Outcome& o) {
        const std::vector<std::pair<double, double>> cases{{0.5, 0.85}, {0.5, 0.95}, {1.0, 0.85}, {1.0, 0.95}, {2.0, 0.95}};
        for (auto [l, p] : cases) {
            BesselParam lam(l);
            KernelEvaluator k(lam, cfg.quadrature);
            ScheduleOptions so;
            so.epsilon = cfg.epsilon;
            ConstantSchedule s = select_schedule(k, p, so);
            Battery bat = battery_generate(cfg.seed, l, p, s.M, 5, 1);
            AtomicDecomposition f{p, {}};
            for (const BatteryAtom& a : bat.atoms) f.terms.push_back({1.0, a.atom, 0, 0});
            FactorizeOptions fo;
            fo.threads = threads;
            fo.tail_fraction = 0.0;  // every atom is processed at every level
            FactorizationResult res = weak_factorize(f, s, 3, k, fo);
            LipschitzSymbol b = pairing_symbol(bat.symbols[0], 1 / p - 1, res, lam);
            PairingReport rep = pairing_check(b, res, k);
            o.note << "(" << l << "," << p << "):";
            for (double d : rep.discrepancy) o.note << " " << num(d);
            o.note << " ";
            bool mono = rep.discrepancy.size() == 3 && rep.discrepancy[1] < rep.discrepancy[0] &&
                        rep.discrepancy[2] < rep.discrepancy[1];
            o.require(mono, "discrepancy not decreasing at (" + num(l) + "," + num(p) + ")");
        }
    });

    std::printf("%d of 9 criteria failed\n", failures);
    return failures;
}
