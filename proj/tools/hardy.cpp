// Command-line driver: hardy [global options] <kernel-scan|atom-demo|factorize|commutator-bench>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hardy/errors.hpp"
#include "hardy/experiments.hpp"

namespace {

std::string join(const std::vector<double>& v) {
    std::string out;
    for (double x : v) out += (out.empty() ? "" : ",") + hardy::format_double(x);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weak factorization experiments for Hardy spaces of the Bessel operator"};
    app.require_subcommand(1, 1);

    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    std::vector<double> lambdas, ps;
    app.add_option("--config", config_file, "flat key = value configuration file");
    app.add_option("--set", sets, "override a configuration key, key=value (repeatable)");
    auto flag = [&](CLI::App* a, const std::string& name, const std::string& key, const std::string& help) {
        a->add_option_function<std::string>(name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
    };
    flag(&app, "--output-dir", "output_dir", "artifact directory (beats HARDY_OUTPUT_DIR)");
    flag(&app, "--threads", "threads", "worker threads, 0 = all cores");
    flag(&app, "--seed", "seed", "battery seed");
    flag(&app, "--resolution", "resolution", "cells per interval");
    flag(&app, "--rel-tol", "rel_tol", "quadrature relative tolerance");
    app.add_option("--lambda", lambdas, "lambda values")->delimiter(',');
    app.add_option("--p", ps, "p values")->delimiter(',');

    auto* scan = app.add_subcommand("kernel-scan", "Riesz kernel size-bound scan on a log grid");
    flag(scan, "--grid", "scan_grid", "grid points per axis");
    flag(scan, "--lo", "scan_lo", "smallest coordinate");
    flag(scan, "--hi", "scan_hi", "largest coordinate");

    auto* demo = app.add_subcommand("atom-demo", "two-bump decompositions on a random battery");
    flag(demo, "--cases", "two_bump_cases", "battery size");

    auto* fact = app.add_subcommand("factorize", "iterated weak factorization with residual ledger");
    flag(fact, "--input", "input", "atomic decomposition CSV (alpha,center,radius,profile_file)");
    flag(fact, "--epsilon", "epsilon", "target approximation error");
    flag(fact, "--M", "M", "schedule M (0 = selected)");
    flag(fact, "--K-max", "K_max", "levels");
    flag(fact, "--q", "q", "exponent for g");
    flag(fact, "--r", "r", "exponent for h");
    flag(fact, "--atoms", "battery_atoms", "generated battery size");
    flag(fact, "--tail-fraction", "tail_fraction", "share of each level's tally carried unprocessed");

    auto* bench = app.add_subcommand("commutator-bench", "commutator pointwise domination and norm ratios");
    flag(bench, "--atoms", "bench_atoms", "battery atoms");
    flag(bench, "--symbols", "bench_symbols", "battery symbols");
    flag(bench, "--p-in", "p_in", "input Lebesgue exponent");
    flag(bench, "--points", "bench_points", "pointwise test points");
    flag(bench, "--cells", "bench_cells", "grid cells per atom support");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        hardy::ExperimentConfig cfg;
        if (!config_file.empty()) cfg = hardy::load_config(config_file);
        hardy::apply_environment(cfg);
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) throw hardy::ConfigError("--set expects key=value, got '" + s + "'");
            hardy::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (!lambdas.empty()) hardy::apply_setting(cfg, "lambda_list", join(lambdas));
        if (!ps.empty()) hardy::apply_setting(cfg, "p_list", join(ps));
        for (const auto& [k, v] : flags) hardy::apply_setting(cfg, k, v);
        cfg.validate();

        hardy::RunReport rep;
        if (*scan) rep = hardy::run_kernel_scan(cfg);
        else if (*demo) rep = hardy::run_atom_demo(cfg);
        else if (*fact) rep = hardy::run_factorize(cfg);
        else rep = hardy::run_commutator_bench(cfg);

        for (const auto& a : rep.artifacts) std::cout << a.string() << "\n";
        for (const auto& f : rep.failures) std::cerr << "FAIL: " << f << "\n";
        return rep.status;
    } catch (const hardy::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const hardy::Error& e) {
        std::cerr << "FAIL: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}
