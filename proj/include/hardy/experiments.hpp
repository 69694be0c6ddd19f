#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "hardy/factorization.hpp"

namespace hardy {

// Run parameters shared by all subcommands. Loaded from a flat `key = value` file;
// command-line flags override individual keys afterwards.
struct ExperimentConfig {
    std::vector<double> lambda_list{0.5, 1.0, 2.0};
    std::vector<double> p_list{0.85, 0.95, 1.0};
    double epsilon = 1.0 / 16;
    std::uint64_t seed = 20240611;
    int resolution = 32;
    QuadratureSpec quadrature{};
    std::filesystem::path output_dir = "hardy-out";
    int threads = 0;  // 0 = all available cores

    // kernel-scan
    int scan_grid = 64;
    double scan_lo = 1e-3, scan_hi = 1e3;

    // atom-demo
    int two_bump_cases = 100;

    // factorize
    int battery_atoms = 50;
    int K_max = 5;
    double M = 0.0;  // 0 = schedule-selected
    double q = 0.0, r = 0.0;
    double tail_fraction = 3e-3;
    std::filesystem::path input;  // atomic decomposition file; empty = generated battery

    // commutator-bench
    int bench_atoms = 64;
    int bench_symbols = 16;
    double p_in = 2.0;
    int bench_points = 1000;
    int bench_cells = 32;  // uniform cells on each atom's support

    // Throws ConfigError naming the offending key and, for p, the admissible interval.
    void validate() const;
    int thread_count() const;
};

// Parses `key = value` lines (`#` starts a comment). Unknown keys are errors.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base = {});
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::vector<std::string> config_keys();
// HARDY_OUTPUT_DIR, when set and non-empty, replaces output_dir.
void apply_environment(ExperimentConfig& cfg);

// "(3/4, 1]" style rendering of the admissible p interval.
std::string describe_p_range(BesselParam lam);

struct BatteryAtom {
    int id;
    std::string regime;  // "euclidean", "near-origin", "case-b"
    Atom atom;
};

struct SymbolSpec {
    int id;
    std::string kind;  // "canonical" or "random"
    std::vector<double> weights, centers;  // b = sum_k w_k |m(0,x) - s_k|^alpha
};

struct Battery {
    double lambda, p, M;
    std::vector<BatteryAtom> atoms;
    std::vector<SymbolSpec> symbols;
    double alpha;
};

// Deterministic for a fixed seed. Atoms get case tags relative to the given M.
Battery battery_generate(std::uint64_t seed, double lambda, double p, double M, int atoms, int symbols);
LipschitzSymbol make_symbol(const SymbolSpec& s, double alpha, double lo, double hi, BesselParam lam,
                            int cells = 256);
double symbol_value(const SymbolSpec& s, double alpha, double x, BesselParam lam);
// Symbol sampled for pairing_check: a log grid from 0 past every support in `res`,
// refined to `cells_per_atom` uniform cells on each input atom's support.
LipschitzSymbol pairing_symbol(const SymbolSpec& s, double alpha, const FactorizationResult& res, BesselParam lam,
                               int log_cells = 512, int cells_per_atom = 64);

std::string battery_csv(const Battery& b);

// Deterministic 100-case battery for the two-bump decomposition.
std::vector<TwoBumpFunction> two_bump_battery(std::uint64_t seed, BesselParam lam, int cases);

// ---- CSV helpers ----
std::string format_double(double v);
using CsvTable = std::vector<std::vector<std::string>>;
std::string to_csv(const std::vector<std::string>& header, const CsvTable& rows);
std::pair<std::vector<std::string>, CsvTable> parse_csv(const std::string& text);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, const std::string& content);

// Atomic-decomposition input: CSV with columns alpha,center,radius,profile_file, where
// each profile file holds StepFunction text relative to the decomposition file.
AtomicDecomposition load_decomposition(const std::filesystem::path& file, double p);
void save_decomposition(const AtomicDecomposition& f, const std::filesystem::path& file);

// ---- runners: each writes artifacts under cfg.output_dir and returns the exit status ----
struct RunReport {
    int status = 0;  // 0 pass, 1 certificate failure
    std::vector<std::string> failures;
    std::vector<std::filesystem::path> artifacts;
};

struct KernelScan {
    double lambda;
    std::vector<double> x, y, value, bound_ratio, error;
    double C_scan = 0.0;
};
KernelScan kernel_scan(BesselParam lam, const QuadratureSpec& spec, int grid, double lo, double hi);

RunReport run_kernel_scan(const ExperimentConfig& cfg);
RunReport run_atom_demo(const ExperimentConfig& cfg);
RunReport run_factorize(const ExperimentConfig& cfg);
RunReport run_commutator_bench(const ExperimentConfig& cfg);

std::string factorization_ledger_json(const FactorizationResult& res, int indent = 2);
std::string factorization_levels_csv(const FactorizationResult& res);

// Pointwise domination and operator-norm ratios for one (lambda, alpha) battery.
struct CommutatorBench {
    double lambda, p_in, q_out, alpha, C_size;
    int points = 0, violations = 0;
    double worst_domination = 0.0;  // max |[b,R]f| / (C_size * lip * I_alpha(|f|))
    std::vector<int> symbol_id, atom_id;
    std::vector<double> ratio, ratio_refined;
    double max_ratio = 0.0, max_ratio_refined = 0.0;
};
// One entry per alpha, each checked pointwise at `points` probes; kernel cell integrals are shared across symbols and alphas.
std::vector<CommutatorBench> commutator_bench(const Battery& battery, const KernelEvaluator& k,
                                              const std::vector<double>& alphas, double p_in, int points,
                                              int threads, double C_size, int base_cells = 32);

}  // namespace hardy
