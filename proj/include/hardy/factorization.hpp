#pragma once

#include <cstddef>
#include <vector>

#include "hardy/atoms.hpp"
#include "hardy/kernels.hpp"
#include "hardy/riesz_operators.hpp"

namespace hardy {

struct ScheduleOptions {
    double epsilon = 1.0 / 16.0;
    double q = 0.0;  // 0 picks q = r = 2p
    double r = 0.0;
    double K0_slack = 0.25;  // K0 = max(1/K1, 1/K2) + 1 + slack
    // The two closed-form constraints on M hide an unnamed constant. With calibrate on,
    // M keeps doubling until fixed probe atoms certify below probe_margin * epsilon.
    bool calibrate = true;
    double probe_margin = 0.5;
    int max_doublings = 20;
    int resolution = 32;
};

struct ConstantSchedule {
    double K0 = 0.0;
    double M = 0.0;
    double epsilon = 0.0;
    double p = 1.0, q = 2.0, r = 2.0;
    double lambda = 0.0;
    double M_minimal = 0.0;  // smallest power of two meeting both constraints
    int doublings = 0;       // calibration steps taken from M_minimal
    double probe_eps = 0.0;  // worst probe certificate at M
    KernelRegimeConstants regime;

    // Throws ConfigError naming the violated constraint.
    void validate() const;
};

ConstantSchedule select_schedule(const KernelEvaluator& k, double p, const ScheduleOptions& opt = {});
// Schedule with explicit K0 and M; the constraints are still validated.
ConstantSchedule make_schedule(const KernelEvaluator& k, double p, double M, const ScheduleOptions& opt = {});

enum class ApproxCase { a, b };

struct FactorPair {
    Interval g_support{1.0, 1.0};  // g = chi of this interval
    StepFunction h;      // -a / R~g(x0)
    double x0 = 0.0, r = 0.0, y0 = 0.0;
    ApproxCase tag = ApproxCase::a;
    double rtg_x0 = 0.0;        // R~g(x0)
    double product_norm = 0.0;  // ||g||_q ||h||_r

    StepFunction g() const { return StepFunction::indicator(g_support); }
};

struct ApproxOptions {
    int resolution = 32;  // sampling cells for W1 and W2 per support interval
    int cheb_nodes = 8;
};

struct AtomApproximation {
    FactorPair pair;
    TwoBumpFunction residual;  // W1 on I(x0, r), W2 on I(y0, r)
    TwoBumpDecomposition residual_decomposition;
    double certified_eps = 0.0;
    double cancellation = 0.0;        // |int W1 + W2 dm| / ||a||_1 before the mean is projected out
    double denominator_bound = 0.0;   // certified lower bound for |R~g(x0)|
    double C1_reference = 0.0;        // closed-form C1 and C2 built from measures of I(x0, r), I(y0, r)
    double C2_reference = 0.0;
};

// a - Pi(g, h) = W1 + W2 with g = chi_{I(y0, r)} and h = -a / R~g(x0).
// W1 = a (R~g(x0) - R~g) / R~g(x0) and W2 = -g Rh are interpolated at Chebyshev nodes
// on their supports and stored as dm-cell averages.
AtomApproximation approximate_atom(const Atom& a, const ConstantSchedule& s, const KernelEvaluator& k,
                                   const ApproxOptions& opt = {});

// Pi(g, h) = g Rh - h R~g sampled as dm-cell averages on the union of the supports.
StepFunction pi_form(const StepFunction& g, const StepFunction& h, const KernelEvaluator& k, int resolution = 32);

struct FactorizeOptions {
    ApproxOptions approx;
    // Per level, atoms are processed in decreasing |alpha|^p until the unprocessed
    // share of the level's tally is at most tail_fraction; the rest carry over to the
    // next level unchanged, so the representation stays exact.
    double tail_fraction = 3e-3;
    std::size_t max_atoms_per_level = 200000;
    double floor = 1e-14;  // stop once bound[k] < floor * bound[0]
    int threads = 1;
    bool keep_pairs = true;
    bool keep_final_atoms = false;  // materialize E_K; otherwise only its coefficients are kept
};

struct LevelRecord {
    std::vector<double> alphas;       // alpha_j^k of the processed atoms
    std::vector<FactorPair> pairs;    // matching (g, h), empty unless keep_pairs
    double tally = 0.0;               // sum |alpha_j^k|^p over processed atoms
    double carried_tally = 0.0;       // sum |alpha|^p of atoms left for the next level
    double bound = 0.0;               // surrogate H^p bound of E_k
    double max_eps = 0.0;             // worst certified eps among processed atoms
    double max_cancellation = 0.0;
    std::size_t processed = 0, carried = 0, children = 0;
    std::size_t case_a = 0, case_b = 0;
};

struct FactorizationResult {
    AtomicDecomposition input;
    ConstantSchedule schedule;
    std::vector<LevelRecord> levels;
    std::vector<double> residual_bounds;      // [0] is the input bound
    std::vector<double> coefficient_tallies;  // per level
    double eC_emp = 0.0;    // worst certified eps over every processed atom
    double eC_ratio = 0.0;  // worst bound[k] / bound[k-1]
    AtomicDecomposition residual;  // E_K (profiles only if keep_final_atoms)
};

FactorizationResult weak_factorize(const AtomicDecomposition& f, const ConstantSchedule& s, int K_max,
                                   const KernelEvaluator& k, const FactorizeOptions& opt = {});

// <g, [b, R] h> via a Chebyshev tensor interpolant of R on supp g x supp h (disjoint
// supports); b enters through its step values on both sides.
double commutator_pairing(const LipschitzSymbol& b, const FactorPair& pair, const KernelEvaluator& k,
                          int cheb_nodes = 16);

struct PairingReport {
    double lhs = 0.0;  // <b, f>
    std::vector<double> rhs;          // sum over levels <= K of alpha <g, [b, R] h>
    std::vector<double> discrepancy;  // |lhs - rhs_K| / |lhs|
};

// Compares <b, f> with the level-truncated sums for K = 1..levels; needs keep_pairs.
PairingReport pairing_check(const LipschitzSymbol& b, const FactorizationResult& res, const KernelEvaluator& k,
                            int K = -1);

}  // namespace hardy
