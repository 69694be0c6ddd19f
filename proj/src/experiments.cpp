#include "hardy/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "hardy/errors.hpp"
#include "hardy/parallel.hpp"
#include "json.hpp"

namespace hardy {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- config

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& key, const std::string& v) {
    std::string t = trim(v);
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError("config key '" + key + "': expected a number, got '" + t + "'");
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    double d = parse_number(key, v);
    if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError("config key '" + key + "': expected an integer");
    return static_cast<int>(d);
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(key, item));
    if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
    return out;
}

// n/d with d <= 1000 when the value is that rational to 1e-12
std::string as_fraction(double v) {
    for (int d = 1; d <= 1000; ++d) {
        double n = std::round(v * d);
        if (std::abs(n / d - v) < 1e-12) {
            if (d == 1) return std::to_string(static_cast<long long>(n));
            return std::to_string(static_cast<long long>(n)) + "/" + std::to_string(d);
        }
    }
    return format_double(v);
}

const std::vector<std::string> kKeys = {
    "lambda_list", "p_list",        "epsilon",        "seed",          "resolution",  "rel_tol",
    "max_subdivisions", "nodes_per_panel", "output_dir", "threads",   "scan_grid",   "scan_lo",
    "scan_hi",     "two_bump_cases", "battery_atoms", "K_max",         "M",           "q",
    "r",           "tail_fraction", "input",          "bench_atoms",   "bench_symbols", "p_in",
    "bench_points",  "bench_cells"};

}  // namespace

std::vector<std::string> config_keys() { return kKeys; }

std::string describe_p_range(BesselParam lam) {
    PRange pr = p_range(lam);
    return "(" + as_fraction(pr.lo) + ", " + as_fraction(pr.hi) + "]";
}

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& value) {
    const std::string key = trim(key_in), v = trim(value);
    if (key == "lambda_list") c.lambda_list = parse_list(key, v);
    else if (key == "p_list") c.p_list = parse_list(key, v);
    else if (key == "epsilon") c.epsilon = parse_number(key, v);
    else if (key == "seed") {
        std::uint64_t s = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
        if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
            throw ConfigError("config key 'seed': expected a nonnegative integer");
        c.seed = s;
    } else if (key == "resolution") c.resolution = parse_int(key, v);
    else if (key == "rel_tol") c.quadrature.rel_tol = parse_number(key, v);
    else if (key == "max_subdivisions") c.quadrature.max_subdivisions = parse_int(key, v);
    else if (key == "nodes_per_panel") c.quadrature.nodes_per_panel = parse_int(key, v);
    else if (key == "output_dir") c.output_dir = v;
    else if (key == "threads") c.threads = parse_int(key, v);
    else if (key == "scan_grid") c.scan_grid = parse_int(key, v);
    else if (key == "scan_lo") c.scan_lo = parse_number(key, v);
    else if (key == "scan_hi") c.scan_hi = parse_number(key, v);
    else if (key == "two_bump_cases") c.two_bump_cases = parse_int(key, v);
    else if (key == "battery_atoms") c.battery_atoms = parse_int(key, v);
    else if (key == "K_max") c.K_max = parse_int(key, v);
    else if (key == "M") c.M = parse_number(key, v);
    else if (key == "q") c.q = parse_number(key, v);
    else if (key == "r") c.r = parse_number(key, v);
    else if (key == "tail_fraction") c.tail_fraction = parse_number(key, v);
    else if (key == "input") c.input = v;
    else if (key == "bench_atoms") c.bench_atoms = parse_int(key, v);
    else if (key == "bench_symbols") c.bench_symbols = parse_int(key, v);
    else if (key == "p_in") c.p_in = parse_number(key, v);
    else if (key == "bench_points") c.bench_points = parse_int(key, v);
    else if (key == "bench_cells") c.bench_cells = parse_int(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

ExperimentConfig load_config(const fs::path& file, ExperimentConfig base) {
    if (!fs::exists(file)) throw ConfigError("config file not found: " + file.string());
    return parse_config(read_file(file), std::move(base));
}

void apply_environment(ExperimentConfig& cfg) {
    if (const char* dir = std::getenv("HARDY_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
}

void ExperimentConfig::validate() const {
    if (lambda_list.empty()) throw ConfigError("lambda_list must not be empty");
    if (p_list.empty()) throw ConfigError("p_list must not be empty");
    for (double l : lambda_list) {
        if (!(l > 0.0)) throw ConfigError("lambda must be positive, got " + format_double(l));
        BesselParam lam(l);
        for (double p : p_list)
            if (!p_range(lam).contains(p))
                throw ConfigError("p = " + format_double(p) + " is outside the admissible range " +
                                  describe_p_range(lam) + " for lambda = " + format_double(l));
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0, 1)");
    if (resolution < 1) throw ConfigError("resolution must be at least 1");
    quadrature.validate();
    if (threads < 0) throw ConfigError("threads must be nonnegative");
    if (scan_grid < 2) throw ConfigError("scan_grid must be at least 2");
    if (!(scan_lo > 0.0 && scan_hi > scan_lo)) throw ConfigError("need 0 < scan_lo < scan_hi");
    if (two_bump_cases < 1 || battery_atoms < 1) throw ConfigError("battery sizes must be positive");
    if (K_max < 0) throw ConfigError("K_max must be nonnegative");
    if (M < 0.0) throw ConfigError("M must be nonnegative (0 selects it from the schedule)");
    if (!(tail_fraction >= 0.0 && tail_fraction < 1.0)) throw ConfigError("tail_fraction must lie in [0, 1)");
    if (!input.empty() && (lambda_list.size() != 1 || p_list.size() != 1))
        throw ConfigError("an input decomposition needs exactly one lambda and one p");
    if (bench_atoms < 1 || bench_symbols < 1 || bench_points < 0 || bench_cells < 2) throw ConfigError("bench sizes must be positive");
    if (!(p_in > 1.0)) throw ConfigError("p_in must exceed 1");
}

int ExperimentConfig::thread_count() const { return threads > 0 ? threads : default_threads(); }

// ---------------------------------------------------------------- io

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string to_csv(const std::vector<std::string>& header, const CsvTable& rows) {
    std::string out;
    auto cell = [&](const std::string& c) {
        if (c.find_first_of(",\"\n\r") == std::string::npos) {
            out += c;
            return;
        }
        out += '"';
        for (char ch : c) {
            if (ch == '"') out += '"';
            out += ch;
        }
        out += '"';
    };
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            cell(cells[i]);
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

// RFC 4180 style: quoted fields may hold commas, doubled quotes and line breaks.
std::pair<std::vector<std::string>, CsvTable> parse_csv(const std::string& text) {
    std::vector<std::string> header;
    CsvTable rows;
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false, first = true, any = false;
    auto end_row = [&]() {
        cells.push_back(std::move(cur));
        cur.clear();
        bool blank = cells.size() == 1 && cells[0].empty() && !any;
        if (!blank) {
            if (first) {
                header = std::move(cells);
                first = false;
            } else {
                if (cells.size() != header.size())
                    throw ConfigError("csv row has " + std::to_string(cells.size()) + " fields, header has " +
                                      std::to_string(header.size()));
                rows.push_back(std::move(cells));
            }
        }
        cells.clear();
        any = false;
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = any = true;
        } else if (ch == ',') {
            cells.push_back(std::move(cur));
            cur.clear();
            any = true;
        } else if (ch == '\n') {
            end_row();
        } else if (ch != '\r') {
            cur += ch;
            any = true;
        }
    }
    if (quoted) throw ConfigError("csv: unterminated quoted field");
    if (any || !cur.empty()) end_row();
    return {header, rows};
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
}

AtomicDecomposition load_decomposition(const fs::path& file, double p) {
    auto [header, rows] = parse_csv(read_file(file));
    auto col = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ConfigError("decomposition file lacks column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    std::size_t ca = col("alpha"), cc = col("center"), cr = col("radius"), cp = col("profile_file");
    AtomicDecomposition out;
    out.p = p;
    for (const auto& row : rows) {
        double alpha = parse_number("alpha", row[ca]);
        Interval I(parse_number("center", row[cc]), parse_number("radius", row[cr]));
        StepFunction prof = from_text(read_file(file.parent_path() / row[cp]));
        out.terms.push_back({alpha, Atom{I, prof, p}, 0, 0});
    }
    return out;
}

void save_decomposition(const AtomicDecomposition& f, const fs::path& file) {
    CsvTable rows;
    fs::path dir = file.parent_path();
    std::string stem = file.stem().string();
    for (std::size_t i = 0; i < f.terms.size(); ++i) {
        const auto& t = f.terms[i];
        std::string name = stem + "_profiles/atom_" + std::to_string(i) + ".txt";
        write_file(dir / name, to_text(t.atom.profile));
        rows.push_back({format_double(t.coefficient), format_double(t.atom.support.center()),
                        format_double(t.atom.support.radius()), name});
    }
    write_file(file, to_csv({"alpha", "center", "radius", "profile_file"}, rows));
}

// ---------------------------------------------------------------- batteries

namespace {

// Portable uniform draws from a fixed engine, so batteries match across standard libraries.
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)) % (hi - lo + 1); }
};

std::uint64_t mix_seed(std::uint64_t seed, double a, double b) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (double v : {a, b}) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

// Random step values on [lo, hi] with zero m-integral, scaled to sup = scale.
StepFunction random_mean_zero(Rng& rng, double lo, double hi, double scale, BesselParam lam) {
    int cells = rng.integer(2, 6);
    std::vector<double> br{lo, hi};
    for (int i = 1; i < cells; ++i) br.push_back(rng.uniform(lo, hi));
    std::sort(br.begin(), br.end());
    br.erase(std::unique(br.begin(), br.end()), br.end());
    std::vector<double> v(br.size() - 1);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    StepFunction f(br, v);
    double mean = integrate(f, lam) / measure(lo, hi, lam);
    f = f - StepFunction::indicator(lo, hi, mean);
    double sup = f.sup_norm();
    if (sup == 0.0) return StepFunction({lo, 0.5 * (lo + hi), hi}, {scale, -scale * measure(lo, 0.5 * (lo + hi), lam) / measure(0.5 * (lo + hi), hi, lam)});
    return (scale / sup) * f;
}

}  // namespace

Battery battery_generate(std::uint64_t seed, double lambda, double p, double M, int atoms, int symbols) {
    BesselParam lam(lambda);
    if (!p_range(lam).contains(p)) throw ConfigError("battery: p outside " + describe_p_range(lam));
    Rng rng(mix_seed(seed, lambda, p));
    Battery b{lambda, p, M, {}, {}, p < 1.0 ? 1.0 / p - 1.0 : 0.0};
    for (int i = 0; i < atoms; ++i) {
        double r = rng.log_uniform(1e-2, 10.0);
        double ratio;
        std::string regime;
        switch (i % 5) {
            case 0:
            case 1:
                ratio = rng.log_uniform(4.0, 1.9 * M);
                regime = "euclidean";
                break;
            case 2:
                ratio = rng.log_uniform(0.25, 1.5);
                regime = "near-origin";
                break;
            default:
                ratio = rng.log_uniform(2.05 * M, 128.0 * M);
                regime = "case-b";
                break;
        }
        Interval I(ratio * r, r);
        double lo = I.lo(), hi = I.hi();
        double scale = rng.uniform(0.5, 1.0) * std::pow(measure(I, lam), -1.0 / p);
        b.atoms.push_back({i, regime, Atom{I, random_mean_zero(rng, lo, hi, scale, lam), p}});
    }
    for (int s = 0; s < symbols; ++s) {
        SymbolSpec sp{s, s == 0 ? "canonical" : "random", {}, {}};
        if (s == 0) {
            sp.weights = {1.0};
            sp.centers = {0.0};
        } else {
            // centers -m(0, x_k) <= 0: each term (m(0, x) + m(0, x_k))^alpha is smooth on
            // (0, inf) with Lip_alpha seminorm at most |w_k|
            int terms = rng.integer(1, 3);
            for (int t = 0; t < terms; ++t) {
                sp.weights.push_back(rng.uniform(-1.0, 1.0));
                double x = rng.log_uniform(1e-2, 1e4);
                sp.centers.push_back(-measure(0.0, x, lam));
            }
        }
        b.symbols.push_back(std::move(sp));
    }
    return b;
}

double symbol_value(const SymbolSpec& s, double alpha, double x, BesselParam lam) {
    double m = measure(0.0, x, lam), acc = 0.0;
    for (std::size_t k = 0; k < s.weights.size(); ++k) acc += s.weights[k] * std::pow(std::abs(m - s.centers[k]), alpha);
    return acc;
}

LipschitzSymbol make_symbol(const SymbolSpec& s, double alpha, double lo, double hi, BesselParam lam, int cells) {
    if (!(hi > lo && lo >= 0.0)) throw ConfigError("symbol domain must satisfy 0 <= lo < hi");
    std::vector<double> part;
    if (lo == 0.0) {
        double first = hi * 1e-9;
        part.push_back(0.0);
        for (int i = 0; i <= cells; ++i) part.push_back(first * std::pow(hi / first, double(i) / cells));
    } else {
        for (int i = 0; i <= cells; ++i) part.push_back(lo * std::pow(hi / lo, double(i) / cells));
    }
    part.front() = lo;
    part.back() = hi;
    return LipschitzSymbol::from_function([&](double x) { return symbol_value(s, alpha, x, lam); }, alpha, part, lam);
}

LipschitzSymbol pairing_symbol(const SymbolSpec& s, double alpha, const FactorizationResult& res, BesselParam lam,
                               int log_cells, int cells_per_atom) {
    double hi = 0.0;
    for (const auto& t : res.input.terms) hi = std::max(hi, t.atom.support.hi());
    for (const auto& L : res.levels)
        for (const auto& q : L.pairs) hi = std::max({hi, q.g_support.hi(), q.h.support_hi()});
    if (!(hi > 0.0)) throw ConfigError("pairing_symbol: factorization has no supports");
    hi *= 4.0;
    std::vector<double> part{0.0};
    for (int i = 0; i <= log_cells; ++i) part.push_back(hi * std::pow(1e-9, 1.0 - double(i) / log_cells));
    part.back() = hi;
    for (const auto& t : res.input.terms)
        part = merge_partitions(part, uniform_partition(t.atom.support.lo(), t.atom.support.hi(), cells_per_atom));
    return LipschitzSymbol::from_function([&](double x) { return symbol_value(s, alpha, x, lam); }, alpha, part, lam);
}

std::string battery_csv(const Battery& b) {
    CsvTable rows;
    for (const auto& a : b.atoms) {
        std::string br, vals;
        for (double x : a.atom.profile.breakpoints()) br += (br.empty() ? "" : " ") + format_double(x);
        for (double x : a.atom.profile.values()) vals += (vals.empty() ? "" : " ") + format_double(x);
        rows.push_back({"atom", std::to_string(a.id), a.regime, format_double(a.atom.support.center()),
                        format_double(a.atom.support.radius()), br, vals});
    }
    for (const auto& s : b.symbols) {
        std::string w, c;
        for (double x : s.weights) w += (w.empty() ? "" : " ") + format_double(x);
        for (double x : s.centers) c += (c.empty() ? "" : " ") + format_double(x);
        rows.push_back({"symbol", std::to_string(s.id), s.kind, "", "", w, c});
    }
    return to_csv({"kind", "id", "regime", "center", "radius", "breakpoints", "values"}, rows);
}

std::vector<TwoBumpFunction> two_bump_battery(std::uint64_t seed, BesselParam lam, int cases) {
    Rng rng(mix_seed(seed, lam.lambda(), -1.0));
    std::vector<TwoBumpFunction> out;
    for (int c = 0; c < cases; ++c) {
        double r = rng.log_uniform(1e-2, 10.0);
        double x1 = r * rng.log_uniform(0.5, 1e4);
        double sep = r * rng.log_uniform(4.0, 1e4);
        double x2 = (x1 - sep > 0.0 && rng.uniform() < 0.5) ? x1 - sep : x1 + sep;
        Interval I1(x1, r), I2(x2, r);
        double c1 = rng.uniform(0.1, 1.0) * std::pow(measure(I1, lam), -1.0);
        StepFunction f1 = random_mean_zero(rng, I1.lo(), I1.hi(), c1, lam) +
                          StepFunction::indicator(I1.lo(), I1.hi(), rng.uniform(-0.5, 0.5) * c1);
        StepFunction f2 = random_mean_zero(rng, I2.lo(), I2.hi(), rng.uniform(0.1, 1.0) / measure(I2, lam), lam);
        f2 = f2 - StepFunction::indicator(I2.lo(), I2.hi(), integrate(f1, lam) / measure(I2, lam));
        out.push_back({f1, f2, x1, x2, r, f1.sup_norm(), f2.sup_norm()});
    }
    return out;
}

// ---------------------------------------------------------------- kernel scan

KernelScan kernel_scan(BesselParam lam, const QuadratureSpec& spec, int grid, double lo, double hi) {
    KernelEvaluator k(lam, spec);
    KernelScan s;
    s.lambda = lam.lambda();
    const double span = std::log(hi / lo);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            double x = lo * std::exp(span * i / grid), y = lo * std::exp(span * (j + 0.5) / grid);
            Estimate e = k.riesz(x, y);
            double ratio = std::abs(e.value) * measure(Interval(x, std::abs(x - y)), lam);
            s.x.push_back(x);
            s.y.push_back(y);
            s.value.push_back(e.value);
            s.bound_ratio.push_back(ratio);
            s.error.push_back(e.error);
            s.C_scan = std::max(s.C_scan, ratio);
        }
    return s;
}

RunReport run_kernel_scan(const ExperimentConfig& cfg) {
    cfg.validate();
    RunReport rep;
    CsvTable rows;
    json summary = json::array();
    for (double l : cfg.lambda_list) {
        BesselParam lam(l);
        KernelScan s = kernel_scan(lam, cfg.quadrature, cfg.scan_grid, cfg.scan_lo, cfg.scan_hi);
        KernelScan s2 = kernel_scan(lam, cfg.quadrature.with_nodes(2 * cfg.quadrature.nodes_per_panel), cfg.scan_grid,
                                    cfg.scan_lo, cfg.scan_hi);
        bool finite = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            finite = finite && std::isfinite(s.bound_ratio[i]);
            rows.push_back({format_double(l), format_double(s.x[i]), format_double(s.y[i]), format_double(s.value[i]),
                            format_double(s.bound_ratio[i]), format_double(s.error[i])});
        }
        double drift = std::abs(s2.C_scan / s.C_scan - 1.0);
        if (!finite) rep.failures.push_back("lambda " + format_double(l) + ": non-finite bound ratio");
        if (!(drift <= 0.05)) rep.failures.push_back("lambda " + format_double(l) + ": C_scan drifts under node doubling");
        summary.push_back({{"lambda", l}, {"C_scan", s.C_scan}, {"C_scan_doubled_nodes", s2.C_scan}, {"drift", drift}});
    }
    fs::path csv = cfg.output_dir / "kernel_scan.csv", js = cfg.output_dir / "kernel_scan.json";
    write_file(csv, to_csv({"lambda", "x", "y", "R_value", "bound_ratio", "quad_error_estimate"}, rows));
    write_file(js, summary.dump(2) + "\n");
    rep.artifacts = {csv, js};
    rep.status = rep.failures.empty() ? 0 : 1;
    return rep;
}

// ---------------------------------------------------------------- atom demo

RunReport run_atom_demo(const ExperimentConfig& cfg) {
    cfg.validate();
    RunReport rep;
    CsvTable rows;
    json summary = json::array();
    for (double l : cfg.lambda_list) {
        BesselParam lam(l);
        auto battery = two_bump_battery(cfg.seed, lam, cfg.two_bump_cases);
        for (double p : cfg.p_list) {
            double C = 0.0, Cp = 0.0, recon = 0.0;
            bool atoms_ok = true;
            for (std::size_t c = 0; c < battery.size(); ++c) {
                const TwoBumpFunction& f = battery[c];
                TwoBumpDecomposition d = decompose_two_bump(f, p, lam);
                StepFunction diff = d.decomposition.reconstruct() - f.sum();
                recon = std::max(recon, diff.sup_norm() / std::max(f.C1, f.C2));
                for (const auto& t : d.decomposition.terms) {
                    atoms_ok = atoms_ok && validate_atom(t.atom, lam).valid();
                    const double Ci = t.bump == 1 ? f.C1 : f.C2, xi = t.bump == 1 ? f.x1 : f.x2;
                    double ref = std::pow(2.0, t.level * (1.0 / p - 1.0)) * Ci *
                                 std::pow(measure(Interval(xi, f.r), lam), 1.0 / p);
                    double ratio = std::abs(t.coefficient) / ref;
                    C = std::max(C, ratio);
                    rows.push_back({format_double(l), format_double(p), std::to_string(c), std::to_string(t.level),
                                    std::to_string(t.bump), format_double(t.atom.support.lo()),
                                    format_double(t.atom.support.hi()), format_double(t.coefficient),
                                    format_double(ratio)});
                }
                Cp = std::max(Cp, d.bound / two_bump_closed_form_bound(f, p, lam));
            }
            if (!(recon <= 1e-12)) rep.failures.push_back("reconstruction error " + format_double(recon));
            if (!atoms_ok) rep.failures.push_back("an atom failed validation");
            summary.push_back({{"lambda", l}, {"p", p}, {"cases", battery.size()}, {"reconstruction_error", recon},
                               {"atoms_valid", atoms_ok}, {"C_coefficients", C}, {"C_closed_form", Cp}});
        }
    }
    fs::path csv = cfg.output_dir / "atom_demo.csv", js = cfg.output_dir / "atom_demo.json";
    write_file(csv, to_csv({"lambda", "p", "case", "level", "bump", "lo", "hi", "alpha", "bound_ratio"}, rows));
    write_file(js, summary.dump(2) + "\n");
    rep.artifacts = {csv, js};
    rep.status = rep.failures.empty() ? 0 : 1;
    return rep;
}

// ---------------------------------------------------------------- factorize

std::string factorization_ledger_json(const FactorizationResult& res, int indent) {
    const ConstantSchedule& s = res.schedule;
    json j;
    j["lambda"] = s.lambda;
    j["p"] = s.p;
    j["schedule"] = {{"K0", s.K0},       {"M", s.M},
                     {"M_minimal", s.M_minimal}, {"doublings", s.doublings},
                     {"probe_eps", s.probe_eps}, {"epsilon", s.epsilon},
                     {"q", s.q},         {"r", s.r},
                     {"K1", s.regime.K1}, {"K2", s.regime.K2}};
    j["input_atoms"] = res.input.terms.size();
    j["input_tally"] = res.input.tally();
    json levels = json::array();
    for (std::size_t k = 0; k < res.levels.size(); ++k) {
        const LevelRecord& L = res.levels[k];
        json pairs = json::array();
        for (std::size_t i = 0; i < L.pairs.size(); ++i)
            pairs.push_back({{"alpha", L.alphas[i]},
                             {"y0", L.pairs[i].y0},
                             {"case", L.pairs[i].tag == ApproxCase::a ? "a" : "b"},
                             {"product_norm", L.pairs[i].product_norm}});
        levels.push_back({{"level", k + 1},
                          {"tally", L.tally},
                          {"carried_tally", L.carried_tally},
                          {"bound", L.bound},
                          {"max_eps", L.max_eps},
                          {"max_cancellation", L.max_cancellation},
                          {"processed", L.processed},
                          {"carried", L.carried},
                          {"children", L.children},
                          {"pairs", std::move(pairs)}});
    }
    j["levels"] = std::move(levels);
    j["residual_bounds"] = res.residual_bounds;
    j["eC_emp"] = res.eC_emp;
    j["eC_ratio"] = res.eC_ratio;
    return j.dump(indent) + "\n";
}

std::string factorization_levels_csv(const FactorizationResult& res) {
    CsvTable rows;
    for (std::size_t k = 0; k < res.levels.size(); ++k) {
        const LevelRecord& L = res.levels[k];
        rows.push_back({format_double(res.schedule.lambda), format_double(res.schedule.p), std::to_string(k + 1),
                        std::to_string(L.processed), std::to_string(L.carried), std::to_string(L.children),
                        std::to_string(L.case_a), std::to_string(L.case_b), format_double(L.tally),
                        format_double(L.carried_tally), format_double(L.bound),
                        format_double(res.residual_bounds[k + 1] / res.residual_bounds[k]), format_double(L.max_eps)});
    }
    return to_csv({"lambda", "p", "level", "processed", "carried", "children", "case_a", "case_b", "tally",
                   "carried_tally", "bound", "ratio", "max_eps"},
                  rows);
}

RunReport run_factorize(const ExperimentConfig& cfg) {
    cfg.validate();
    RunReport rep;
    std::string csv;
    for (double l : cfg.lambda_list)
        for (double p : cfg.p_list) {
            const std::string tag = "l" + format_double(l) + "_p" + format_double(p);
            KernelEvaluator k(BesselParam(l), cfg.quadrature);
            ScheduleOptions so;
            so.epsilon = cfg.epsilon;
            so.q = cfg.q;
            so.r = cfg.r;
            so.resolution = cfg.resolution;
            ConstantSchedule s = cfg.M > 0.0 ? make_schedule(k, p, cfg.M, so) : select_schedule(k, p, so);
            AtomicDecomposition f;
            if (!cfg.input.empty()) {
                f = load_decomposition(cfg.input, p);
            } else {
                Battery b = battery_generate(cfg.seed, l, p, s.M, cfg.battery_atoms, 0);
                Rng rng(mix_seed(cfg.seed, l, p + 17.0));
                f.p = p;
                for (auto& a : b.atoms)
                    f.terms.push_back({rng.uniform(0.2, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0), a.atom, 0, 0});
                save_decomposition(f, cfg.output_dir / ("battery_" + tag + ".csv"));
            }
            FactorizeOptions fo;
            fo.approx.resolution = cfg.resolution;
            fo.tail_fraction = cfg.tail_fraction;
            fo.threads = cfg.thread_count();
            fo.keep_pairs = false;
            try {
                FactorizationResult res = weak_factorize(f, s, cfg.K_max, k, fo);
                fs::path js = cfg.output_dir / ("factorize_" + tag + ".json");
                write_file(js, factorization_ledger_json(res));
                rep.artifacts.push_back(js);
                std::string part = factorization_levels_csv(res);
                csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
                for (std::size_t i = 1; i < res.residual_bounds.size(); ++i) {
                    if (!(res.residual_bounds[i] < res.residual_bounds[i - 1]))
                        rep.failures.push_back(tag + ": bound did not decrease at level " + std::to_string(i));
                    if (!(res.residual_bounds[i] <= res.eC_emp * res.residual_bounds[i - 1]))
                        rep.failures.push_back(tag + ": level " + std::to_string(i) + " ratio exceeds eC_emp");
                }
                for (const auto& L : res.levels)
                    if (!(L.max_eps < s.epsilon)) rep.failures.push_back(tag + ": certified eps reached epsilon");
            } catch (const DivergenceDetected& e) {
                rep.failures.push_back(tag + ": " + e.what());
            } catch (const DegenerateDenominator& e) {
                rep.failures.push_back(tag + ": " + e.what());
            } catch (const HypothesisViolation& e) {
                rep.failures.push_back(tag + ": " + e.what());
            }
        }
    fs::path levels = cfg.output_dir / "factorize_levels.csv";
    write_file(levels, csv);
    rep.artifacts.push_back(levels);
    rep.status = rep.failures.empty() ? 0 : 1;
    return rep;
}

// ---------------------------------------------------------------- commutator bench

namespace {

// Breakpoints used to sample symbols and integrate around one atom: `cells` uniform
// cells on the support, doubling cells out to 4096 (hi + width) and in toward 0.
std::vector<double> bench_grid(const StepFunction& f, int cells) {
    const double lo = f.support_lo(), hi = f.support_hi(), w = hi - lo, h = w / cells;
    std::vector<double> g = merge_partitions(uniform_partition(lo, hi, cells), f.breakpoints());
    g = merge_partitions(g, graded_toward_lo(hi, 4096.0 * (hi + w), h));
    if (lo > 0.0) g = merge_partitions(g, graded_toward_hi(0.0, lo, h));
    return g;
}

std::vector<double> midpoint_refine(const std::vector<double>& g) {
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
        out.push_back(g[i]);
        out.push_back(0.5 * (g[i] + g[i + 1]));
    }
    out.push_back(g.back());
    return out;
}

// One y-point of a fixed rule for (b(x) - b(y)) f(y) R(x, y) dm(y) at a given x: the
// weight carries f, the kernel and the measure; m(0, y) and m(y, x) (signed) are kept so
// that symbol differences can be formed without cancellation.
struct RulePoint {
    double w, my, dm;
};

// Composite Gauss rule over [lo, hi], graded toward the pole x when it is close to an end.
void add_piece(std::vector<RulePoint>& out, double x, double lo, double hi, double fv, bool pole_at_lo,
               const KernelEvaluator& k) {
    const BesselParam lam = k.param();
    const double w2 = 2.0 * lam.lambda(), w = hi - lo;
    const double d = pole_at_lo ? lo - x : x - hi;  // 0 when x is the endpoint
    std::vector<double> br;
    if (d >= w) br = {lo, hi};
    else {
        double first = std::max({d, 1e-6 * w, 1e-9 * x});
        br = pole_at_lo ? graded_toward_lo(lo, hi, first) : graded_toward_hi(lo, hi, first);
    }
    // four nodes suffice once the pole is four widths away (ellipse parameter ~18)
    const GaussLegendre& rule = GaussLegendre::get(d >= 4.0 * w ? 4 : 8);
    const double mx = measure(0.0, x, lam);
    for (std::size_t j = 0; j + 1 < br.size(); ++j) {
        double c = 0.5 * (br[j] + br[j + 1]), h = 0.5 * (br[j + 1] - br[j]);
        for (int q = 0; q < rule.size(); ++q) {
            double y = c + h * rule.nodes[q];
            double my = measure(0.0, y, lam);
            double dm = std::abs(mx - my) < 1e-3 * mx ? (y < x ? measure(y, x, lam) : -measure(x, y, lam)) : mx - my;
            out.push_back({fv * h * rule.weights[q] * k.riesz(x, y).value * std::pow(y, w2), my, dm});
        }
    }
}

// b(x) - b(y) for b = sum_k w_k |m(0, .) - s_k|^alpha, given m(0, y) and m(0, x) - m(0, y).
double symbol_difference(const SymbolSpec& s, double alpha, double my, double dm) {
    double acc = 0.0;
    for (std::size_t t = 0; t < s.weights.size(); ++t) {
        double v = my - s.centers[t], u = v + dm;
        double term;
        if (v != 0.0 && (u > 0.0) == (v > 0.0)) {
            double av = std::abs(v), rel = (v > 0.0 ? dm : -dm) / av;
            term = std::pow(av, alpha) * std::expm1(alpha * std::log1p(rel));
        } else {
            term = std::pow(std::abs(u), alpha) - std::pow(std::abs(v), alpha);
        }
        acc += s.weights[t] * term;
    }
    return acc;
}

struct NormResult {
    std::vector<double> ratio;  // per (alpha, symbol)
};

// ||[b, R]f||_q / (lip(b) ||f||_p) for every (alpha, symbol), with b exact and the outer
// q-norm integrated by GL-4 on `grid`. `lips` holds one seminorm per (alpha, symbol).
NormResult bench_norms(const StepFunction& f, const std::vector<double>& grid, const Battery& bat,
                       const std::vector<double>& alphas, const std::vector<double>& lips, double p_in,
                       const KernelEvaluator& k) {
    const BesselParam lam = k.param();
    const double w2 = 2.0 * lam.lambda();
    const GaussLegendre& rule = GaussLegendre::get(4);
    struct Node {
        double weight;  // GL weight times x^{2 lambda}
        std::vector<RulePoint> pts;
    };
    std::vector<Node> nodes;
    for (std::size_t c = 0; c + 1 < grid.size(); ++c) {
        double mid = 0.5 * (grid[c] + grid[c + 1]), half = 0.5 * (grid[c + 1] - grid[c]);
        for (int q = 0; q < rule.size(); ++q) {
            double x = mid + half * rule.nodes[q];
            Node n{half * rule.weights[q] * std::pow(x, w2), {}};
            for (std::size_t i = 0; i < f.cells(); ++i) {
                double fv = f.values()[i], lo = f.cell_lo(i), hi = f.cell_hi(i);
                if (fv == 0.0) continue;
                if (x > lo && x < hi) {
                    add_piece(n.pts, x, lo, x, fv, false, k);
                    add_piece(n.pts, x, x, hi, fv, true, k);
                } else {
                    add_piece(n.pts, x, lo, hi, fv, x <= lo, k);
                }
            }
            nodes.push_back(std::move(n));
        }
    }
    const double fnorm = lp_norm(f, p_in, lam);
    NormResult out;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const double alpha = alphas[ai], q = 1.0 / (1.0 / p_in - alpha);
        for (std::size_t s = 0; s < bat.symbols.size(); ++s) {
            const SymbolSpec& sym = bat.symbols[s];
            double acc = 0.0;
            for (const Node& n : nodes) {
                double v = 0.0;
                for (const RulePoint& rp : n.pts) v += rp.w * symbol_difference(sym, alpha, rp.my, rp.dm);
                acc += n.weight * std::pow(std::abs(v), q);
            }
            double lip = lips[ai * bat.symbols.size() + s];
            out.ratio.push_back(lip > 0.0 ? std::pow(acc, 1.0 / q) / (lip * fnorm) : 0.0);
        }
    }
    return out;
}
}  // namespace

std::vector<CommutatorBench> commutator_bench(const Battery& bat, const KernelEvaluator& k,
                                              const std::vector<double>& alphas, double p_in, int points,
                                              int threads, double C_size, int base_cells) {
    const BesselParam lam = k.param();
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0 / lam.dim() && a < 1.0 / p_in))
            throw ConfigError("commutator bench: alpha must lie in (0, min(1/(2 lambda + 1), 1/p_in))");
    const std::size_t na = bat.atoms.size(), ns = bat.symbols.size();
    std::vector<NormResult> coarse(na), fine(na);
    parallel_for(na, threads, [&](std::size_t i) {
        const StepFunction& f = bat.atoms[i].atom.profile;
        std::vector<double> g = bench_grid(f, base_cells), gf = midpoint_refine(g);
        // one seminorm per symbol, sampled on the finer grid, shared by both passes
        std::vector<double> lips;
        for (double alpha : alphas)
            for (const auto& sym : bat.symbols) {
                std::vector<double> bc(gf.size() - 1);
                for (std::size_t c = 0; c + 1 < gf.size(); ++c)
                    bc[c] = symbol_value(sym, alpha, 0.5 * (gf[c] + gf[c + 1]), lam);
                lips.push_back(lip_seminorm(StepFunction(gf, bc), alpha, lam));
            }
        coarse[i] = bench_norms(f, g, bat, alphas, lips, p_in, k);
        fine[i] = bench_norms(f, gf, bat, alphas, lips, p_in, k);
    });

    std::vector<CommutatorBench> out;
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        CommutatorBench b;
        b.lambda = lam.lambda();
        b.p_in = p_in;
        b.alpha = alphas[ai];
        b.q_out = 1.0 / (1.0 / p_in - alphas[ai]);
        b.C_size = C_size;
        for (std::size_t i = 0; i < na; ++i)
            for (std::size_t s = 0; s < ns; ++s) {
                b.atom_id.push_back(bat.atoms[i].id);
                b.symbol_id.push_back(bat.symbols[s].id);
                double r0 = coarse[i].ratio[ai * ns + s], r1 = fine[i].ratio[ai * ns + s];
                b.ratio.push_back(r0);
                b.ratio_refined.push_back(r1);
                b.max_ratio = std::max(b.max_ratio, r0);
                b.max_ratio_refined = std::max(b.max_ratio_refined, r1);
            }
        out.push_back(std::move(b));
    }

    // pointwise domination with the symbols evaluated exactly
    Rng rng(mix_seed(0x5eed, lam.lambda(), p_in));
    struct Probe {
        std::size_t atom, sym, alpha;
        double x;
    };
    std::vector<Probe> probes;
    const std::size_t na_alpha = alphas.size(), total = static_cast<std::size_t>(points) * na_alpha;
    for (std::size_t t = 0; t < total; ++t) {
        std::size_t slot = t / na_alpha;
        Probe pr{slot % na, (slot / na) % ns, t % na_alpha, 0.0};
        const StepFunction& f = bat.atoms[pr.atom].atom.profile;
        double lo = f.support_lo(), hi = f.support_hi(), w = hi - lo;
        double u = rng.uniform();
        if (u < 0.5) pr.x = rng.uniform(lo, hi);
        else if (u < 0.75 || lo <= 0.0) pr.x = hi + w * rng.log_uniform(1e-3, 1e2);
        else pr.x = std::max(lo * 1e-3, lo - w * rng.log_uniform(1e-3, 1e2));
        probes.push_back(pr);
    }
    std::vector<double> lhs(total), err(total), rhs(total);
    parallel_for(probes.size(), threads, [&](std::size_t t) {
        const Probe& pr = probes[t];
        const StepFunction& f = bat.atoms[pr.atom].atom.profile;
        const SymbolSpec& sym = bat.symbols[pr.sym];
        const double alpha = alphas[pr.alpha];
        std::vector<double> g = midpoint_refine(bench_grid(f, base_cells));
        std::vector<double> bc(g.size() - 1);
        for (std::size_t c = 0; c + 1 < g.size(); ++c) bc[c] = symbol_value(sym, alpha, 0.5 * (g[c] + g[c + 1]), lam);
        double lip = lip_seminorm(StepFunction(g, bc), alpha, lam);
        Estimate e = commutator_apply([&](double y) { return symbol_value(sym, alpha, y, lam); }, f, pr.x, k);
        StepFunction af = f;
        {
            std::vector<double> v = f.values();
            for (double& x : v) x = std::abs(x);
            af = StepFunction(f.breakpoints(), v);
        }
        Estimate ia = fractional_integral(af, alpha, pr.x, lam, k.spec());
        lhs[t] = std::abs(e.value);
        err[t] = e.error + ia.error * C_size * lip;
        rhs[t] = C_size * lip * ia.value;
    });
    for (std::size_t t = 0; t < probes.size(); ++t) {
        CommutatorBench& b = out[probes[t].alpha];
        ++b.points;
        if (rhs[t] > 0.0) b.worst_domination = std::max(b.worst_domination, lhs[t] / rhs[t]);
        if (lhs[t] - err[t] > rhs[t] * (1.0 + 1e-9)) ++b.violations;
    }
    return out;
}

RunReport run_commutator_bench(const ExperimentConfig& cfg) {
    cfg.validate();
    RunReport rep;
    CsvTable rows;
    json summary = json::array();
    for (double l : cfg.lambda_list) {
        BesselParam lam(l);
        std::vector<double> alphas, ps;
        for (double p : cfg.p_list)
            if (p < 1.0 && p > 0.5) {
                ps.push_back(p);
                alphas.push_back(1.0 / p - 1.0);
            }
        if (alphas.empty()) {
            rep.failures.push_back("lambda " + format_double(l) + ": no p in (1/2, 1) to set alpha = 1/p - 1");
            continue;
        }
        KernelEvaluator k(lam, cfg.quadrature);
        KernelScan scan = kernel_scan(lam, cfg.quadrature, cfg.scan_grid, cfg.scan_lo, cfg.scan_hi);
        double M = make_schedule(k, ps.front(), 0.0).M_minimal;
        Battery bat = battery_generate(cfg.seed, l, ps.front(), M, cfg.bench_atoms, cfg.bench_symbols);
        auto benches = commutator_bench(bat, k, alphas, cfg.p_in, cfg.bench_points, cfg.thread_count(), scan.C_scan,
                                       cfg.bench_cells);
        for (std::size_t ai = 0; ai < benches.size(); ++ai) {
            const CommutatorBench& b = benches[ai];
            for (std::size_t i = 0; i < b.ratio.size(); ++i)
                rows.push_back({format_double(l), format_double(b.p_in), format_double(b.q_out), format_double(b.alpha),
                                std::to_string(b.symbol_id[i]), std::to_string(b.atom_id[i]), format_double(b.ratio[i]),
                                format_double(b.ratio_refined[i])});
            double drift = std::abs(b.max_ratio_refined / b.max_ratio - 1.0);
            summary.push_back({{"lambda", l},
                               {"p_hardy", ps[ai]},
                               {"p_in", b.p_in},
                               {"q_out", b.q_out},
                               {"alpha", b.alpha},
                               {"C_size", b.C_size},
                               {"points", b.points},
                               {"violations", b.violations},
                               {"worst_domination", b.worst_domination},
                               {"max_ratio", b.max_ratio},
                               {"max_ratio_refined", b.max_ratio_refined},
                               {"refinement_drift", drift}});
            const std::string tag = "lambda " + format_double(l) + " alpha " + format_double(b.alpha);
            if (b.violations > 0) rep.failures.push_back(tag + ": pointwise domination violated");
            if (!(drift <= 0.1)) rep.failures.push_back(tag + ": operator-norm ratio moved over 10% under refinement");
        }
    }
    fs::path csv = cfg.output_dir / "commutator_bench.csv", js = cfg.output_dir / "commutator_bench.json";
    write_file(csv, to_csv({"lambda", "p", "q", "alpha", "symbol_id", "atom_id", "ratio", "ratio_refined"}, rows));
    write_file(js, summary.dump(2) + "\n");
    rep.artifacts = {csv, js};
    rep.status = rep.failures.empty() ? 0 : 1;
    return rep;
}

}  // namespace hardy
