#include "hardy/quadrature.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace hardy {

void QuadratureSpec::validate() const {
    if (!(rel_tol > 0.0)) throw ConfigError("quadrature rel_tol must be positive");
    if (max_subdivisions < 1) throw ConfigError("quadrature max_subdivisions must be >= 1");
    if (nodes_per_panel < 1 || nodes_per_panel > 256)
        throw ConfigError("quadrature nodes_per_panel must be in [1, 256]");
}

// Newton iteration on P_n from the Chebyshev-like initial guesses.
GaussLegendre::GaussLegendre(int n) : nodes(n), weights(n) {
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int k = 1; k <= n; ++k) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
            }
            dp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        // recompute derivative at the converged point
        double p0 = 1.0, p1 = 0.0;
        for (int k = 1; k <= n; ++k) {
            double p2 = p1;
            p1 = p0;
            p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
        }
        dp = n * (z * p0 - p1) / (z * z - 1.0);
        double w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
}

const GaussLegendre& GaussLegendre::get(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<GaussLegendre>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GaussLegendre>(n);
    return *slot;
}

std::vector<double> graded_toward_lo(double a, double b, double first) {
    std::vector<double> br{a};
    double w = first;
    while (a + w < b && w > 0.0) {
        br.push_back(a + w);
        w *= 2.0;
    }
    br.push_back(b);
    // avoid a sliver at the far end
    if (br.size() > 2 && (b - br[br.size() - 2]) < 0.25 * (br[br.size() - 2] - br[br.size() - 3]))
        br.erase(br.end() - 2);
    return br;
}

std::vector<double> graded_toward_hi(double a, double b, double first) {
    std::vector<double> br = graded_toward_lo(0.0, b - a, first);
    std::vector<double> out(br.size());
    for (std::size_t i = 0; i < br.size(); ++i) out[br.size() - 1 - i] = b - br[i];
    out.front() = a;
    out.back() = b;
    return out;
}

}  // namespace hardy
