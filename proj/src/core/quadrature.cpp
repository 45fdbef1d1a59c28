#include "quadrature.hpp"

#include <cmath>
#include <numbers>

#include "errors.hpp"

namespace dcfr {

namespace {

// (P_n(x), P_n'(x)) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    return {p1, n * (x * p1 - p0) / (x * x - 1.0)};
}

GaussRule build_rule(int n) {
    GaussRule g;
    if (n == 1) {
        g.nodes = {0.0};
        g.weights = {2.0};
        return g;
    }
    g.nodes.resize(n);
    g.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            const auto [p, dp] = legendre(n, x);
            const double dx = p / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double dp = legendre(n, x).second;
        g.nodes[i] = x;
        g.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return g;
}

} // namespace

const GaussRule& gauss_legendre(int points) {
    static const std::array<GaussRule, 8> rules = [] {
        std::array<GaussRule, 8> r;
        for (int n = 1; n <= 8; ++n) r[n - 1] = build_rule(n);
        return r;
    }();
    if (points < 1 || points > 8) throw ContractError("Gauss-Legendre rule supports 1..8 points");
    return rules[points - 1];
}

std::vector<double> trapezoid_weights(std::span<const double> t) {
    std::vector<double> w(t.size(), 0.0);
    for (std::size_t j = 0; j + 1 < t.size(); ++j) {
        const double h = 0.5 * (t[j + 1] - t[j]);
        w[j] += h;
        w[j + 1] += h;
    }
    return w;
}

void cumulative_trapezoid(std::span<const double> t, std::span<const double> f, std::span<double> out) {
    double acc = 0.0;
    out[0] = 0.0;
    for (std::size_t j = 1; j < t.size(); ++j) {
        acc += 0.5 * (t[j] - t[j - 1]) * (f[j] + f[j - 1]);
        out[j] = acc;
    }
}

double trapezoid(std::span<const double> t, std::span<const double> f) {
    double acc = 0.0;
    for (std::size_t j = 1; j < t.size(); ++j) acc += 0.5 * (t[j] - t[j - 1]) * (f[j] + f[j - 1]);
    return acc;
}

std::vector<double> linspace(double a, double b, std::size_t m) {
    std::vector<double> v(m);
    if (m == 1) {
        v[0] = a;
        return v;
    }
    for (std::size_t j = 0; j < m; ++j) v[j] = a + (b - a) * static_cast<double>(j) / static_cast<double>(m - 1);
    v[m - 1] = b;
    return v;
}

} // namespace dcfr
