#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace dcfr {

// Gauss-Legendre rule on [-1,1]. Supported point counts: 1..8.
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
const GaussRule& gauss_legendre(int points);

// Integrates f over [lo,hi] with `panels` equal panels of the given rule.
template <class F>
double gauss_integrate(F&& f, double lo, double hi, int panels = 1, int points = 8) {
    const GaussRule& g = gauss_legendre(points);
    const double h = (hi - lo) / panels;
    double sum = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = lo + (p + 0.5) * h;
        for (std::size_t q = 0; q < g.nodes.size(); ++q)
            sum += g.weights[q] * f(mid + 0.5 * h * g.nodes[q]);
    }
    return 0.5 * h * sum;
}

// Composite trapezoid weights for nodes t.
std::vector<double> trapezoid_weights(std::span<const double> t);

// out[j] = integral from t[0] to t[j] of the piecewise-linear interpolant of f.
void cumulative_trapezoid(std::span<const double> t, std::span<const double> f, std::span<double> out);

double trapezoid(std::span<const double> t, std::span<const double> f);

std::vector<double> linspace(double a, double b, std::size_t m);

} // namespace dcfr
