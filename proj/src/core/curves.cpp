#include "curves.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"
#include "quadrature.hpp"

namespace dcfr {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.size() < 4) throw ContractError("time grid needs at least 4 points");
    for (std::size_t j = 1; j < points_.size(); ++j)
        if (!(points_[j] > points_[j - 1])) throw ContractError("time grid must be strictly increasing");
    const double h = (b() - a()) / static_cast<double>(points_.size() - 1);
    uniform_ = true;
    for (std::size_t j = 0; j < points_.size(); ++j)
        if (std::abs(points_[j] - (a() + h * static_cast<double>(j))) > 1e-12 * (b() - a())) {
            uniform_ = false;
            break;
        }
}

TimeGrid TimeGrid::uniform(double a, double b, std::size_t m) { return TimeGrid(linspace(a, b, m)); }

std::size_t TimeGrid::panel(double t) const {
    const std::size_t last = points_.size() - 2;
    if (uniform_) {
        const double h = (b() - a()) / static_cast<double>(points_.size() - 1);
        auto j = static_cast<std::ptrdiff_t>((t - a()) / h);
        j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(last));
        std::size_t k = static_cast<std::size_t>(j);
        // guard against rounding at panel boundaries
        if (t < points_[k] && k > 0) --k;
        else if (t > points_[k + 1] && k < last) ++k;
        return k;
    }
    auto it = std::upper_bound(points_.begin(), points_.end(), t);
    std::ptrdiff_t j = (it - points_.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(last)));
}

Curve::Curve(TimeGrid grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
    const std::size_t m = grid_.size();
    if (values_.size() != m) throw ContractError("curve values do not match grid length");
    // Natural cubic spline: tridiagonal system for interior second derivatives.
    second_.assign(m, 0.0);
    std::vector<double> diag(m, 0.0), rhs(m, 0.0), upper(m, 0.0);
    for (std::size_t j = 1; j + 1 < m; ++j) {
        const double h0 = grid_[j] - grid_[j - 1];
        const double h1 = grid_[j + 1] - grid_[j];
        diag[j] = 2.0 * (h0 + h1);
        upper[j] = h1;
        rhs[j] = 6.0 * ((values_[j + 1] - values_[j]) / h1 - (values_[j] - values_[j - 1]) / h0);
    }
    // Thomas algorithm on rows 1..m-2; the sub-diagonal of row j is h_{j-1}.
    for (std::size_t j = 2; j + 1 < m; ++j) {
        const double lower = grid_[j] - grid_[j - 1];
        const double f = lower / diag[j - 1];
        diag[j] -= f * upper[j - 1];
        rhs[j] -= f * rhs[j - 1];
    }
    for (std::size_t j = m - 2; j >= 1; --j) {
        const double next = (j + 1 < m - 1) ? second_[j + 1] : 0.0;
        second_[j] = (rhs[j] - upper[j] * next) / diag[j];
        if (j == 1) break;
    }
}

Curve Curve::sample(const TimeGrid& grid, const std::function<double(double)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) v[j] = f(grid[j]);
    return Curve(grid, std::move(v));
}

Curve Curve::constant(const TimeGrid& grid, double c) { return Curve(grid, std::vector<double>(grid.size(), c)); }

double Curve::eval(double t, int order) const {
    if (!grid_.contains(t)) {
        std::ostringstream os;
        os << "t=" << t << " outside [" << a() << "," << b() << "]";
        throw DomainError(os.str());
    }
    if (order != 0 && order != 1) throw ContractError("curve evaluation order must be 0 or 1");
    return eval_unchecked(t, order);
}

double Curve::eval_unchecked(double t, int order) const {
    const std::size_t j = grid_.panel(t);
    const double x0 = grid_[j], x1 = grid_[j + 1];
    const double h = x1 - x0;
    const double A = (x1 - t) / h;
    const double B = (t - x0) / h;
    const double m0 = second_[j], m1 = second_[j + 1];
    if (order == 0) {
        if (t == x0) return values_[j];
        if (t == x1) return values_[j + 1];
        return A * values_[j] + B * values_[j + 1] + ((A * A * A - A) * m0 + (B * B * B - B) * m1) * h * h / 6.0;
    }
    return (values_[j + 1] - values_[j]) / h - (3.0 * A * A - 1.0) / 6.0 * h * m0 + (3.0 * B * B - 1.0) / 6.0 * h * m1;
}

CurveSample::CurveSample(TimeGrid g, std::vector<Curve> c) : grid(std::move(g)), curves(std::move(c)) {
    if (curves.empty()) throw ContractError("curve sample must contain at least one curve");
    for (const Curve& cv : curves)
        if (!(cv.grid() == grid)) throw ContractError("all curves in a sample must share one grid");
}

double inner_product(const Curve& f, const Curve& g, std::size_t resolution) {
    if (f.a() != g.a() || f.b() != g.b()) throw DomainError("inner product of curves on different intervals");
    std::vector<double> nodes;
    nodes.reserve(f.grid().size() + g.grid().size() + resolution);
    for (double t : f.grid().points()) nodes.push_back(t);
    for (double t : g.grid().points()) nodes.push_back(t);
    if (resolution >= 2)
        for (double t : linspace(f.a(), f.b(), resolution)) nodes.push_back(t);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

    const GaussRule& rule = gauss_legendre(4);
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        const double lo = nodes[j], hi = nodes[j + 1];
        const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double panel = 0.0;
        for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
            const double t = mid + half * rule.nodes[q];
            panel += rule.weights[q] * f.eval_unchecked(t, 0) * g.eval_unchecked(t, 0);
        }
        sum += half * panel;
    }
    return sum;
}

double l2_norm(const Curve& f, std::size_t resolution) {
    return std::sqrt(std::max(0.0, inner_product(f, f, resolution)));
}

Curve compose_warp(const Curve& f, const std::function<double(double)>& w) {
    const TimeGrid& grid = f.grid();
    std::vector<double> v(grid.size());
    double prev = -INFINITY;
    const double tol = 1e-12 * (f.b() - f.a());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        double u = w(grid[j]);
        if (!(u > prev)) throw DomainError("warp is not strictly increasing");
        if (u < f.a() - tol || u > f.b() + tol) throw DomainError("warp leaves [a,b]");
        prev = u;
        u = std::clamp(u, f.a(), f.b());
        v[j] = f.eval_unchecked(u, 0);
    }
    return Curve(grid, std::move(v));
}

} // namespace dcfr
