#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace dcfr {

/// Strictly increasing sampling times on [a,b], endpoints included, at least 4 points.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(std::vector<double> points);
    static TimeGrid uniform(double a, double b, std::size_t m);

    double a() const { return points_.front(); }
    double b() const { return points_.back(); }
    std::size_t size() const { return points_.size(); }
    double operator[](std::size_t j) const { return points_[j]; }
    std::span<const double> points() const { return points_; }
    bool contains(double t) const { return t >= a() && t <= b(); }

    // Index j of the panel [t_j, t_{j+1}] containing t (t must lie in [a,b]).
    std::size_t panel(double t) const;

    bool operator==(const TimeGrid& o) const { return points_ == o.points_; }

private:
    std::vector<double> points_;
    bool uniform_ = false;
};

/// A smooth function on [a,b] stored as grid values with a natural cubic interpolant.
/// Immutable once constructed.
class Curve {
public:
    Curve() = default;
    Curve(TimeGrid grid, std::vector<double> values);
    static Curve sample(const TimeGrid& grid, const std::function<double(double)>& f);
    static Curve constant(const TimeGrid& grid, double c);

    const TimeGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    double a() const { return grid_.a(); }
    double b() const { return grid_.b(); }

    /// Interpolant value (order 0) or first derivative (order 1). Throws DomainError outside [a,b].
    double eval(double t, int order = 0) const;
    double operator()(double t) const { return eval(t, 0); }
    double deriv(double t) const { return eval(t, 1); }

    // Unchecked fast path for callers that already clamp t into [a,b].
    double eval_unchecked(double t, int order) const;

private:
    TimeGrid grid_;
    std::vector<double> values_;
    std::vector<double> second_;  // interpolant second derivatives at the nodes
};

struct CurveSample {
    TimeGrid grid;
    std::vector<Curve> curves;

    CurveSample() = default;
    CurveSample(TimeGrid g, std::vector<Curve> c);
    std::size_t size() const { return curves.size(); }
};

/// Default quadrature refinement for inner products.
inline constexpr std::size_t kDefaultQuadResolution = 501;

/// integral of f*g over [a,b]. Per-panel 4-point Gauss-Legendre on the union of both grids
/// refined with `resolution` equispaced points.
double inner_product(const Curve& f, const Curve& g, std::size_t resolution = kDefaultQuadResolution);
double l2_norm(const Curve& f, std::size_t resolution = kDefaultQuadResolution);

/// t -> f(w(t)) sampled on f's grid. w must map [a,b] onto [a,b] and be strictly increasing.
Curve compose_warp(const Curve& f, const std::function<double(double)>& w);

} // namespace dcfr
