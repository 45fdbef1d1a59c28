#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "curves.hpp"
#include "fit.hpp"
#include "simulate.hpp"

namespace testdata {

// Small warped bump data: covariate bump near c, response a delayed, damped copy.
struct Toy {
    dcfr::CurveSample X, Y;
};

inline Toy warped_bumps(std::size_t n, std::uint64_t seed, std::size_t m = 101, double noise = 0.02) {
    const dcfr::TimeGrid g = dcfr::TimeGrid::uniform(0, 1, m);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0, 1);
    std::vector<dcfr::Curve> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = n > 1 ? -0.8 + 1.6 * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
        const double c = 0.35 + 0.05 * nd(rng), amp = 1 + 0.3 * nd(rng), e = noise * nd(rng);
        xs.push_back(dcfr::Curve::sample(g, [&](double t) {
            const double v = dcfr::exp_warp_inverse(a, t);
            return amp * std::exp(-20 * (v - c) * (v - c)) + 0.3 * v;
        }));
        ys.push_back(dcfr::Curve::sample(g, [&](double t) {
            const double v = dcfr::exp_warp_inverse(a, t);
            return amp * 0.8 * std::exp(-20 * (v - c - 0.15) * (v - c - 0.15)) + e * std::sin(6 * v);
        }));
    }
    return {dcfr::CurveSample(g, xs), dcfr::CurveSample(g, ys)};
}

// The tiny design used for derivative checks: linear splines with one interior knot, one warp knot.
inline dcfr::FitConfig toy_config() {
    dcfr::FitConfig cfg;
    cfg.basis.order = 2;
    cfg.basis.interior_count = 1;
    cfg.warp_knots = dcfr::KnotVector({0, 0.5, 1});
    cfg.rel_tol = 1e-12;
    cfg.max_outer = 500;
    return cfg;
}

inline double max_abs(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace testdata
