#pragma once

#include <functional>

#include "curves.hpp"
#include "fit.hpp"
#include "warp.hpp"

namespace dcfr {

struct Prediction {
    Curve y_hat;  // on the fit's working grid, original time
    WarpParams warp;
    double registration_objective = 0.0;
};

struct RegistrationOptions {
    int max_iter = 50;
    double rel_tol = 1e-8;
};

// theta minimizing ||x_new o w - target||^2 on the target's grid. Starts at the identity and
// at the identity shifted by +-0.5 in every component; the smallest objective wins, ties keep the identity.
WarpParams register_new(const Curve& x_new, const Curve& target, const KnotVector& knots,
                        double* objective = nullptr, const RegistrationOptions& opts = {});

// Objective of the registration problem at the given warp.
double registration_objective(const Curve& x_new, const Curve& target, const WarpParams& warp);

// y_hat(t) = alpha(u) + int_a^u beta(s,u) x(w(s)) ds, u = w^{-1}(t), on the working grid.
// x is only ever evaluated at times <= t when producing y_hat(t).
Curve predict_with_warp(const std::function<double(double)>& x, const FitResult& fit, const WarpParams& warp);

Prediction predict_response(const Curve& x_new, const FitResult& fit, const RegistrationOptions& opts = {});

// N^{-1} sum ||y_i - y_hat_i||^2 with y_hat on the working grid.
double mspe(const FitResult& fit, const CurveSample& x_test, const CurveSample& y_test);

} // namespace dcfr
