#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dcfr {

/// Warp knots tau_0 = a < tau_1 < ... < tau_{r+1} = b (r interior knots).
class KnotVector {
public:
    KnotVector() = default;
    explicit KnotVector(std::vector<double> tau);
    static KnotVector identity_only(double a, double b) { return KnotVector({a, b}); }

    double a() const { return tau_.front(); }
    double b() const { return tau_.back(); }
    std::size_t interior_count() const { return tau_.size() - 2; }
    std::size_t size() const { return tau_.size(); }
    double operator[](std::size_t k) const { return tau_[k]; }
    const std::vector<double>& values() const { return tau_; }
    std::size_t interval(double t) const;  // k with tau_k <= t <= tau_{k+1}

    bool operator==(const KnotVector& o) const { return tau_ == o.tau_; }

private:
    std::vector<double> tau_{0.0, 1.0};
};

/// Unconstrained warp parameters: theta in R^r.
struct WarpParams {
    KnotVector knots;
    std::vector<double> theta;

    WarpParams() = default;
    WarpParams(KnotVector k, std::vector<double> th);
    // w(t) = t; theta = 0 only when the knots are equispaced
    static WarpParams identity(const KnotVector& k);
};

struct HermiteBasisValues {
    std::vector<double> eta;  // length r+2
    std::vector<double> xi;   // length r+2
};

/// Cardinal cubic Hermite functions eta_k, xi_k at t.
HermiteBasisValues hermite_basis(const KnotVector& knots, double t);

/// Knot derivatives for monotone Hermite interpolation of (tau, c). c includes both endpoints.
std::vector<double> fritsch_carlson(std::span<const double> c, const KnotVector& knots);

/// theta_k = log((c_{k+1}-c_k)/(c_k-c_{k-1})), k=1..r. c includes both endpoints.
std::vector<double> jupp(std::span<const double> c, const KnotVector& knots);

/// Inverse transform: full knot values c (length r+2) with c_0=a, c_{r+1}=b.
std::vector<double> jupp_inv(std::span<const double> theta, const KnotVector& knots);

// Largest |theta_k| accepted by jupp_inv, and the clamp applied inside optimizers.
inline constexpr double kThetaOverflow = 700.0;
inline constexpr double kThetaClamp = 20.0;

enum class WarpGradient {
    hermite_values,  // eta(t)^T D_theta J^{-1}(theta), knot derivatives held fixed
    full,            // also differentiates the knot derivatives through Fritsch-Carlson
};

/// The expanded warp w(t) = sum c_k eta_k(t) + sum d_k xi_k(t).
class WarpFn {
public:
    WarpFn() = default;
    explicit WarpFn(const WarpParams& params, WarpGradient mode = WarpGradient::full);
    static WarpFn from_knot_values(const KnotVector& knots, std::vector<double> c,
                                   WarpGradient mode = WarpGradient::full);

    const KnotVector& knots() const { return knots_; }
    const std::vector<double>& c() const { return c_; }
    const std::vector<double>& d() const { return d_; }
    std::size_t dim() const { return knots_.interior_count(); }
    WarpGradient gradient_mode() const { return mode_; }

    double operator()(double t) const { return eval(t); }
    double eval(double t) const;
    double deriv(double t) const;  // dw/dt
    // w(t) and dw/dtheta (length r) into grad.
    double eval_with_gradient(double t, std::span<double> grad) const;
    double inverse(double u) const;

    // dc/dtheta and dd/dtheta, row-major (r+2) x r
    const std::vector<double>& dc_dtheta() const { return dc_; }
    const std::vector<double>& dd_dtheta() const { return dd_; }

private:
    void build(WarpGradient mode, const std::vector<double>* theta);

    KnotVector knots_;
    std::vector<double> c_, d_;
    std::vector<double> dc_, dd_;
    WarpGradient mode_ = WarpGradient::full;
};

struct WarpEval {
    double w = 0.0;
    std::vector<double> gradient;  // empty unless requested
};

WarpEval warp_eval(const WarpParams& params, double t, bool want_gradient,
                   WarpGradient mode = WarpGradient::hermite_values);

double warp_inverse(const WarpParams& params, double u);

} // namespace dcfr
