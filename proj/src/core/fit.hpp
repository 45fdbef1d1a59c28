#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "curves.hpp"
#include "warp.hpp"

namespace dcfr {

/// Lambdas 10^{-nu}, nu = 1, 1.25, ..., 5 in ascending lambda order.
std::vector<double> default_lambda_grid();

struct BasisSpec {
    int order = 4;
    std::size_t interior_count = 5;
    std::vector<double> interior_knots;  // overrides interior_count when non-empty

    UniSplineBasis build(double a, double b) const;
};

struct FitConfig {
    std::vector<double> lambda_grid = default_lambda_grid();
    int max_outer = 200;
    double rel_tol = 1e-6;
    KnotVector warp_knots;  // only endpoints: classical estimator (no warping)
    BasisSpec basis;
    int backtrack_max = 10;
    std::size_t work_points = 0;  // 0: use the data grid as working grid
    bool warm_start = false;      // lambda path: start each fit from the previous (larger) lambda's warps;
                                  // off by default, warm paths drift into overfitted warps at small lambda
    std::uint64_t seed = 0;
    unsigned threads = 1;

    bool warping() const { return warp_knots.interior_count() > 0; }
    void validate() const;
};

/// z_i(t) on the working grid: one M x p matrix per subject.
struct RegressorCurves {
    std::vector<double> grid;
    std::vector<Eigen::MatrixXd> z;
};

struct NormalEquations {
    Eigen::MatrixXd A;  // sum_i <z_i, z_i^T>
    Eigen::VectorXd c;  // sum_i <z_i, y*_i>
    std::size_t n = 0;
};

struct LambdaCriteria {
    double lambda = 0.0;
    double df = 0.0;
    double mse = 0.0;
    double aicc = 0.0;  // NaN when df >= n-2
    double gcv = 0.0;   // NaN when df >= n
    bool converged = false;
    int iterations = 0;
};

struct FitResult {
    std::shared_ptr<const CausalBasis> basis;
    std::vector<double> b_hat;
    Curve alpha_hat;
    Curve mu_x_tilde, mu_y_tilde;
    std::vector<WarpParams> warps;
    double lambda_hat = 0.0;
    double df = 0.0;
    double mse = 0.0;
    double aicc = 0.0;
    double gcv = 0.0;
    std::vector<LambdaCriteria> paths;
    std::size_t selected_index = 0;
    bool boundary_minimum = false;
    std::vector<double> objective_trace;
    bool converged = false;
    int iterations = 0;
    FitConfig config;

    const KnotVector& warp_knots() const { return config.warp_knots; }
    double beta(double s, double t) const { return beta_surface(b_hat, *basis, s, t); }
};

/// Discretized problem on the working grid: warped data, cumulative integrals against the
/// univariate spline basis, and the residual/Jacobian machinery shared by fitting and inference.
class FitProblem {
public:
    FitProblem(const CurveSample& X, const CurveSample& Y, const FitConfig& config,
               std::shared_ptr<const CausalBasis> basis);

    std::size_t n() const { return x_.size(); }
    std::size_t M() const { return grid_.size(); }
    std::size_t N() const { return basis_->uni().size(); }
    std::size_t p() const { return basis_->size(); }
    std::size_t r() const { return config_.warp_knots.interior_count(); }
    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& weights() const { return weights_; }
    const Eigen::MatrixXd& psi() const { return psi_; }
    const CausalBasis& basis() const { return *basis_; }
    std::shared_ptr<const CausalBasis> basis_ptr() const { return basis_; }
    const FitConfig& config() const { return config_; }
    const Curve& x(std::size_t i) const { return x_[i]; }
    const Curve& y(std::size_t i) const { return y_[i]; }

    struct Warped {
        Eigen::VectorXd x, y;    // x_i(w(t_m)), y_i(w(t_m))
        Eigen::VectorXd xd, yd;  // derivatives x_i'(w(t_m)), y_i'(w(t_m))
        Eigen::MatrixXd dw;      // M x r, dw(t_m)/dtheta
    };
    Warped warp_subject(std::size_t i, const WarpFn& w, bool derivatives) const;

    // C(l, m) = integral over [a, t_m] of psi_l(s) f(s) ds (cumulative trapezoid)
    Eigen::MatrixXd cumulative(const Eigen::VectorXd& f) const;
    // sum_k b_k z_k(t_m) given B (N x N) and the cumulative matrix C
    Eigen::VectorXd apply_slope(const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) const;
    double norm2(const Eigen::VectorXd& f) const;
    double dot(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;

    // z_i as a dense M x p matrix from its cumulative matrix
    Eigen::MatrixXd regressors_from(const Eigen::MatrixXd& C) const;

    NormalEquations normal_equations(const std::vector<Eigen::MatrixXd>& C,
                                     const std::vector<Eigen::VectorXd>& y_centered) const;

    struct SubjectResidual {
        Eigen::VectorXd resid;  // y*_i - b^T z_i on the working grid
        Eigen::MatrixXd jac;    // M x r, D_theta r_i
        Eigen::MatrixXd C;      // cumulative matrix of the centered warped covariate
        std::vector<Eigen::MatrixXd> Cd;  // per theta_l: cumulative of x_i'(w) dw/dtheta_l
    };
    // Residual of subject i with the means held fixed.
    SubjectResidual subject_residual(std::size_t i, const WarpFn& w, const Eigen::MatrixXd& B,
                                     const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y,
                                     bool jacobian) const;

    // One damped Gauss-Newton step on theta_i with means held fixed. Returns the new parameters
    // (unchanged if no decrease was found); `damping` carries the Levenberg parameter across calls.
    WarpParams warp_step(std::size_t i, const WarpParams& current, const Eigen::MatrixXd& B,
                         const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y, double& damping) const;

    // Fully converged theta_i(b) for fixed means.
    WarpParams solve_subject_warp(std::size_t i, const WarpParams& start, const Eigen::MatrixXd& B,
                                  const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y,
                                  int max_iter = 200, double tol = 1e-14) const;

    Curve grid_curve(const Eigen::VectorXd& v) const;

private:
    FitConfig config_;
    std::shared_ptr<const CausalBasis> basis_;
    std::vector<Curve> x_, y_;
    std::vector<double> grid_, weights_;
    Eigen::MatrixXd psi_;  // N x M
    std::vector<std::size_t> first_active_;
    TimeGrid time_grid_;
};

RegressorCurves compute_regressors(const CurveSample& X, const std::vector<WarpParams>& warps,
                                   const CausalBasis& basis, std::size_t work_points = 0);

NormalEquations normal_equations(const RegressorCurves& regressors,
                                 const std::vector<std::vector<double>>& y_centered);

/// b = (A + n lambda Omega)^{-1} c by Cholesky; SingularityError if rcond < 1e-14.
std::vector<double> solve_ridge(const NormalEquations& eq, const Eigen::MatrixXd& omega, double lambda);

std::vector<double> ridge_step(const RegressorCurves& regressors,
                               const std::vector<std::vector<double>>& y_centered,
                               const Eigen::MatrixXd& omega, double lambda);

/// tr((A + n lambda Omega)^{-1} A)
double effective_df(const NormalEquations& eq, const Eigen::MatrixXd& omega, double lambda);

double aicc(double mse, double df, std::size_t n);
double gcv(double mse, double df, std::size_t n);

/// Shifts the knot values so their cross-subject mean equals tau at every interior knot.
std::vector<WarpParams> center_warps(const std::vector<WarpParams>& warps);

FitResult alternating_fit(const CurveSample& X, const CurveSample& Y, const FitConfig& config, double lambda);

// Same, starting from given warps (identity when empty) on a prebuilt problem.
FitResult alternating_fit(const FitProblem& problem, double lambda, const std::vector<WarpParams>& start);

struct LambdaPath {
    std::vector<FitResult> fits;  // ascending lambda
    std::vector<LambdaCriteria> criteria;
    std::size_t selected = 0;
    bool boundary = false;
    bool any_valid = false;
};

/// Fits every grid lambda (descending; identity start unless warm_start) and records df/MSE/AICC/GCV.
LambdaPath fit_lambda_path(const CurveSample& X, const CurveSample& Y, const FitConfig& config);

/// The AICC-minimizing fit with the full criteria paths attached.
FitResult select_lambda(const CurveSample& X, const CurveSample& Y, const FitConfig& config);

double penalized_objective(const FitResult& fit);

} // namespace dcfr
