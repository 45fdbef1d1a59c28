#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "curves.hpp"
#include "fit.hpp"

namespace dcfr {

struct SubjectDerivatives {
    Eigen::VectorXd f;        // profile residual on the working grid
    Eigen::MatrixXd f_dot;    // M x p, gradient of f in b
    Eigen::MatrixXd d_theta;  // M x r
    Eigen::MatrixXd d_b;      // M x p
    Eigen::MatrixXd d_b_theta;  // r x p, implicit derivative of theta_i(b)
    WarpParams theta;         // warp at which everything was evaluated
    bool singular = false;
};

struct ProfileDerivatives {
    std::vector<double> grid, weights;
    std::vector<SubjectDerivatives> subjects;
    std::size_t singular_count = 0;
};

struct ProfileOptions {
    double hessian_step = 1e-5;
    bool polish = true;  // re-solve theta_i(b_hat) with the means fixed before differentiating
};

ProfileDerivatives profile_derivatives(const FitResult& fit, const CurveSample& X, const CurveSample& Y,
                                       const ProfileOptions& opts = {});

// f_i(b) = r_i(theta_i(b), b) with theta_i re-solved from `start`; used to check f_dot.
Eigen::VectorXd profile_residual(const FitResult& fit, const CurveSample& X, const CurveSample& Y, std::size_t i,
                                 const std::vector<double>& b, const WarpParams& start);

struct AsymptoticCov {
    Eigen::MatrixXd gamma_hat, lambda_hat, cov_b;
    std::size_t n = 0;
    bool rank_deficient = false;
};

AsymptoticCov asymptotic_cov(const ProfileDerivatives& d);

// phi(s,t)^T cov_b phi(s,t); exactly 0 for s > t.
double beta_variance(const AsymptoticCov& cov, const CausalBasis& basis, double s, double t);

// Values on a square grid over [a,b]^2, indexed (s, t).
struct SurfaceGrid {
    std::vector<double> axis;
    Eigen::MatrixXd values;
};

SurfaceGrid beta_grid(const FitResult& fit, std::size_t res = 101);

class VarianceSurface {
public:
    enum class Source { asymptotic, bootstrap };

    static VarianceSurface from_asymptotic(AsymptoticCov cov, std::shared_ptr<const CausalBasis> basis);
    static VarianceSurface from_grid(SurfaceGrid grid, std::size_t replicates, std::uint64_t seed);

    Source source() const { return source_; }
    std::size_t replicates() const { return replicates_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t failed() const { return failed_; }
    void set_failed(std::size_t k) { failed_ = k; }
    const AsymptoticCov* cov() const { return cov_ ? &*cov_ : nullptr; }

    // >= 0, and 0 for s > t. Bootstrap surfaces interpolate bilinearly inside the triangle.
    double operator()(double s, double t) const;
    SurfaceGrid sample(const std::vector<double>& axis) const;

private:
    Source source_ = Source::asymptotic;
    std::optional<AsymptoticCov> cov_;
    std::shared_ptr<const CausalBasis> basis_;
    SurfaceGrid grid_;
    std::size_t replicates_ = 0;
    std::size_t failed_ = 0;
    std::uint64_t seed_ = 0;
};

struct BootstrapOptions {
    std::size_t replicates = 100;
    std::uint64_t seed = 1;
    std::size_t res = 101;
    unsigned threads = 1;
};

// Pairs bootstrap at the fit's lambda (not reselected).
VarianceSurface bootstrap_variance(const FitResult& fit, const CurveSample& X, const CurveSample& Y,
                                   const BootstrapOptions& opts);

// beta kept where |beta| >= 2 sqrt(v), else 0.
SurfaceGrid significance_filter(const SurfaceGrid& beta, const SurfaceGrid& variance);

struct LandmarkCorrelation {
    std::size_t first = 0, second = 0;  // positions in the gap list
    double rho = 0.0;
    double se = 0.0;
    bool defined = false;
    std::size_t boot_used = 0;
};

// Pearson correlations between per-subject knot-value differences c[hi] - c[lo] for each listed
// (lo, hi) pair, with bootstrap standard errors over subjects (no refitting).
std::vector<LandmarkCorrelation> landmark_stats(const std::vector<WarpParams>& warps,
                                                const std::vector<std::pair<std::size_t, std::size_t>>& gaps,
                                                std::size_t boot, std::uint64_t seed);

// Pearson correlation; nullopt if either input has zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

} // namespace dcfr
