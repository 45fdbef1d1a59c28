#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "curves.hpp"
#include "fit.hpp"

namespace dcfr {

struct SimSpec {
    int model = 1;             // 1: test warps like training, 2: test warps with a in [1.5, 2.5]
    std::size_t n = 50;
    std::size_t k = 5;         // interior knots of the cubic slope basis
    std::size_t m = 101;       // grid points on [0,1]
    std::size_t n_test = 200;
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    std::vector<double> lambda_grid = default_lambda_grid();
    unsigned threads = 1;
    bool warm_start = false;

    void validate() const;
};

double true_beta(double s, double t);
// (e^{a t} - 1)/(e^a - 1), identity for |a| < 1e-8
double exp_warp(double a, double t);
double exp_warp_inverse(double a, double u);

struct SimDataset {
    CurveSample x_train, y_train;
    CurveSample x_test, y_test;  // noiseless responses
    std::vector<double> a_train, z_train, u_train;
    std::vector<double> a_test, z_test;
};

// Training data depend only on (seed, replicate); the test set also on spec.model.
SimDataset gen_dataset(const SimSpec& spec, std::size_t replicate);

// Fit configuration used by the harness: dynamic uses one warp knot at 0.5, classical none.
FitConfig sim_fit_config(const SimSpec& spec, bool dynamic);

using Surface = std::function<double(double, double)>;

// Double integral over [0,1]^2 of (f - g)^2 by trapezoid on a res x res grid; each inner
// integral runs over s in [0, t] so surfaces vanishing above the diagonal are integrated exactly.
double ise(const Surface& beta_hat, const Surface& beta0, std::size_t res = 201);
// Same quadrature for a fitted slope against the true surface, using matrix evaluation.
double ise_fit(const FitResult& fit, std::size_t res = 201);

struct EstimatorPath {
    std::vector<double> ise, mspe1, mspe2;  // per grid lambda (ascending)
    std::vector<double> aicc;
    std::size_t selected = 0;
    bool boundary = false;
    bool ok = false;
};

struct ReplicateOutcome {
    EstimatorPath dynamic, classical;
    std::string failure;
};

struct EstimatorSummary {
    // means and Monte Carlo standard errors; MSPE values are multiplied by 1e3
    double ise_opt = 0, ise_opt_se = 0, ise_aicc = 0, ise_aicc_se = 0;
    double mspe1_opt = 0, mspe1_opt_se = 0, mspe1_aicc = 0, mspe1_aicc_se = 0;
    double mspe2_opt = 0, mspe2_opt_se = 0, mspe2_aicc = 0, mspe2_aicc_se = 0;
    double frac_interior = 0;      // AICC minimum strictly inside the grid
    double frac_mspe_at_min = 0;   // oracle Model-1 MSPE lambda is the smallest grid value
    double frac_ise_at_max = 0;    // oracle ISE lambda is the largest grid value
};

struct MCReport {
    SimSpec spec;
    std::size_t replications = 0;  // successful
    std::size_t failures = 0;
    EstimatorSummary dynamic, classical;
    std::vector<ReplicateOutcome> replicates;
};

ReplicateOutcome run_replicate(const SimSpec& spec, std::size_t replicate);

// Runs spec.reps replicates (in parallel over spec.threads) and aggregates in replicate order.
MCReport monte_carlo(const SimSpec& spec, const std::function<void(std::size_t)>& on_done = {});

EstimatorSummary summarize(const std::vector<const EstimatorPath*>& paths);

} // namespace dcfr
