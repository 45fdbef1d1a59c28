#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "inference.hpp"
#include "quadrature.hpp"
#include "simulate.hpp"
#include "support.hpp"

using namespace dcfr;

namespace {

struct ToyFit {
    testdata::Toy data;
    FitResult fit;
};

const ToyFit& toy_fit() {
    static const ToyFit tf = [] {
        auto data = testdata::warped_bumps(5, 7);
        FitResult fit = alternating_fit(data.X, data.Y, testdata::toy_config(), 1e-3);
        return ToyFit{std::move(data), std::move(fit)};
    }();
    return tf;
}

} // namespace

TEST_CASE("profile derivatives at the fitted warps") {
    const auto& tf = toy_fit();
    const ProfileDerivatives d = profile_derivatives(tf.fit, tf.data.X, tf.data.Y);
    REQUIRE(d.subjects.size() == 5);
    const Eigen::Map<const Eigen::VectorXd> w(d.weights.data(), static_cast<Eigen::Index>(d.weights.size()));
    for (const auto& s : d.subjects) {
        CHECK(s.d_theta.cols() == 1);
        const double foc = (s.d_theta.transpose() * w.asDiagonal() * s.f).cwiseAbs().maxCoeff();
        CHECK(foc <= 1e-4);
        CHECK(!s.singular);
    }
}

TEST_CASE("sandwich pieces are symmetric and the variance is nonnegative and causal") {
    const auto& tf = toy_fit();
    const AsymptoticCov cov = asymptotic_cov(profile_derivatives(tf.fit, tf.data.X, tf.data.Y));
    const double gs = cov.gamma_hat.cwiseAbs().maxCoeff(), ls = cov.lambda_hat.cwiseAbs().maxCoeff();
    CHECK((cov.gamma_hat - cov.gamma_hat.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * gs);
    CHECK((cov.lambda_hat - cov.lambda_hat.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * ls);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov.lambda_hat);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * std::max(1.0, ls));
    for (int a = 0; a <= 20; ++a)
        for (int b = 0; b <= 20; ++b) {
            const double s = a / 20.0, t = b / 20.0;
            const double v = beta_variance(cov, *tf.fit.basis, s, t);
            CHECK(v >= 0.0);
            if (s > t) CHECK(v == 0.0);
        }
}

TEST_CASE("without warping the profile derivative is the plain one") {
    auto data = testdata::warped_bumps(6, 3, 51);
    FitConfig cfg = testdata::toy_config();
    cfg.warp_knots = KnotVector({0, 1});
    const FitResult fit = alternating_fit(data.X, data.Y, cfg, 1e-3);
    const ProfileDerivatives d = profile_derivatives(fit, data.X, data.Y);
    for (const auto& s : d.subjects) {
        CHECK(s.d_theta.cols() == 0);
        CHECK((s.f_dot - s.d_b).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("significance filter thresholds at two standard deviations") {
    SurfaceGrid beta, var;
    beta.axis = var.axis = {0.0, 0.5, 1.0};
    beta.values = Eigen::MatrixXd::Constant(3, 3, 1.0);
    var.values = Eigen::MatrixXd::Zero(3, 3);
    var.values(0, 1) = 1.0;   // 1 < 2: dropped
    var.values(0, 2) = 0.25;  // 1 >= 1: kept
    const SurfaceGrid f = significance_filter(beta, var);
    CHECK(f.values(0, 1) == 0.0);
    CHECK(f.values(0, 2) == 1.0);
    CHECK(f.values(1, 1) == 1.0);
    beta.values.setZero();
    CHECK(significance_filter(beta, var).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bootstrap variance is reproducible and nonnegative") {
    const auto& tf = toy_fit();
    BootstrapOptions opt;
    opt.replicates = 4;
    opt.seed = 99;
    opt.res = 21;
    const VarianceSurface v1 = bootstrap_variance(tf.fit, tf.data.X, tf.data.Y, opt);
    const VarianceSurface v2 = bootstrap_variance(tf.fit, tf.data.X, tf.data.Y, opt);
    const auto axis = linspace(0, 1, 21);
    const SurfaceGrid g1 = v1.sample(axis), g2 = v2.sample(axis);
    CHECK((g1.values - g2.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g1.values.minCoeff() >= 0.0);
    CHECK(g1.values.maxCoeff() > 0.0);
    CHECK(v1(0.8, 0.2) == 0.0);
    opt.replicates = 1;
    CHECK_THROWS_AS(bootstrap_variance(tf.fit, tf.data.X, tf.data.Y, opt), ContractError);
}

TEST_CASE("bootstrap of identical subjects has zero variance") {
    const auto data = testdata::warped_bumps(1, 5, 41);
    const CurveSample X(data.X.grid, std::vector<Curve>(4, data.X.curves[0]));
    const CurveSample Y(data.Y.grid, std::vector<Curve>(4, data.Y.curves[0]));
    const FitResult fit = alternating_fit(X, Y, testdata::toy_config(), 1e-3);
    BootstrapOptions opt;
    opt.replicates = 3;
    opt.res = 11;
    const SurfaceGrid g = bootstrap_variance(fit, X, Y, opt).sample(linspace(0, 1, 11));
    CHECK(g.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bootstrap and asymptotic standard deviations agree in order of magnitude") {
    // Rich covariates and a small basis keep Gamma well conditioned, the regime the sandwich describes.
    // The simulation models' covariates are rescaled copies of one bump, which leaves Gamma nearly
    // singular and the unpenalized sandwich far above the penalized bootstrap.
    const std::size_t n = 40;
    const TimeGrid g = TimeGrid::uniform(0, 1, 81);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0, 1);
    std::vector<Curve> xs, ys;
    for (std::size_t i = 0; i < n; ++i) {
        const double a1 = nd(rng), a2 = nd(rng), a3 = nd(rng), shift = 0.3 * (static_cast<double>(i) / (n - 1) - 0.5);
        std::vector<double> e(5);
        for (double& v : e) v = 0.05 * nd(rng);
        auto x_aligned = [=](double v) {
            return a1 * std::sin(2 * M_PI * v) + a2 * std::cos(2 * M_PI * v) + a3 * v + std::exp(-30 * (v - 0.4) * (v - 0.4));
        };
        xs.push_back(Curve::sample(g, [&](double t) { return x_aligned(exp_warp_inverse(shift, t)); }));
        ys.push_back(Curve::sample(g, [&](double t) {
            const double u = exp_warp_inverse(shift, t);
            double acc = 0;
            for (int q = 0; q < 40; ++q) {
                const double s = u * (q + 0.5) / 40;
                acc += u / 40 * (1 + s - u) * x_aligned(s);
            }
            return acc + e[0] * std::sin(3 * u) + e[1] * std::cos(5 * u) + e[2] * u;
        }));
    }
    const CurveSample X(g, xs), Y(g, ys);
    FitConfig cfg;
    cfg.basis.order = 2;
    cfg.basis.interior_count = 2;
    cfg.warp_knots = KnotVector({0, 0.5, 1});
    const FitResult fit = alternating_fit(X, Y, cfg, 1e-6);
    const VarianceSurface asym = VarianceSurface::from_asymptotic(asymptotic_cov(profile_derivatives(fit, X, Y)), fit.basis);
    BootstrapOptions opt;
    opt.replicates = 50;
    opt.res = 41;
    const VarianceSurface boot = bootstrap_variance(fit, X, Y, opt);
    std::vector<double> ratio;
    for (int a = 1; a < 40; ++a)
        for (int b = a; b < 40; ++b) {
            const double va = asym(a / 40.0, b / 40.0), vb = boot(a / 40.0, b / 40.0);
            if (va > 0 && vb > 0) ratio.push_back(std::sqrt(vb / va));
        }
    REQUIRE(ratio.size() > 100);
    std::sort(ratio.begin(), ratio.end());
    CHECK(ratio[ratio.size() / 4] >= 0.5);
    CHECK(ratio[3 * ratio.size() / 4] <= 2.0);
}

TEST_CASE("landmark correlations") {
    const KnotVector k({0, 0.25, 0.5, 0.75, 1});
    SUBCASE("identity warps leave correlations undefined") {
        const std::vector<WarpParams> w(10, WarpParams::identity(k));
        const auto res = landmark_stats(w, {{1, 2}, {2, 3}}, 20, 1);
        REQUIRE(res.size() == 1);
        CHECK(!res[0].defined);
    }
    SUBCASE("opposite gap shifts give -1") {
        std::vector<WarpParams> w;
        for (int i = 0; i < 8; ++i) {
            const double e = 0.01 * (i - 3.5);
            w.emplace_back(k, jupp(std::vector<double>{0, 0.25, 0.5 + e, 0.75, 1}, k));
        }
        const auto res = landmark_stats(w, {{1, 2}, {2, 3}}, 50, 1);
        CHECK(res[0].defined);
        CHECK(res[0].rho == doctest::Approx(-1.0).epsilon(1e-10));
    }
    SUBCASE("planted correlation is recovered") {
        std::mt19937_64 rng(2024);
        std::normal_distribution<double> nd(0, 1);
        std::vector<WarpParams> w;
        for (int i = 0; i < 100; ++i) {
            const double z1 = nd(rng), z2 = 0.5 * z1 + std::sqrt(0.75) * nd(rng);
            const double c1 = 0.25 + 0.02 * nd(rng), c2 = c1 + 0.25 + 0.03 * z1, c3 = c2 + 0.25 + 0.03 * z2;
            w.emplace_back(k, jupp(std::vector<double>{0, c1, c2, c3, 1}, k));
        }
        const auto res = landmark_stats(w, {{1, 2}, {2, 3}}, 200, 3);
        CHECK(res[0].rho > 0.3);
        CHECK(res[0].rho < 0.7);
        CHECK(res[0].se > 0.0);
        CHECK(res[0].se < 0.2);
        CHECK(res[0].boot_used > 150);
    }
    SUBCASE("contracts") {
        const std::vector<WarpParams> two(2, WarpParams::identity(k));
        CHECK_THROWS_AS(landmark_stats(two, {{1, 2}, {2, 3}}, 10, 1), ContractError);
        const std::vector<WarpParams> w(5, WarpParams::identity(k));
        CHECK_THROWS_AS(landmark_stats(w, {{1, 7}, {2, 3}}, 10, 1), ContractError);
    }
}

TEST_CASE("pearson") {
    CHECK(*pearson({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK(!pearson({1, 1, 1}, {1, 2, 3}).has_value());
}
