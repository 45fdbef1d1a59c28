#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "io.hpp"
#include "simulate.hpp"

using namespace dcfr;

TEST_CASE("true slope surface") {
    CHECK(true_beta(0.4, 0.6) == 5.0);
    CHECK(true_beta(0.7, 0.3) == 0.0);
    CHECK(true_beta(0.4, 0.4) == doctest::Approx(5 * std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("integrated squared error") {
    const Surface b0 = true_beta;
    CHECK(ise(b0, b0) == 0.0);
    const Surface zero = [](double, double) { return 0.0; };
    // 201 x 201 trapezoid over s <= t, and the exact integral, both from an independent scipy oracle
    CHECK(std::abs(ise(zero, b0) - 0.767512571507901) <= 1e-9);
    CHECK(std::abs(ise(zero, b0) - 0.7675302394396126) <= 1e-4);
    const Surface shifted = [](double s, double t) { return s <= t ? true_beta(s, t) + 1.0 : 0.0; };
    CHECK(std::abs(ise(shifted, b0) - 0.5) <= 1e-4);
}

TEST_CASE("datasets are reproducible and share training data across models") {
    SimSpec s1;
    s1.n = 10;
    s1.n_test = 6;
    SimSpec s2 = s1;
    s2.model = 2;
    const SimDataset a = gen_dataset(s1, 3), b = gen_dataset(s1, 3), c = gen_dataset(s2, 3), d = gen_dataset(s1, 4);
    CHECK(a.z_train == b.z_train);
    CHECK(a.u_train == b.u_train);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto va = a.y_train.curves[i].values(), vc = c.y_train.curves[i].values();
        CHECK(std::equal(va.begin(), va.end(), vc.begin()));
    }
    CHECK(a.a_train == c.a_train);
    CHECK(a.z_test == c.z_test);
    CHECK(a.a_test != c.a_test);
    CHECK(a.z_train != d.z_train);
    // training warps equally spaced over [-1, 1] including the ends
    CHECK(a.a_train.front() == -1.0);
    CHECK(a.a_train.back() == 1.0);
    for (double v : c.a_test) {
        CHECK(v >= 1.5);
        CHECK(v <= 2.5);
    }
}

TEST_CASE("covariates follow the stated form") {
    SimSpec s;
    s.n = 5;
    const SimDataset ds = gen_dataset(s, 0);
    for (std::size_t i = 0; i < 5; ++i) {
        const double a = ds.a_train[i], z = ds.z_train[i];
        for (double t : {0.1, 0.4, 0.8}) {
            const double v = exp_warp_inverse(a, t);
            CHECK(ds.x_train.curves[i](t) == doctest::Approx(z * std::exp(-30 * (v - 0.4) * (v - 0.4))).epsilon(1e-3));
        }
    }
}

TEST_CASE("the true predictor reproduces noiseless test responses") {
    SimSpec s;
    s.n = 4;
    s.n_test = 5;
    const SimDataset ds = gen_dataset(s, 1);
    const auto g = ds.y_test.grid.points();
    double worst = 0;
    for (std::size_t i = 0; i < ds.x_test.size(); ++i) {
        const double a = ds.a_test[i], z = ds.z_test[i];
        // y(t) = int_0^u beta0(s,u) x~(s) ds with u the unwarped time; Gauss on [0,u]
        for (std::size_t m = 0; m < g.size(); ++m) {
            const double u = exp_warp_inverse(a, g[m]);
            double acc = 0;
            const int panels = 64;
            for (int p = 0; p < panels; ++p)
                for (double q : {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526}) {
                    const double wq = std::abs(q) < 0.5 ? 0.6521451548625461 : 0.3478548451374538;
                    const double s = u * (p + 0.5 + 0.5 * q) / panels;
                    acc += 0.5 * wq * u / panels * true_beta(s, u) * z * std::exp(-30 * (s - 0.4) * (s - 0.4));
                }
            worst = std::max(worst, (acc - ds.y_test.curves[i].values()[m]) * (acc - ds.y_test.curves[i].values()[m]));
        }
    }
    CHECK(worst <= 1e-6);
}

TEST_CASE("Monte Carlo report is identical across thread counts") {
    SimSpec s;
    s.n = 12;
    s.n_test = 8;
    s.m = 51;
    s.k = 3;
    s.reps = 2;
    s.lambda_grid = {1e-3, 1e-2, 1e-1};
    s.threads = 1;
    const MCReport r1 = monte_carlo(s);
    s.threads = 2;
    const MCReport r2 = monte_carlo(s);
    CHECK(mc_report_csv(r1) == mc_report_csv(r2));
    CHECK(mc_report_json(r1).dump() == mc_report_json(r2).dump());
    CHECK(r1.replications == 2);
    CHECK(r1.dynamic.ise_aicc_se >= 0.0);
    s.reps = 1;
    CHECK_THROWS_AS(monte_carlo(s), ContractError);
}
