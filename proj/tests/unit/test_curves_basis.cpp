#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "basis.hpp"
#include "curves.hpp"
#include "errors.hpp"
#include "quadrature.hpp"

using namespace dcfr;

TEST_CASE("curve evaluation and inner products") {
    const TimeGrid g = TimeGrid::uniform(0, 1, 11);
    const Curve one = Curve::constant(g, 1.0);
    CHECK(one(0.37) == doctest::Approx(1.0));
    CHECK(l2_norm(one) == doctest::Approx(1.0).epsilon(1e-12));
    const Curve t = Curve::sample(g, [](double s) { return s; });
    CHECK(std::abs(inner_product(t, t) - 1.0 / 3.0) < 1e-8);
    CHECK(t.deriv(0.5) == doctest::Approx(1.0));
    CHECK_THROWS_AS(t(1.5), DomainError);
    const Curve same = compose_warp(t, [](double s) { return s; });
    CHECK(same(0.42) == doctest::Approx(0.42));
}

TEST_CASE("time grid must increase") {
    CHECK_THROWS_AS(TimeGrid({0.0, 0.5, 0.5, 1.0}), Error);
    CHECK_THROWS_AS(TimeGrid({0.0, 0.6, 0.4, 1.0}), Error);
}

TEST_CASE("causal basis sizes") {
    CHECK(build_causal_basis(UniSplineBasis::uniform(0, 1, 4, 5)).size() == 66);
    CHECK(build_causal_basis(UniSplineBasis::uniform(0, 1, 4, 10)).size() == 141);
    CHECK(build_causal_basis(UniSplineBasis::uniform(0, 0.69, 2, 8)).size() == 64);
    // linear, no interior knot: every product overlaps the triangle
    CHECK(build_causal_basis(UniSplineBasis::uniform(0, 1, 2, 0)).size() == 4);
}

TEST_CASE("retained pairs are exactly those with overlapping causal support") {
    const UniSplineBasis uni = UniSplineBasis::uniform(0, 1, 4, 5);
    const CausalBasis cb(uni);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < uni.size(); ++i)
        for (std::size_t j = 0; j < uni.size(); ++j)
            if (uni.support_lo(i) < uni.support_hi(j)) {
                ++expected;
                CHECK(cb.index_of(i, j) >= 0);
            } else {
                CHECK(cb.index_of(i, j) == -1);
            }
    CHECK(cb.size() == expected);
}

TEST_CASE("partition of unity on the causal triangle and zero above it") {
    const CausalBasis cb(UniSplineBasis::uniform(0, 1, 4, 5));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    double worst = 0;
    for (int k = 0; k < 2000; ++k) {
        double s = u(rng), t = u(rng);
        const auto phi = cb.eval_phi(s, t);
        double sum = 0;
        for (double v : phi) sum += v;
        if (s <= t) worst = std::max(worst, std::abs(sum - 1.0));
        else for (double v : phi) REQUIRE(v == 0.0);
    }
    for (double t : {0.0, 0.2, 0.5, 1.0}) {
        double sum = 0;
        for (double v : cb.eval_phi(t, t)) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("penalty matrix is a symmetric PSD Gram matrix") {
    const CausalBasis cb(UniSplineBasis::uniform(0, 1, 4, 5));
    const Eigen::MatrixXd& om = cb.omega();
    CHECK((om - om.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * om.cwiseAbs().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(om);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * es.eigenvalues().maxCoeff());
}

TEST_CASE("b' Omega b equals the squared norm of the surface") {
    const CausalBasis cb(UniSplineBasis::uniform(0, 1, 4, 3));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0, 1);
    std::vector<double> b(cb.size());
    for (double& v : b) v = nd(rng);
    Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    const double quad = bv.dot(cb.omega() * bv);
    // oracle: map the triangle to the unit square, s = t u, and integrate with a fine Gauss rule
    const GaussRule& gr = gauss_legendre(4);
    const int panels = 240;
    double dense = 0;
    for (int pt = 0; pt < panels; ++pt)
        for (std::size_t qt = 0; qt < gr.nodes.size(); ++qt) {
            const double t = (pt + 0.5 + 0.5 * gr.nodes[qt]) / panels;
            const double wt = 0.5 * gr.weights[qt] / panels;
            for (int pu = 0; pu < panels; ++pu)
                for (std::size_t qu = 0; qu < gr.nodes.size(); ++qu) {
                    const double u = (pu + 0.5 + 0.5 * gr.nodes[qu]) / panels;
                    const double beta = beta_surface(b, cb, t * u, t);
                    dense += wt * 0.5 * gr.weights[qu] / panels * t * beta * beta;
                }
        }
    CHECK(std::abs(quad - dense) <= 1e-6 * std::abs(dense));
}

TEST_CASE("spline basis evaluation") {
    const UniSplineBasis uni = UniSplineBasis::uniform(0, 2, 4, 4);
    std::vector<double> act(4);
    const double t = 0.77;
    const std::size_t first = uni.eval_active(t, act);
    const auto all = uni.eval(t);
    for (std::size_t k = 0; k < 4; ++k) CHECK(all[first + k] == doctest::Approx(act[k]).epsilon(1e-14));
    CHECK(uni.eval(0.0).front() == doctest::Approx(1.0));
    CHECK(uni.eval(2.0).back() == doctest::Approx(1.0));
    CHECK_THROWS_AS(uni.eval(2.1), DomainError);
}

TEST_CASE("trapezoid helpers") {
    const auto t = linspace(0, 1, 5);
    std::vector<double> f(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) f[i] = 2 * t[i];
    CHECK(trapezoid(t, f) == doctest::Approx(1.0));
    std::vector<double> c(t.size());
    cumulative_trapezoid(t, f, c);
    CHECK(c.front() == 0.0);
    CHECK(c[2] == doctest::Approx(0.25));
}
