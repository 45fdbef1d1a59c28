#include <doctest.h>

#include <cmath>
#include <random>

#include "errors.hpp"
#include "simulate.hpp"
#include "warp.hpp"

using namespace dcfr;

namespace {

KnotVector random_knots(std::mt19937_64& rng, std::size_t r) {
    std::uniform_real_distribution<double> u(0.05, 0.95);
    std::vector<double> tau{0.0};
    std::vector<double> inner(r);
    for (double& v : inner) v = u(rng);
    std::sort(inner.begin(), inner.end());
    for (double v : inner) if (v - tau.back() > 1e-3) tau.push_back(v);
    tau.push_back(1.0);
    return KnotVector(tau);
}

std::vector<double> random_theta(std::mt19937_64& rng, std::size_t r, double sd) {
    std::normal_distribution<double> nd(0, sd);
    std::vector<double> th(r);
    for (double& v : th) v = nd(rng);
    return th;
}

} // namespace

TEST_CASE("zero parameters give the identity warp") {
    const KnotVector k({0, 0.3, 0.5, 1});
    const WarpFn w(WarpParams::identity(k));
    for (double t : {0.0, 0.1, 0.3, 0.42, 0.77, 1.0}) CHECK(w(t) == doctest::Approx(t).epsilon(1e-14));
    for (double d : w.d()) CHECK(d == doctest::Approx(1.0));
}

TEST_CASE("knot values round-trip through the unconstrained parameters") {
    std::mt19937_64 rng(5);
    double worst = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const KnotVector k = random_knots(rng, 1 + rep % 5);
        const auto th = random_theta(rng, k.interior_count(), 1.5);
        const auto c = jupp_inv(th, k);
        CHECK(c.front() == k.a());
        CHECK(c.back() == k.b());
        const auto back = jupp(c, k);
        for (std::size_t l = 0; l < th.size(); ++l) worst = std::max(worst, std::abs(back[l] - th[l]));
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("random warps are strictly increasing and fix the endpoints exactly") {
    std::mt19937_64 rng(17);
    for (int rep = 0; rep < 100; ++rep) {
        const KnotVector k = random_knots(rng, 1 + rep % 6);
        const WarpFn w(WarpParams(k, random_theta(rng, k.interior_count(), 2.0)));
        CHECK(w(k.a()) == k.a());
        CHECK(w(k.b()) == k.b());
        double prev = w(0.0);
        for (int m = 1; m <= 2000; ++m) {
            const double cur = w(m / 2000.0);
            REQUIRE(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("Fritsch-Carlson slopes keep monotone data monotone") {
    const KnotVector k({0, 0.2, 0.5, 0.6, 1});
    const std::vector<double> c{0, 0.05, 0.9, 0.91, 1};
    const auto d = fritsch_carlson(c, k);
    REQUIRE(d.size() == c.size());
    for (double v : d) CHECK(v >= 0.0);
    const WarpFn w = WarpFn::from_knot_values(k, c);
    double prev = 0;
    for (int m = 1; m <= 1000; ++m) {
        const double cur = w(m / 1000.0);
        CHECK(cur >= prev);
        prev = cur;
    }
    for (std::size_t j = 0; j < k.size(); ++j) CHECK(w(k[j]) == doctest::Approx(c[j]).epsilon(1e-14));
}

TEST_CASE("hermite cardinal functions interpolate") {
    const KnotVector k({0, 0.4, 1});
    const auto h = hermite_basis(k, 0.4);
    CHECK(h.eta[1] == doctest::Approx(1.0));
    CHECK(h.eta[0] == doctest::Approx(0.0));
    CHECK(h.xi[1] == doctest::Approx(0.0));
}

TEST_CASE("warp gradient matches finite differences") {
    std::mt19937_64 rng(23);
    double worst = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const KnotVector k = random_knots(rng, 1 + rep % 4);
        const auto th = random_theta(rng, k.interior_count(), 1.0);
        const WarpFn w(WarpParams(k, th), WarpGradient::full);
        std::vector<double> g(th.size());
        for (double t : {0.03, 0.21, 0.5, 0.68, 0.93}) {
            w.eval_with_gradient(t, g);
            for (std::size_t l = 0; l < th.size(); ++l) {
                const double h = 1e-6;
                auto tp = th, tm = th;
                tp[l] += h;
                tm[l] -= h;
                const double fd = (WarpFn(WarpParams(k, tp))(t) - WarpFn(WarpParams(k, tm))(t)) / (2 * h);
                worst = std::max(worst, std::abs(fd - g[l]) / std::max(1e-3, std::abs(fd)));
            }
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("default warp_eval holds knot slopes fixed") {
    const KnotVector k({0, 0.5, 1});
    const WarpParams p(k, {0.7});
    const auto e = warp_eval(p, 0.3, true);
    CHECK(e.w == doctest::Approx(WarpFn(p)(0.3)).epsilon(1e-14));
    // derivative of c through the Jupp map only, weighted by eta
    const WarpFn wf(p);
    const auto hb = hermite_basis(k, 0.3);
    CHECK(e.gradient[0] == doctest::Approx(hb.eta[1] * wf.dc_dtheta()[1]).epsilon(1e-12));
}

TEST_CASE("inverse warp") {
    std::mt19937_64 rng(29);
    for (int rep = 0; rep < 20; ++rep) {
        const KnotVector k = random_knots(rng, 3);
        const WarpParams p(k, random_theta(rng, k.interior_count(), 1.0));
        const WarpFn w(p);
        for (double u : {0.0, 0.1, 0.35, 0.8, 1.0}) CHECK(w(w.inverse(u)) == doctest::Approx(u).epsilon(1e-10));
        CHECK(warp_inverse(p, 0.5) == doctest::Approx(w.inverse(0.5)));
    }
}

TEST_CASE("exponential warp family") {
    CHECK(exp_warp(1.0, 0.5) == doctest::Approx(0.37754066879814546).epsilon(1e-14));
    CHECK(exp_warp(0.0, 0.3) == 0.3);
    CHECK(exp_warp(-0.7, 0.0) == 0.0);
    CHECK(exp_warp(-0.7, 1.0) == doctest::Approx(1.0));
    for (double a : {-1.0, -0.3, 0.4, 2.0})
        for (double u : {0.1, 0.5, 0.9}) CHECK(exp_warp(a, exp_warp_inverse(a, u)) == doctest::Approx(u).epsilon(1e-13));
}

TEST_CASE("invalid knots are rejected") {
    CHECK_THROWS_AS(KnotVector({0, 0.5, 0.5, 1}), Error);
    CHECK_THROWS_AS(KnotVector({0}), Error);
}
