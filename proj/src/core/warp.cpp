#include "warp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "errors.hpp"

namespace dcfr {

namespace {

double h0(double u) { return (u < 0.0 || u > 1.0) ? 0.0 : (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u); }
double h1(double u) { return (u < 0.0 || u > 1.0) ? 0.0 : u * (1.0 - u) * (1.0 - u); }

void check_domain(const KnotVector& knots, double t) {
    if (!(t >= knots.a() && t <= knots.b())) {
        std::ostringstream os;
        os << "warp evaluated at t=" << t << " outside [" << knots.a() << "," << knots.b() << "]";
        throw DomainError(os.str());
    }
}

} // namespace

KnotVector::KnotVector(std::vector<double> tau) : tau_(std::move(tau)) {
    if (tau_.size() < 2) throw ContractError("warp knots need at least the two endpoints");
    for (std::size_t k = 1; k < tau_.size(); ++k)
        if (!(tau_[k] > tau_[k - 1])) throw ContractError("warp knots must be strictly increasing");
}

std::size_t KnotVector::interval(double t) const {
    auto it = std::upper_bound(tau_.begin(), tau_.end(), t);
    auto k = static_cast<std::ptrdiff_t>(it - tau_.begin()) - 1;
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(k, 0, static_cast<std::ptrdiff_t>(tau_.size()) - 2));
}

WarpParams::WarpParams(KnotVector k, std::vector<double> th) : knots(std::move(k)), theta(std::move(th)) {
    if (theta.size() != knots.interior_count()) throw ContractError("theta length must equal the number of interior warp knots");
}

WarpParams WarpParams::identity(const KnotVector& k) {
    return WarpParams(k, jupp(k.values(), k));
}

HermiteBasisValues hermite_basis(const KnotVector& knots, double t) {
    check_domain(knots, t);
    const std::size_t n = knots.size();
    const std::size_t r1 = n - 1;  // index r+1
    HermiteBasisValues v{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    const auto& tau = knots.values();
    for (std::size_t k = 0; k < n; ++k) {
        if (k == 0) {
            const double len = tau[1] - tau[0];
            v.eta[k] = h0((t - tau[0]) / len);
            v.xi[k] = h1((t - tau[0]) / len) * len;
        } else if (k == r1) {
            const double len = tau[r1] - tau[r1 - 1];
            v.eta[k] = h0((tau[r1] - t) / len);
            v.xi[k] = -h1((tau[r1] - t) / len) * len;
        } else {
            const double right = tau[k + 1] - tau[k];
            const double left = tau[k] - tau[k - 1];
            v.eta[k] = h0((t - tau[k]) / right) + h0((tau[k] - t) / left) - (t == tau[k] ? 1.0 : 0.0);
            v.xi[k] = h1((t - tau[k]) / right) * right - h1((tau[k] - t) / left) * left;
        }
    }
    return v;
}

std::vector<double> fritsch_carlson(std::span<const double> c, const KnotVector& knots) {
    const std::size_t n = knots.size();
    if (c.size() != n) throw ContractError("knot values must have one entry per knot");
    if (c[0] != knots.a() || c[n - 1] != knots.b()) throw ContractError("knot values must fix the endpoints");
    std::vector<double> slope(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        if (!(c[k + 1] > c[k])) throw ContractError("knot values must be strictly increasing");
        slope[k] = (c[k + 1] - c[k]) / (knots[k + 1] - knots[k]);
    }
    std::vector<double> d(n);
    d[0] = slope[0];
    d[n - 1] = slope[n - 2];
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double s0 = slope[k - 1], s1 = slope[k];
        d[k] = (s0 > 0.0 && s1 > 0.0) ? 2.0 * s0 * s1 / (s0 + s1) : 0.0;
    }
    // monotonicity region alpha^2 + beta^2 <= 9
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double al = d[k] / slope[k], be = d[k + 1] / slope[k];
        const double rad = al * al + be * be;
        if (rad > 9.0) {
            const double s = 3.0 / std::sqrt(rad);
            d[k] = s * al * slope[k];
            d[k + 1] = s * be * slope[k];
        }
    }
    // strict-increase guard
    const double floor = 1e-8 * *std::min_element(slope.begin(), slope.end());
    for (double& dk : d) dk = std::max(dk, floor);
    return d;
}

std::vector<double> jupp(std::span<const double> c, const KnotVector& knots) {
    const std::size_t n = knots.size();
    if (c.size() != n) throw ContractError("knot values must have one entry per knot");
    std::vector<double> theta(n - 2);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        const double up = c[k + 1] - c[k], down = c[k] - c[k - 1];
        if (!(up > 0.0) || !(down > 0.0)) throw ContractError("Jupp transform needs strictly increasing knot values");
        theta[k - 1] = std::log(up / down);
    }
    return theta;
}

std::vector<double> jupp_inv(std::span<const double> theta, const KnotVector& knots) {
    const std::size_t r = knots.interior_count();
    if (theta.size() != r) throw ContractError("theta length must equal the number of interior warp knots");
    for (double th : theta)
        if (!std::isfinite(th) || std::abs(th) > kThetaOverflow) throw ContractError("theta component out of range");
    // gap_j proportional to exp(S_j), S_j = theta_1 + ... + theta_j
    std::vector<double> S(r + 1, 0.0);
    for (std::size_t j = 1; j <= r; ++j) S[j] = S[j - 1] + theta[j - 1];
    const double smax = *std::max_element(S.begin(), S.end());
    double total = 0.0;
    for (double& s : S) {
        s = std::exp(s - smax);
        total += s;
    }
    const double len = knots.b() - knots.a();
    std::vector<double> c(r + 2);
    c[0] = knots.a();
    double acc = knots.a();
    for (std::size_t j = 0; j < r; ++j) {
        acc += len * S[j] / total;
        c[j + 1] = acc;
    }
    c[r + 1] = knots.b();
    return c;
}

WarpFn::WarpFn(const WarpParams& params, WarpGradient mode) : knots_(params.knots) {
    c_ = jupp_inv(params.theta, knots_);
    build(mode, &params.theta);
}

WarpFn WarpFn::from_knot_values(const KnotVector& knots, std::vector<double> c, WarpGradient mode) {
    WarpFn w;
    w.knots_ = knots;
    w.c_ = std::move(c);
    const std::vector<double> theta = jupp(w.c_, knots);
    w.build(mode, &theta);
    return w;
}

void WarpFn::build(WarpGradient mode, const std::vector<double>* theta) {
    mode_ = mode;
    d_ = fritsch_carlson(c_, knots_);
    const std::size_t n = knots_.size();
    const std::size_t r = n - 2;
    dc_.assign(n * r, 0.0);
    dd_.assign(n * r, 0.0);
    if (r == 0 || theta == nullptr) return;

    // gaps g_j = c_{j+1} - c_j; dg_j/dtheta_l = g_j (1{l<=j} - sum_{m>=l} g_m / L)
    const double len = knots_.b() - knots_.a();
    std::vector<double> g(r + 1);
    for (std::size_t j = 0; j <= r; ++j) g[j] = c_[j + 1] - c_[j];
    std::vector<double> tail(r + 2, 0.0);  // tail[l] = sum_{m>=l} g_m
    for (std::size_t m = r + 1; m-- > 0;) tail[m] = tail[m + 1] + g[m];
    std::vector<double> dg((r + 1) * r, 0.0);
    for (std::size_t j = 0; j <= r; ++j)
        for (std::size_t l = 1; l <= r; ++l)
            dg[j * r + (l - 1)] = g[j] * ((l <= j ? 1.0 : 0.0) - tail[l] / len);
    for (std::size_t k = 1; k <= r; ++k)
        for (std::size_t l = 0; l < r; ++l) dc_[k * r + l] = dc_[(k - 1) * r + l] + dg[(k - 1) * r + l];

    if (mode != WarpGradient::full) return;
    // Harmonic-mean derivatives keep alpha, beta <= 2, so the circle projection never binds and
    // d is a smooth function of the secant slopes.
    std::vector<double> slope(r + 1), dslope((r + 1) * r);
    for (std::size_t j = 0; j <= r; ++j) {
        const double h = knots_[j + 1] - knots_[j];
        slope[j] = g[j] / h;
        for (std::size_t l = 0; l < r; ++l) dslope[j * r + l] = dg[j * r + l] / h;
    }
    for (std::size_t l = 0; l < r; ++l) {
        dd_[0 * r + l] = dslope[0 * r + l];
        dd_[(r + 1) * r + l] = dslope[r * r + l];
    }
    for (std::size_t k = 1; k <= r; ++k) {
        const double s0 = slope[k - 1], s1 = slope[k];
        const double sum = s0 + s1;
        const double a0 = 2.0 * s1 * s1 / (sum * sum), a1 = 2.0 * s0 * s0 / (sum * sum);
        for (std::size_t l = 0; l < r; ++l) dd_[k * r + l] = a0 * dslope[(k - 1) * r + l] + a1 * dslope[k * r + l];
    }
}

double WarpFn::eval(double t) const {
    if (t <= knots_.a()) return knots_.a();
    if (t >= knots_.b()) return knots_.b();
    const std::size_t k = knots_.interval(t);
    const double h = knots_[k + 1] - knots_[k];
    const double u = (t - knots_[k]) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h01 = -2 * u3 + 3 * u2;
    const double h10 = u3 - 2 * u2 + u, h11 = u3 - u2;
    return c_[k] * h00 + c_[k + 1] * h01 + h * (d_[k] * h10 + d_[k + 1] * h11);
}

double WarpFn::deriv(double t) const {
    const double tc = std::clamp(t, knots_.a(), knots_.b());
    const std::size_t k = knots_.interval(tc);
    const double h = knots_[k + 1] - knots_[k];
    const double u = (tc - knots_[k]) / h;
    const double u2 = u * u;
    const double g00 = 6 * u2 - 6 * u, g01 = -6 * u2 + 6 * u;
    const double g10 = 3 * u2 - 4 * u + 1, g11 = 3 * u2 - 2 * u;
    return (c_[k] * g00 + c_[k + 1] * g01) / h + d_[k] * g10 + d_[k + 1] * g11;
}

double WarpFn::eval_with_gradient(double t, std::span<double> grad) const {
    const std::size_t r = dim();
    const double tc = std::clamp(t, knots_.a(), knots_.b());
    const std::size_t k = knots_.interval(tc);
    const double h = knots_[k + 1] - knots_[k];
    const double u = (tc - knots_[k]) / h;
    const double u2 = u * u, u3 = u2 * u;
    const double h00 = 2 * u3 - 3 * u2 + 1, h01 = -2 * u3 + 3 * u2;
    const double h10 = h * (u3 - 2 * u2 + u), h11 = h * (u3 - u2);
    for (std::size_t l = 0; l < r; ++l)
        grad[l] = h00 * dc_[k * r + l] + h01 * dc_[(k + 1) * r + l] + h10 * dd_[k * r + l] + h11 * dd_[(k + 1) * r + l];
    if (tc <= knots_.a()) return knots_.a();
    if (tc >= knots_.b()) return knots_.b();
    return c_[k] * h00 + c_[k + 1] * h01 + d_[k] * h10 + d_[k + 1] * h11;
}

double WarpFn::inverse(double u) const {
    const double a = knots_.a(), b = knots_.b();
    if (u <= a) return a;
    if (u >= b) return b;
    // the knot values bracket the answer
    auto it = std::upper_bound(c_.begin(), c_.end(), u);
    std::size_t k = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>((it - c_.begin()) - 1, 0, static_cast<std::ptrdiff_t>(c_.size()) - 2));
    double lo = knots_[k], hi = knots_[k + 1];
    double t = lo + (hi - lo) * (u - c_[k]) / (c_[k + 1] - c_[k]);
    const double tol = 1e-14 * (b - a);
    for (int it2 = 0; it2 < 200; ++it2) {
        const double f = eval(t) - u;
        if (std::abs(f) <= tol) break;
        if (f > 0.0) hi = t;
        else lo = t;
        const double df = deriv(t);
        double next = (df > 0.0) ? t - f / df : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (hi - lo <= tol) {
            t = 0.5 * (lo + hi);
            break;
        }
        t = next;
    }
    return t;
}

WarpEval warp_eval(const WarpParams& params, double t, bool want_gradient, WarpGradient mode) {
    check_domain(params.knots, t);
    const WarpFn w(params, mode);
    WarpEval out;
    if (want_gradient) {
        out.gradient.assign(w.dim(), 0.0);
        out.w = w.eval_with_gradient(t, out.gradient);
    } else {
        out.w = w.eval(t);
    }
    return out;
}

double warp_inverse(const WarpParams& params, double u) {
    check_domain(params.knots, u);
    return WarpFn(params, WarpGradient::hermite_values).inverse(u);
}

} // namespace dcfr
