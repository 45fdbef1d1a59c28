#include "predict.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadrature.hpp"

namespace dcfr {

namespace {

struct RegEval {
    double f = 0.0;
    Eigen::VectorXd g;
    Eigen::MatrixXd H;
};

class Registration {
public:
    Registration(const Curve& x, const Curve& target, const KnotVector& knots)
        : x_(x), target_(target), knots_(knots), t_(target.grid().points().begin(), target.grid().points().end()),
          w_(trapezoid_weights(t_)) {}

    double objective(const WarpParams& p) const {
        const WarpFn w(p, WarpGradient::hermite_values);
        double s = 0.0;
        for (std::size_t m = 0; m < t_.size(); ++m) {
            const double e = x_.eval_unchecked(std::clamp(w.eval(t_[m]), a(), b()), 0) - target_.values()[m];
            s += w_[m] * e * e;
        }
        return s;
    }

    RegEval linearize(const WarpParams& p) const {
        const WarpFn w(p, WarpGradient::full);
        const std::size_t r = p.theta.size();
        const auto R = static_cast<Eigen::Index>(r);
        RegEval out{0.0, Eigen::VectorXd::Zero(R), Eigen::MatrixXd::Zero(R, R)};
        std::vector<double> grad(r);
        Eigen::VectorXd row(R);
        for (std::size_t m = 0; m < t_.size(); ++m) {
            const double u = std::clamp(w.eval_with_gradient(t_[m], grad), a(), b());
            const double e = x_.eval_unchecked(u, 0) - target_.values()[m];
            const double xd = x_.eval_unchecked(u, 1);
            for (std::size_t l = 0; l < r; ++l) row(static_cast<Eigen::Index>(l)) = xd * grad[l];
            out.f += w_[m] * e * e;
            out.g += w_[m] * e * row;
            out.H += w_[m] * row * row.transpose();
        }
        return out;
    }

    // Levenberg-Marquardt from start; returns the best iterate and its objective.
    std::pair<WarpParams, double> run(WarpParams cur, const RegistrationOptions& opts) const {
        double f = objective(cur);
        double damping = 1e-3;
        const std::size_t r = cur.theta.size();
        for (int it = 0; it < opts.max_iter; ++it) {
            const RegEval L = linearize(cur);
            if (L.g.norm() == 0.0) break;
            const double scale = std::max(L.H.diagonal().maxCoeff(), 1e-300);
            bool accepted = false;
            double fn = f;
            for (int attempt = 0; attempt < 10; ++attempt) {
                Eigen::MatrixXd Hd = L.H;
                for (Eigen::Index l = 0; l < Hd.rows(); ++l) Hd(l, l) += damping * (L.H(l, l) + 1e-10 * scale);
                const Eigen::VectorXd delta = -Hd.ldlt().solve(L.g);
                std::vector<double> th(r);
                for (std::size_t l = 0; l < r; ++l)
                    th[l] = std::clamp(cur.theta[l] + delta(static_cast<Eigen::Index>(l)), -kThetaClamp, kThetaClamp);
                WarpParams cand(cur.knots, std::move(th));
                fn = objective(cand);
                if (std::isfinite(fn) && fn < f) {
                    cur = std::move(cand);
                    damping = std::max(damping / 10.0, 1e-12);
                    accepted = true;
                    break;
                }
                damping = std::min(damping * 10.0, 1e12);
            }
            if (!accepted) break;
            const double rel = (f - fn) / std::max(f, 1e-300);
            f = fn;
            if (rel < opts.rel_tol) break;
        }
        return {cur, f};
    }

private:
    double a() const { return t_.front(); }
    double b() const { return t_.back(); }

    const Curve& x_;
    const Curve& target_;
    KnotVector knots_;
    std::vector<double> t_, w_;
};

} // namespace

double registration_objective(const Curve& x_new, const Curve& target, const WarpParams& warp) {
    return Registration(x_new, target, warp.knots).objective(warp);
}

WarpParams register_new(const Curve& x_new, const Curve& target, const KnotVector& knots, double* objective,
                        const RegistrationOptions& opts) {
    if (x_new.a() != target.a() || x_new.b() != target.b()) throw DomainError("new covariate and fitted mean live on different intervals");
    const std::size_t r = knots.interior_count();
    WarpParams best = WarpParams::identity(knots);
    const Registration reg(x_new, target, knots);
    if (r == 0) {
        if (objective) *objective = reg.objective(best);
        return best;
    }
    auto [p0, f0] = reg.run(best, opts);
    best = std::move(p0);
    double fbest = f0;
    for (double start : {0.5, -0.5}) {
        WarpParams shifted = WarpParams::identity(knots);
        for (double& th : shifted.theta) th += start;
        auto [p, f] = reg.run(shifted, opts);
        if (f < fbest) {
            fbest = f;
            best = std::move(p);
        }
    }
    if (objective) *objective = fbest;
    return best;
}

Curve predict_with_warp(const std::function<double(double)>& x, const FitResult& fit, const WarpParams& warp) {
    const TimeGrid& tg = fit.mu_x_tilde.grid();
    const std::vector<double> g(tg.points().begin(), tg.points().end());
    const std::size_t M = g.size();
    const CausalBasis& basis = *fit.basis;
    const UniSplineBasis& uni = basis.uni();
    const std::size_t N = uni.size();
    const auto q = static_cast<std::size_t>(uni.order());
    const Eigen::MatrixXd B = basis.coefficient_matrix(fit.b_hat);
    const WarpFn w(warp, WarpGradient::hermite_values);
    const bool warped = warp.theta.size() > 0;
    const double a = g.front(), b = g.back();

    // psi on the grid and the warped covariate at the nodes
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
    std::vector<double> act(q);
    for (std::size_t m = 0; m < M; ++m) {
        const std::size_t f = uni.eval_active(g[m], act);
        for (std::size_t r = 0; r < q; ++r) psi(static_cast<Eigen::Index>(f + r), static_cast<Eigen::Index>(m)) = act[r];
    }
    Eigen::VectorXd xt(static_cast<Eigen::Index>(M));
    for (std::size_t m = 0; m < M; ++m) xt(static_cast<Eigen::Index>(m)) = x(warped ? std::clamp(w.eval(g[m]), a, b) : g[m]);
    // cumulative integrals of psi_l * xt at the nodes
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M));
    for (std::size_t m = 1; m < M; ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        C.col(mi) = C.col(mi - 1) + 0.5 * (g[m] - g[m - 1]) * (psi.col(mi) * xt(mi) + psi.col(mi - 1) * xt(mi - 1));
    }

    std::vector<double> out(M);
    Eigen::VectorXd psi_u(static_cast<Eigen::Index>(N));
    for (std::size_t m = 0; m < M; ++m) {
        const double u = warped ? std::clamp(w.inverse(g[m]), a, b) : g[m];
        // node k with g[k] <= u, then a partial panel [g[k], u]
        std::size_t k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), u) - g.begin());
        k = std::min(k == 0 ? 0 : k - 1, M - 1);
        psi_u.setZero();
        const std::size_t f = uni.eval_active(u, act);
        for (std::size_t r = 0; r < q; ++r) psi_u(static_cast<Eigen::Index>(f + r)) = act[r];
        const auto ki = static_cast<Eigen::Index>(k);
        Eigen::VectorXd cu = C.col(ki);
        const double h = u - g[k];
        if (h > 0.0) {
            const double xu = x(warped ? g[m] : u);
            cu += 0.5 * h * (psi.col(ki) * xt(ki) + psi_u * xu);
        }
        out[m] = fit.alpha_hat.eval_unchecked(u, 0) + psi_u.dot(B.transpose() * cu);
    }
    return Curve(tg, std::move(out));
}

Prediction predict_response(const Curve& x_new, const FitResult& fit, const RegistrationOptions& opts) {
    Prediction p;
    p.warp = register_new(x_new, fit.mu_x_tilde, fit.warp_knots(), &p.registration_objective, opts);
    p.y_hat = predict_with_warp([&](double s) { return x_new.eval_unchecked(s, 0); }, fit, p.warp);
    return p;
}

double mspe(const FitResult& fit, const CurveSample& x_test, const CurveSample& y_test) {
    if (x_test.size() != y_test.size() || x_test.size() == 0) throw ContractError("test covariates and responses must be nonempty and paired");
    const TimeGrid& tg = fit.mu_x_tilde.grid();
    double total = 0.0;
    for (std::size_t i = 0; i < x_test.size(); ++i) {
        const Prediction p = predict_response(x_test.curves[i], fit);
        std::vector<double> diff(tg.size());
        for (std::size_t m = 0; m < tg.size(); ++m) diff[m] = y_test.curves[i].eval(tg[m]) - p.y_hat.values()[m];
        const double nrm = l2_norm(Curve(tg, std::move(diff)));
        total += nrm * nrm;
    }
    return total / static_cast<double>(x_test.size());
}

} // namespace dcfr
