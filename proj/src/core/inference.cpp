#include "inference.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace dcfr {

namespace {

Eigen::VectorXd values_of(const Curve& c) {
    const auto v = c.values();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// psi on an arbitrary axis, N x size
Eigen::MatrixXd basis_matrix(const UniSplineBasis& uni, const std::vector<double>& axis) {
    const auto q = static_cast<std::size_t>(uni.order());
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(uni.size()), static_cast<Eigen::Index>(axis.size()));
    std::vector<double> act(q);
    for (std::size_t m = 0; m < axis.size(); ++m) {
        const std::size_t f = uni.eval_active(axis[m], act);
        for (std::size_t r = 0; r < q; ++r) psi(static_cast<Eigen::Index>(f + r), static_cast<Eigen::Index>(m)) = act[r];
    }
    return psi;
}

Eigen::MatrixXd surface_on(const CausalBasis& basis, const std::vector<double>& b, const std::vector<double>& axis) {
    const Eigen::MatrixXd psi = basis_matrix(basis.uni(), axis);
    Eigen::MatrixXd S = psi.transpose() * basis.coefficient_matrix(b) * psi;
    for (Eigen::Index j = 0; j < S.cols(); ++j)
        for (Eigen::Index i = j + 1; i < S.rows(); ++i) S(i, j) = 0.0;
    return S;
}

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V, const Eigen::VectorXd& w) {
    return U.transpose() * w.asDiagonal() * V;
}

} // namespace

ProfileDerivatives profile_derivatives(const FitResult& fit, const CurveSample& X, const CurveSample& Y,
                                       const ProfileOptions& opts) {
    const FitProblem prob(X, Y, fit.config, fit.basis);
    const std::size_t n = prob.n(), r = prob.r(), P = prob.p();
    if (fit.warps.size() != n) throw ContractError("fit and data have different numbers of subjects");
    const Eigen::MatrixXd B = prob.basis().coefficient_matrix(fit.b_hat);
    const Eigen::VectorXd mu_x = values_of(fit.mu_x_tilde), mu_y = values_of(fit.mu_y_tilde);
    if (mu_x.size() != static_cast<Eigen::Index>(prob.M())) throw ContractError("fit working grid does not match the data");
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(prob.weights().data(), static_cast<Eigen::Index>(prob.M()));

    ProfileDerivatives out;
    out.grid = prob.grid();
    out.weights = prob.weights();
    out.subjects.resize(n);
    parallel_for(n, fit.config.threads, [&](std::size_t i) {
        SubjectDerivatives& sd = out.subjects[i];
        sd.theta = (opts.polish && r > 0) ? prob.solve_subject_warp(i, fit.warps[i], B, mu_x, mu_y) : fit.warps[i];
        const FitProblem::SubjectResidual s = prob.subject_residual(i, WarpFn(sd.theta, WarpGradient::full), B, mu_x, mu_y, r > 0);
        sd.f = s.resid;
        sd.d_b = -prob.regressors_from(s.C);
        const auto R = static_cast<Eigen::Index>(r);
        if (r == 0) {
            sd.d_theta.resize(static_cast<Eigen::Index>(prob.M()), 0);
            sd.d_b_theta.resize(0, static_cast<Eigen::Index>(P));
            sd.f_dot = sd.d_b;
            return;
        }
        sd.d_theta = s.jac;
        // derivative of the first-order condition <D_theta r, r> = 0 in theta
        Eigen::MatrixXd dF_theta = weighted_gram(s.jac, s.jac, w);
        const double h = opts.hessian_step;
        for (std::size_t m = 0; m < r; ++m) {
            std::vector<double> tp = sd.theta.theta, tm = sd.theta.theta;
            tp[m] += h;
            tm[m] -= h;
            const Eigen::MatrixXd jp =
                prob.subject_residual(i, WarpFn(WarpParams(sd.theta.knots, tp)), B, mu_x, mu_y, true).jac;
            const Eigen::MatrixXd jm =
                prob.subject_residual(i, WarpFn(WarpParams(sd.theta.knots, tm)), B, mu_x, mu_y, true).jac;
            const Eigen::MatrixXd H = (jp - jm) / (2.0 * h);
            for (Eigen::Index l = 0; l < R; ++l) dF_theta(l, static_cast<Eigen::Index>(m)) += prob.dot(H.col(l), s.resid);
        }
        dF_theta = 0.5 * (dF_theta + dF_theta.transpose()).eval();
        // ... and in b
        Eigen::MatrixXd dF_b(R, static_cast<Eigen::Index>(P));
        for (std::size_t l = 0; l < r; ++l) {
            const Eigen::MatrixXd dz = prob.regressors_from(s.Cd[l]);  // -d(D_theta r_l)/db
            dF_b.row(static_cast<Eigen::Index>(l)) =
                -(dz.transpose() * w.asDiagonal() * s.resid).transpose() + (s.jac.col(static_cast<Eigen::Index>(l)).transpose() * w.asDiagonal() * sd.d_b);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dF_theta);
        const double big = es.eigenvalues().cwiseAbs().maxCoeff();
        if (!(big > 0.0) || es.eigenvalues().cwiseAbs().minCoeff() < 1e-12 * big) {
            sd.singular = true;
            sd.d_b_theta = Eigen::MatrixXd::Zero(R, static_cast<Eigen::Index>(P));
            sd.f_dot = sd.d_b;
            return;
        }
        sd.d_b_theta = -dF_theta.ldlt().solve(dF_b);
        sd.f_dot = sd.d_theta * sd.d_b_theta + sd.d_b;
    });
    for (const auto& sd : out.subjects) out.singular_count += sd.singular ? 1 : 0;
    return out;
}

Eigen::VectorXd profile_residual(const FitResult& fit, const CurveSample& X, const CurveSample& Y, std::size_t i,
                                 const std::vector<double>& b, const WarpParams& start) {
    const FitProblem prob(X, Y, fit.config, fit.basis);
    const Eigen::MatrixXd B = prob.basis().coefficient_matrix(b);
    const Eigen::VectorXd mu_x = values_of(fit.mu_x_tilde), mu_y = values_of(fit.mu_y_tilde);
    const WarpParams th = prob.r() > 0 ? prob.solve_subject_warp(i, start, B, mu_x, mu_y) : start;
    return prob.subject_residual(i, WarpFn(th), B, mu_x, mu_y, false).resid;
}

AsymptoticCov asymptotic_cov(const ProfileDerivatives& d) {
    std::size_t used = 0;
    for (const auto& s : d.subjects) used += s.singular ? 0 : 1;
    if (used < 2) throw ContractError("asymptotic covariance needs at least two regular subjects");
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(d.weights.data(), static_cast<Eigen::Index>(d.weights.size()));
    const Eigen::Index P = d.subjects.front().f_dot.cols();
    AsymptoticCov c;
    c.n = used;
    c.gamma_hat = Eigen::MatrixXd::Zero(P, P);
    c.lambda_hat = Eigen::MatrixXd::Zero(P, P);
    for (const auto& s : d.subjects) {
        if (s.singular) continue;
        c.gamma_hat += weighted_gram(s.f_dot, s.f_dot, w);
        const Eigen::VectorXd g = s.f_dot.transpose() * w.asDiagonal() * s.f;
        c.lambda_hat += g * g.transpose();
    }
    const double nn = static_cast<double>(used);
    c.gamma_hat /= nn;
    c.lambda_hat /= nn;
    c.gamma_hat = 0.5 * (c.gamma_hat + c.gamma_hat.transpose()).eval();
    c.lambda_hat = 0.5 * (c.lambda_hat + c.lambda_hat.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.gamma_hat);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cut = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv(ev.size());
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        if (ev(k) > cut) inv(k) = 1.0 / ev(k);
        else {
            inv(k) = 0.0;
            c.rank_deficient = true;
        }
    }
    const Eigen::MatrixXd G = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    c.cov_b = G * c.lambda_hat * G / nn;
    c.cov_b = 0.5 * (c.cov_b + c.cov_b.transpose()).eval();
    return c;
}

double beta_variance(const AsymptoticCov& cov, const CausalBasis& basis, double s, double t) {
    if (s > t) {
        basis.eval_phi(s, t);  // domain check only
        return 0.0;
    }
    const std::vector<double> phi = basis.eval_phi(s, t);
    const Eigen::Map<const Eigen::VectorXd> f(phi.data(), static_cast<Eigen::Index>(phi.size()));
    if (f.size() != cov.cov_b.rows()) throw ContractError("covariance and basis sizes differ");
    return std::max(0.0, f.dot(cov.cov_b * f));
}

SurfaceGrid beta_grid(const FitResult& fit, std::size_t res) {
    const UniSplineBasis& uni = fit.basis->uni();
    SurfaceGrid g;
    g.axis = linspace(uni.a(), uni.b(), res);
    g.values = surface_on(*fit.basis, fit.b_hat, g.axis);
    return g;
}

VarianceSurface VarianceSurface::from_asymptotic(AsymptoticCov cov, std::shared_ptr<const CausalBasis> basis) {
    VarianceSurface v;
    v.source_ = Source::asymptotic;
    v.cov_ = std::move(cov);
    v.basis_ = std::move(basis);
    return v;
}

VarianceSurface VarianceSurface::from_grid(SurfaceGrid grid, std::size_t replicates, std::uint64_t seed) {
    VarianceSurface v;
    v.source_ = Source::bootstrap;
    v.grid_ = std::move(grid);
    v.replicates_ = replicates;
    v.seed_ = seed;
    return v;
}

double VarianceSurface::operator()(double s, double t) const {
    if (source_ == Source::asymptotic) return beta_variance(*cov_, *basis_, s, t);
    const auto& ax = grid_.axis;
    if (!(s >= ax.front() && s <= ax.back() && t >= ax.front() && t <= ax.back()))
        throw DomainError("variance evaluated outside the surface grid");
    if (s > t) return 0.0;
    auto cell = [&](double x) {
        std::size_t k = static_cast<std::size_t>(std::upper_bound(ax.begin(), ax.end(), x) - ax.begin());
        k = std::clamp<std::size_t>(k == 0 ? 0 : k - 1, 0, ax.size() - 2);
        return std::pair{k, (x - ax[k]) / (ax[k + 1] - ax[k])};
    };
    const auto [i, fs] = cell(s);
    const auto [j, ft] = cell(t);
    const auto& V = grid_.values;
    const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
    const double v = (1 - fs) * (1 - ft) * V(I, J) + fs * (1 - ft) * V(I + 1, J) + (1 - fs) * ft * V(I, J + 1) + fs * ft * V(I + 1, J + 1);
    return std::max(0.0, v);
}

SurfaceGrid VarianceSurface::sample(const std::vector<double>& axis) const {
    if (source_ == Source::bootstrap && axis == grid_.axis) return grid_;
    SurfaceGrid g;
    g.axis = axis;
    g.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(axis.size()), static_cast<Eigen::Index>(axis.size()));
    for (std::size_t j = 0; j < axis.size(); ++j)
        for (std::size_t i = 0; i <= j; ++i) g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(axis[i], axis[j]);
    return g;
}

VarianceSurface bootstrap_variance(const FitResult& fit, const CurveSample& X, const CurveSample& Y,
                                   const BootstrapOptions& opts) {
    if (opts.replicates < 2) throw ContractError("bootstrap needs at least 2 replicates");
    const std::size_t n = X.size();
    if (Y.size() != n || fit.warps.size() != n) throw ContractError("bootstrap data do not match the fit");
    const UniSplineBasis& uni = fit.basis->uni();
    const std::vector<double> axis = linspace(uni.a(), uni.b(), opts.res);
    const Eigen::MatrixXd psi = basis_matrix(uni, axis);
    std::vector<std::optional<Eigen::MatrixXd>> surfaces(opts.replicates);
    parallel_for(opts.replicates, opts.threads, [&](std::size_t rep) {
        auto rng = make_stream(opts.seed, rep, 0);
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::vector<Curve> xs, ys;
        std::vector<WarpParams> start;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t k = pick(rng);
            xs.push_back(X.curves[k]);
            ys.push_back(Y.curves[k]);
            start.push_back(fit.warps[k]);
        }
        try {
            const FitProblem prob(CurveSample(X.grid, std::move(xs)), CurveSample(Y.grid, std::move(ys)), fit.config, fit.basis);
            const FitResult f = alternating_fit(prob, fit.lambda_hat, start);
            Eigen::MatrixXd S = psi.transpose() * fit.basis->coefficient_matrix(f.b_hat) * psi;
            surfaces[rep] = std::move(S);
        } catch (const Error&) {
            // counted below
        }
    });
    std::size_t ok = 0;
    for (const auto& s : surfaces) ok += s ? 1 : 0;
    const std::size_t failed = opts.replicates - ok;
    if (static_cast<double>(failed) > 0.2 * static_cast<double>(opts.replicates))
        throw ContractError("more than 20% of bootstrap refits failed");
    if (ok < 2) throw ContractError("fewer than two successful bootstrap refits");
    const auto R = static_cast<Eigen::Index>(opts.res);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(R, R), var = Eigen::MatrixXd::Zero(R, R);
    for (const auto& s : surfaces)
        if (s) mean += *s;
    mean /= static_cast<double>(ok);
    for (const auto& s : surfaces)
        if (s) var += (*s - mean).cwiseAbs2();
    var /= static_cast<double>(ok - 1);
    for (Eigen::Index j = 0; j < R; ++j)
        for (Eigen::Index i = j + 1; i < R; ++i) var(i, j) = 0.0;
    VarianceSurface v = VarianceSurface::from_grid(SurfaceGrid{axis, var}, ok, opts.seed);
    v.set_failed(failed);
    return v;
}

SurfaceGrid significance_filter(const SurfaceGrid& beta, const SurfaceGrid& variance) {
    if (beta.axis != variance.axis) throw ContractError("surface and variance grids differ");
    SurfaceGrid out = beta;
    for (Eigen::Index j = 0; j < out.values.cols(); ++j)
        for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
            const double v = std::max(0.0, variance.values(i, j));
            if (!(std::abs(beta.values(i, j)) >= 2.0 * std::sqrt(v))) out.values(i, j) = 0.0;
        }
    return out;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) return std::nullopt;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<LandmarkCorrelation> landmark_stats(const std::vector<WarpParams>& warps,
                                                const std::vector<std::pair<std::size_t, std::size_t>>& gaps,
                                                std::size_t boot, std::uint64_t seed) {
    const std::size_t n = warps.size();
    if (n < 3) throw ContractError("landmark statistics need at least 3 subjects");
    const std::size_t K = warps.front().knots.size();
    for (const auto& [lo, hi] : gaps)
        if (lo >= K || hi >= K || lo == hi) throw ContractError("landmark gap refers to an invalid knot index");
    std::vector<std::vector<double>> diff(gaps.size(), std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::vector<double> c = jupp_inv(warps[i].theta, warps[i].knots);
        for (std::size_t g = 0; g < gaps.size(); ++g) diff[g][i] = c[gaps[g].second] - c[gaps[g].first];
    }
    std::vector<LandmarkCorrelation> out;
    for (std::size_t u = 0; u < gaps.size(); ++u)
        for (std::size_t v = u + 1; v < gaps.size(); ++v) {
            LandmarkCorrelation lc;
            lc.first = u;
            lc.second = v;
            const auto rho = pearson(diff[u], diff[v]);
            lc.defined = rho.has_value();
            lc.rho = rho.value_or(std::numeric_limits<double>::quiet_NaN());
            if (lc.defined && boot >= 2) {
                std::vector<double> draws;
                for (std::size_t b = 0; b < boot; ++b) {
                    auto rng = make_stream(seed, b, 1);
                    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
                    std::vector<double> xu(n), xv(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        const std::size_t k = pick(rng);
                        xu[i] = diff[u][k];
                        xv[i] = diff[v][k];
                    }
                    if (const auto r = pearson(xu, xv)) draws.push_back(*r);
                }
                lc.boot_used = draws.size();
                if (draws.size() >= 2) {
                    double m = 0;
                    for (double d : draws) m += d;
                    m /= static_cast<double>(draws.size());
                    double ss = 0;
                    for (double d : draws) ss += (d - m) * (d - m);
                    lc.se = std::sqrt(ss / static_cast<double>(draws.size() - 1));
                }
            }
            out.push_back(lc);
        }
    return out;
}

} // namespace dcfr
