#include "fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "errors.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace dcfr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd to_vec(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

std::vector<double> default_lambda_grid() {
    std::vector<double> g;
    for (int i = 20; i >= 4; --i) g.push_back(std::pow(10.0, -0.25 * i));
    return g;
}

UniSplineBasis BasisSpec::build(double a, double b) const {
    if (!interior_knots.empty()) return UniSplineBasis(a, b, order, interior_knots);
    return UniSplineBasis::uniform(a, b, order, interior_count);
}

void FitConfig::validate() const {
    if (lambda_grid.empty()) throw ContractError("lambda grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0)) throw ContractError("lambda grid values must be positive");
        if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) throw ContractError("lambda grid must be sorted ascending");
    }
    if (!(rel_tol > 0.0)) throw ContractError("rel_tol must be positive");
    if (max_outer < 1) throw ContractError("max_outer must be >= 1");
    if (backtrack_max < 1) throw ContractError("backtrack_max must be >= 1");
}

// ---------------------------------------------------------------------------------------------
// FitProblem

FitProblem::FitProblem(const CurveSample& X, const CurveSample& Y, const FitConfig& config,
                       std::shared_ptr<const CausalBasis> basis)
    : config_(config), basis_(std::move(basis)), x_(X.curves), y_(Y.curves) {
    if (X.size() != Y.size()) throw ContractError("covariate and response samples differ in size");
    if (!(X.grid == Y.grid)) throw ContractError("covariates and responses must share one grid");
    if (X.size() < 2) throw ContractError("fitting needs at least two subjects");
    const double a = X.grid.a(), b = X.grid.b();
    if (basis_->uni().a() != a || basis_->uni().b() != b) throw ContractError("basis domain differs from the data interval");
    if (config_.warp_knots.a() != a || config_.warp_knots.b() != b) {
        if (config_.warp_knots.interior_count() == 0) config_.warp_knots = KnotVector({a, b});
        else throw ContractError("warp knots must span the data interval");
    }
    if (config_.work_points == 0) grid_.assign(X.grid.points().begin(), X.grid.points().end());
    else grid_ = linspace(a, b, config_.work_points);
    weights_ = trapezoid_weights(grid_);
    time_grid_ = TimeGrid(grid_);

    const auto q = static_cast<std::size_t>(basis_->uni().order());
    psi_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N()), static_cast<Eigen::Index>(M()));
    first_active_.resize(M());
    double act[16];
    for (std::size_t m = 0; m < M(); ++m) {
        const std::size_t f = basis_->uni().eval_active(grid_[m], std::span<double>(act, q));
        first_active_[m] = f;
        for (std::size_t r = 0; r < q; ++r) psi_(static_cast<Eigen::Index>(f + r), static_cast<Eigen::Index>(m)) = act[r];
    }
}

FitProblem::Warped FitProblem::warp_subject(std::size_t i, const WarpFn& w, bool derivatives) const {
    const auto Mi = static_cast<Eigen::Index>(M());
    const std::size_t rr = w.dim();
    Warped out;
    out.x.resize(Mi);
    out.y.resize(Mi);
    if (derivatives) {
        out.xd.resize(Mi);
        out.yd.resize(Mi);
        out.dw.resize(Mi, static_cast<Eigen::Index>(rr));
    }
    const double a = grid_.front(), b = grid_.back();
    std::vector<double> grad(rr);
    for (std::size_t m = 0; m < M(); ++m) {
        double u;
        if (rr == 0) u = grid_[m];
        else if (derivatives) u = w.eval_with_gradient(grid_[m], grad);
        else u = w.eval(grid_[m]);
        u = std::clamp(u, a, b);
        const auto mi = static_cast<Eigen::Index>(m);
        out.x(mi) = x_[i].eval_unchecked(u, 0);
        out.y(mi) = y_[i].eval_unchecked(u, 0);
        if (derivatives) {
            out.xd(mi) = x_[i].eval_unchecked(u, 1);
            out.yd(mi) = y_[i].eval_unchecked(u, 1);
            for (std::size_t l = 0; l < rr; ++l) out.dw(mi, static_cast<Eigen::Index>(l)) = grad[l];
        }
    }
    return out;
}

Eigen::MatrixXd FitProblem::cumulative(const Eigen::VectorXd& f) const {
    const std::size_t Nn = N(), Mm = M();
    Eigen::MatrixXd C(static_cast<Eigen::Index>(Nn), static_cast<Eigen::Index>(Mm));
    for (std::size_t l = 0; l < Nn; ++l) {
        const auto li = static_cast<Eigen::Index>(l);
        double acc = 0.0;
        double prev = psi_(li, 0) * f(0);
        C(li, 0) = 0.0;
        for (std::size_t m = 1; m < Mm; ++m) {
            const auto mi = static_cast<Eigen::Index>(m);
            const double cur = psi_(li, mi) * f(mi);
            acc += 0.5 * (grid_[m] - grid_[m - 1]) * (cur + prev);
            C(li, mi) = acc;
            prev = cur;
        }
    }
    return C;
}

Eigen::VectorXd FitProblem::apply_slope(const Eigen::MatrixXd& B, const Eigen::MatrixXd& C) const {
    const Eigen::MatrixXd H = B.transpose() * C;
    return psi_.cwiseProduct(H).colwise().sum().transpose();
}

double FitProblem::norm2(const Eigen::VectorXd& f) const {
    double s = 0.0;
    for (std::size_t m = 0; m < M(); ++m) s += weights_[m] * f(static_cast<Eigen::Index>(m)) * f(static_cast<Eigen::Index>(m));
    return s;
}

double FitProblem::dot(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
    double s = 0.0;
    for (std::size_t m = 0; m < M(); ++m) s += weights_[m] * f(static_cast<Eigen::Index>(m)) * g(static_cast<Eigen::Index>(m));
    return s;
}

Eigen::MatrixXd FitProblem::regressors_from(const Eigen::MatrixXd& C) const {
    Eigen::MatrixXd Z(static_cast<Eigen::Index>(M()), static_cast<Eigen::Index>(p()));
    const auto& pairs = basis_->retained();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(pairs[k].s_index);
        const auto j = static_cast<Eigen::Index>(pairs[k].t_index);
        Z.col(static_cast<Eigen::Index>(k)) = psi_.row(j).transpose().cwiseProduct(C.row(i).transpose());
    }
    return Z;
}

NormalEquations FitProblem::normal_equations(const std::vector<Eigen::MatrixXd>& C,
                                             const std::vector<Eigen::VectorXd>& y_centered) const {
    const std::size_t Nn = N(), P = p();
    const auto q = static_cast<std::size_t>(basis_->uni().order());
    // for each t-index j: list of (s-index i, retained position k)
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> by_t(Nn);
    const auto& pairs = basis_->retained();
    for (std::size_t k = 0; k < P; ++k) by_t[pairs[k].t_index].push_back({pairs[k].s_index, k});

    NormalEquations eq;
    eq.n = C.size();
    eq.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(P));
    eq.c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
    Eigen::MatrixXd K(static_cast<Eigen::Index>(Nn), static_cast<Eigen::Index>(Nn));
    Eigen::VectorXd V(static_cast<Eigen::Index>(Nn));
    for (std::size_t m = 0; m < M(); ++m) {
        const auto mi = static_cast<Eigen::Index>(m);
        K.setZero();
        V.setZero();
        for (std::size_t s = 0; s < C.size(); ++s) {
            const auto col = C[s].col(mi);
            K.noalias() += col * col.transpose();
            V.noalias() += col * y_centered[s](mi);
        }
        const double w = weights_[m];
        const std::size_t f = first_active_[m];
        for (std::size_t ra = 0; ra < q; ++ra) {
            const std::size_t ja = f + ra;
            const double pa = psi_(static_cast<Eigen::Index>(ja), mi);
            if (pa == 0.0) continue;
            for (const auto& [i, k] : by_t[ja]) eq.c(static_cast<Eigen::Index>(k)) += w * pa * V(static_cast<Eigen::Index>(i));
            for (std::size_t rb = 0; rb < q; ++rb) {
                const std::size_t jb = f + rb;
                const double pb = psi_(static_cast<Eigen::Index>(jb), mi);
                if (pb == 0.0) continue;
                const double coef = w * pa * pb;
                for (const auto& [i, k] : by_t[ja])
                    for (const auto& [ii, kk] : by_t[jb])
                        eq.A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(kk)) +=
                            coef * K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ii));
            }
        }
    }
    return eq;
}

FitProblem::SubjectResidual FitProblem::subject_residual(std::size_t i, const WarpFn& w, const Eigen::MatrixXd& B,
                                                         const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y,
                                                         bool jacobian) const {
    const Warped wd = warp_subject(i, w, jacobian);
    SubjectResidual out;
    out.C = cumulative(wd.x - mu_x);
    out.resid = (wd.y - mu_y) - apply_slope(B, out.C);
    if (jacobian) {
        const std::size_t rr = w.dim();
        out.jac.resize(static_cast<Eigen::Index>(M()), static_cast<Eigen::Index>(rr));
        out.Cd.resize(rr);
        for (std::size_t l = 0; l < rr; ++l) {
            const auto li = static_cast<Eigen::Index>(l);
            out.Cd[l] = cumulative(wd.xd.cwiseProduct(wd.dw.col(li)));
            out.jac.col(li) = wd.yd.cwiseProduct(wd.dw.col(li)) - apply_slope(B, out.Cd[l]);
        }
    }
    return out;
}

namespace {

std::vector<double> clamp_theta(std::vector<double> th) {
    for (double& v : th) v = std::clamp(v, -kThetaClamp, kThetaClamp);
    return th;
}

} // namespace

WarpParams FitProblem::warp_step(std::size_t i, const WarpParams& current, const Eigen::MatrixXd& B,
                                 const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y, double& damping) const {
    const std::size_t rr = current.theta.size();
    if (rr == 0) return current;
    const WarpFn w0(current, WarpGradient::full);
    const SubjectResidual s0 = subject_residual(i, w0, B, mu_x, mu_y, true);
    const double f0 = norm2(s0.resid);
    const auto R = static_cast<Eigen::Index>(rr);
    Eigen::MatrixXd H(R, R);
    Eigen::VectorXd g(R);
    for (Eigen::Index l = 0; l < R; ++l) {
        g(l) = dot(s0.jac.col(l), s0.resid);
        for (Eigen::Index k = 0; k <= l; ++k) H(l, k) = H(k, l) = dot(s0.jac.col(l), s0.jac.col(k));
    }
    if (g.norm() == 0.0) return current;
    const double scale = std::max(H.diagonal().maxCoeff(), 1e-300);
    for (int attempt = 0; attempt < config_.backtrack_max; ++attempt) {
        Eigen::MatrixXd Hd = H;
        for (Eigen::Index l = 0; l < R; ++l) Hd(l, l) += damping * (H(l, l) + 1e-10 * scale);
        const Eigen::VectorXd delta = -Hd.ldlt().solve(g);
        std::vector<double> th(rr);
        for (std::size_t l = 0; l < rr; ++l) th[l] = current.theta[l] + delta(static_cast<Eigen::Index>(l));
        WarpParams cand(current.knots, clamp_theta(std::move(th)));
        const double f1 = norm2(subject_residual(i, WarpFn(cand, WarpGradient::hermite_values), B, mu_x, mu_y, false).resid);
        if (std::isfinite(f1) && f1 < f0) {
            damping = std::max(damping / 10.0, 1e-12);
            return cand;
        }
        damping = std::min(damping * 10.0, 1e12);
    }
    return current;
}

WarpParams FitProblem::solve_subject_warp(std::size_t i, const WarpParams& start, const Eigen::MatrixXd& B,
                                          const Eigen::VectorXd& mu_x, const Eigen::VectorXd& mu_y,
                                          int max_iter, double tol) const {
    WarpParams cur = start;
    double damping = 1e-3;
    double f = norm2(subject_residual(i, WarpFn(cur), B, mu_x, mu_y, false).resid);
    int stalls = 0;
    for (int it = 0; it < max_iter; ++it) {
        WarpParams next = warp_step(i, cur, B, mu_x, mu_y, damping);
        if (next.theta == cur.theta) {
            if (++stalls >= 2) break;
            damping = 1e-6;
            continue;
        }
        stalls = 0;
        const double fn = norm2(subject_residual(i, WarpFn(next), B, mu_x, mu_y, false).resid);
        double step = 0.0;
        for (std::size_t l = 0; l < cur.theta.size(); ++l) step = std::max(step, std::abs(next.theta[l] - cur.theta[l]));
        cur = std::move(next);
        const bool small = (f - fn) <= tol * std::max(f, 1e-300) && step < 1e-12;
        f = fn;
        if (small) break;
    }
    // Newton on the first-order condition <D_theta r, r> = 0 with a finite-difference Hessian term
    const std::size_t rr = cur.theta.size();
    const auto R = static_cast<Eigen::Index>(rr);
    auto gradient = [&](const WarpParams& p, Eigen::MatrixXd* jac, Eigen::VectorXd* res) {
        const SubjectResidual s = subject_residual(i, WarpFn(p), B, mu_x, mu_y, true);
        Eigen::VectorXd g(R);
        for (Eigen::Index l = 0; l < R; ++l) g(l) = dot(s.jac.col(l), s.resid);
        if (jac) *jac = s.jac;
        if (res) *res = s.resid;
        return g;
    };
    Eigen::MatrixXd J;
    Eigen::VectorXd res;
    Eigen::VectorXd g = gradient(cur, &J, &res);
    for (int it = 0; it < 20 && g.norm() > 0.0; ++it) {
        Eigen::MatrixXd H(R, R);
        for (Eigen::Index l = 0; l < R; ++l)
            for (Eigen::Index k = 0; k < R; ++k) H(l, k) = dot(J.col(l), J.col(k));
        const double h = 1e-5;
        for (std::size_t m = 0; m < rr; ++m) {
            std::vector<double> tp = cur.theta, tm = cur.theta;
            tp[m] += h;
            tm[m] -= h;
            const Eigen::MatrixXd jp = subject_residual(i, WarpFn(WarpParams(cur.knots, tp)), B, mu_x, mu_y, true).jac;
            const Eigen::MatrixXd jm = subject_residual(i, WarpFn(WarpParams(cur.knots, tm)), B, mu_x, mu_y, true).jac;
            for (Eigen::Index l = 0; l < R; ++l) H(l, static_cast<Eigen::Index>(m)) += dot((jp.col(l) - jm.col(l)) / (2.0 * h), res);
        }
        H = 0.5 * (H + H.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
        if (!(es.eigenvalues().minCoeff() > 0.0)) break;  // not a local minimum basin; keep the GN answer
        const Eigen::VectorXd delta = -H.ldlt().solve(g);
        std::vector<double> th(rr);
        for (std::size_t l = 0; l < rr; ++l) th[l] = std::clamp(cur.theta[l] + delta(static_cast<Eigen::Index>(l)), -kThetaClamp, kThetaClamp);
        WarpParams next(cur.knots, std::move(th));
        Eigen::MatrixXd Jn;
        Eigen::VectorXd rn;
        const Eigen::VectorXd gn = gradient(next, &Jn, &rn);
        if (!(gn.norm() < g.norm())) break;
        cur = std::move(next);
        g = gn;
        J = std::move(Jn);
        res = std::move(rn);
    }
    return cur;
}

Curve FitProblem::grid_curve(const Eigen::VectorXd& v) const { return Curve(time_grid_, to_std(v)); }

// ---------------------------------------------------------------------------------------------
// Free functions

RegressorCurves compute_regressors(const CurveSample& X, const std::vector<WarpParams>& warps,
                                   const CausalBasis& basis, std::size_t work_points) {
    if (warps.size() != X.size()) throw ContractError("one warp per subject is required");
    FitConfig cfg;
    cfg.work_points = work_points;
    cfg.warp_knots = warps.front().knots;
    auto bp = std::make_shared<const CausalBasis>(basis);
    // responses are not used; reuse the covariates to satisfy the problem constructor
    CurveSample Xs = X;
    if (Xs.size() < 2) Xs.curves.push_back(Xs.curves.front());
    const FitProblem prob(Xs, Xs, cfg, bp);
    const std::size_t n = X.size();
    std::vector<Eigen::VectorXd> xw(n);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(prob.M()));
    for (std::size_t i = 0; i < n; ++i) {
        xw[i] = prob.warp_subject(i, WarpFn(warps[i]), false).x;
        mean += xw[i];
    }
    mean /= static_cast<double>(n);
    RegressorCurves out;
    out.grid = prob.grid();
    for (std::size_t i = 0; i < n; ++i) out.z.push_back(prob.regressors_from(prob.cumulative(xw[i] - mean)));
    return out;
}

NormalEquations normal_equations(const RegressorCurves& regressors, const std::vector<std::vector<double>>& y_centered) {
    if (regressors.z.size() != y_centered.size()) throw ContractError("regressor and response counts differ");
    const std::vector<double> w = trapezoid_weights(regressors.grid);
    const Eigen::VectorXd wv = to_vec(w);
    NormalEquations eq;
    eq.n = regressors.z.size();
    const Eigen::Index P = regressors.z.front().cols();
    eq.A = Eigen::MatrixXd::Zero(P, P);
    eq.c = Eigen::VectorXd::Zero(P);
    for (std::size_t i = 0; i < eq.n; ++i) {
        const Eigen::MatrixXd& Z = regressors.z[i];
        if (y_centered[i].size() != static_cast<std::size_t>(Z.rows())) throw ContractError("response length differs from the working grid");
        eq.A.noalias() += Z.transpose() * wv.asDiagonal() * Z;
        eq.c.noalias() += Z.transpose() * wv.asDiagonal() * to_vec(y_centered[i]);
    }
    return eq;
}

std::vector<double> solve_ridge(const NormalEquations& eq, const Eigen::MatrixXd& omega, double lambda) {
    if (!(lambda >= 0.0)) throw ContractError("lambda must be non-negative");
    const Eigen::MatrixXd Al = eq.A + static_cast<double>(eq.n) * lambda * omega;
    Eigen::LLT<Eigen::MatrixXd> llt(Al);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= 1e-14)) {
        std::ostringstream os;
        os << "A + n*lambda*Omega is numerically singular at lambda=" << lambda;
        throw SingularityError(os.str());
    }
    return to_std(llt.solve(eq.c));
}

std::vector<double> ridge_step(const RegressorCurves& regressors, const std::vector<std::vector<double>>& y_centered,
                               const Eigen::MatrixXd& omega, double lambda) {
    return solve_ridge(normal_equations(regressors, y_centered), omega, lambda);
}

double effective_df(const NormalEquations& eq, const Eigen::MatrixXd& omega, double lambda) {
    const Eigen::MatrixXd Al = eq.A + static_cast<double>(eq.n) * lambda * omega;
    Eigen::LLT<Eigen::MatrixXd> llt(Al);
    if (llt.info() != Eigen::Success || !(llt.rcond() >= 1e-14)) {
        std::ostringstream os;
        os << "A + n*lambda*Omega is numerically singular at lambda=" << lambda;
        throw SingularityError(os.str());
    }
    return llt.solve(eq.A).trace();
}

double aicc(double mse, double df, std::size_t n) {
    const double nn = static_cast<double>(n);
    if (!(nn - df - 2.0 > 0.0)) throw DomainError("AICC undefined for df >= n - 2");
    return mse * std::exp(1.0 + 2.0 * (df + 1.0) / (nn - df - 2.0));
}

double gcv(double mse, double df, std::size_t n) {
    const double nn = static_cast<double>(n);
    if (!(df < nn)) throw DomainError("GCV undefined for df >= n");
    const double d = 1.0 - df / nn;
    return mse / (d * d);
}

std::vector<WarpParams> center_warps(const std::vector<WarpParams>& warps) {
    if (warps.empty()) throw ContractError("center_warps needs at least one warp");
    const KnotVector& knots = warps.front().knots;
    const std::size_t r = knots.interior_count();
    if (r == 0) return warps;
    const std::size_t n = warps.size();
    std::vector<std::vector<double>> c(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(warps[i].knots == knots)) throw ContractError("all warps must share one knot vector");
        c[i] = jupp_inv(warps[i].theta, knots);
    }
    const double gap = 1e-6 * (knots.b() - knots.a());
    bool ok = false;
    for (int pass = 0; pass < 100 && !ok; ++pass) {
        for (std::size_t k = 1; k <= r; ++k) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += c[i][k];
            mean /= static_cast<double>(n);
            const double shift = mean - knots[k];
            for (std::size_t i = 0; i < n; ++i) c[i][k] -= shift;
        }
        ok = true;
        for (std::size_t i = 0; i < n; ++i) {
            bool mono = true;
            for (std::size_t k = 1; k <= r + 1; ++k)
                if (!(c[i][k] - c[i][k - 1] >= gap)) mono = false;
            if (mono) continue;
            ok = false;
            // order-preserving clip into [a + k*gap, b - (r+1-k)*gap] with minimum spacing
            for (std::size_t k = 1; k <= r; ++k) c[i][k] = std::max(c[i][k], c[i][k - 1] + gap);
            for (std::size_t k = r; k >= 1; --k) {
                c[i][k] = std::min(c[i][k], c[i][k + 1] - gap);
                if (k == 1) break;
            }
        }
    }
    if (!ok) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 1; k <= r + 1; ++k)
                if (!(c[i][k] > c[i][k - 1])) {
                    std::ostringstream os;
                    os << "centering warps broke monotonicity for subject " << i;
                    throw ContractError(os.str());
                }
    }
    std::vector<WarpParams> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(knots, jupp(c[i], knots));
    return out;
}

// ---------------------------------------------------------------------------------------------
// Alternating algorithm

namespace {

struct WarpState {
    std::vector<WarpParams> params;
    std::vector<Eigen::MatrixXd> C;
    std::vector<Eigen::VectorXd> yc;
    Eigen::VectorXd mu_x, mu_y;
};

WarpState evaluate_state(const FitProblem& prob, std::vector<WarpParams> params) {
    const std::size_t n = prob.n();
    WarpState st;
    st.params = std::move(params);
    std::vector<FitProblem::Warped> wd(n);
    parallel_for(n, prob.config().threads, [&](std::size_t i) {
        wd[i] = prob.warp_subject(i, WarpFn(st.params[i], WarpGradient::hermite_values), false);
    });
    const auto Mi = static_cast<Eigen::Index>(prob.M());
    st.mu_x = Eigen::VectorXd::Zero(Mi);
    st.mu_y = Eigen::VectorXd::Zero(Mi);
    for (std::size_t i = 0; i < n; ++i) {
        st.mu_x += wd[i].x;
        st.mu_y += wd[i].y;
    }
    st.mu_x /= static_cast<double>(n);
    st.mu_y /= static_cast<double>(n);
    st.C.resize(n);
    st.yc.resize(n);
    parallel_for(n, prob.config().threads, [&](std::size_t i) {
        st.C[i] = prob.cumulative(wd[i].x - st.mu_x);
        st.yc[i] = wd[i].y - st.mu_y;
    });
    return st;
}

double data_term(const FitProblem& prob, const WarpState& st, const Eigen::MatrixXd& B) {
    double s = 0.0;
    for (std::size_t i = 0; i < prob.n(); ++i) s += prob.norm2(st.yc[i] - prob.apply_slope(B, st.C[i]));
    return s / static_cast<double>(prob.n());
}

double penalty(const FitProblem& prob, const std::vector<double>& b) {
    const Eigen::VectorXd bv = to_vec(b);
    return bv.dot(prob.basis().omega() * bv);
}

} // namespace

FitResult alternating_fit(const FitProblem& prob, double lambda, const std::vector<WarpParams>& start) {
    const std::size_t n = prob.n();
    const FitConfig& cfg = prob.config();
    const KnotVector& knots = cfg.warp_knots;
    std::vector<WarpParams> init;
    if (start.empty() || prob.r() == 0) init.assign(n, WarpParams::identity(knots));
    else init = center_warps(start);

    WarpState st = evaluate_state(prob, std::move(init));
    std::vector<double> damping(n, 1e-3);
    std::vector<double> trace;
    std::vector<double> b;
    NormalEquations eq;
    bool converged = false;
    int iter = 0;
    for (;;) {
        ++iter;
        eq = prob.normal_equations(st.C, st.yc);
        b = solve_ridge(eq, prob.basis().omega(), lambda);
        const Eigen::MatrixXd B = prob.basis().coefficient_matrix(b);
        const double J = data_term(prob, st, B) + lambda * penalty(prob, b);
        trace.push_back(J);
        if (prob.r() == 0) {
            converged = true;
            break;
        }
        if (trace.size() >= 2) {
            const double prev = trace[trace.size() - 2];
            if (std::abs(prev - J) <= cfg.rel_tol * std::max(std::abs(prev), 1e-300)) {
                converged = true;
                break;
            }
        }
        if (iter >= cfg.max_outer) break;

        // one damped Gauss-Newton step per subject with the means held at their current values
        std::vector<WarpParams> proposal(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            proposal[i] = prob.warp_step(i, st.params[i], B, st.mu_x, st.mu_y, damping[i]);
        });
        bool moved = false;
        for (std::size_t i = 0; i < n && !moved; ++i) moved = proposal[i].theta != st.params[i].theta;
        if (!moved) {
            converged = true;
            break;
        }
        bool accepted = false;
        double step = 1.0;
        for (int bt = 0; bt < cfg.backtrack_max; ++bt, step *= 0.5) {
            std::vector<WarpParams> cand(n);
            for (std::size_t i = 0; i < n; ++i) {
                std::vector<double> th(prob.r());
                for (std::size_t l = 0; l < th.size(); ++l)
                    th[l] = st.params[i].theta[l] + step * (proposal[i].theta[l] - st.params[i].theta[l]);
                cand[i] = WarpParams(knots, std::move(th));
            }
            WarpState next = evaluate_state(prob, center_warps(cand));
            const double Jn = data_term(prob, next, B) + lambda * penalty(prob, b);
            if (Jn <= J) {
                st = std::move(next);
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            converged = true;
            break;
        }
    }

    FitResult res;
    res.basis = prob.basis_ptr();
    res.b_hat = b;
    res.warps = st.params;
    res.lambda_hat = lambda;
    res.config = cfg;
    res.objective_trace = std::move(trace);
    res.converged = converged;
    res.iterations = iter;
    res.mu_x_tilde = prob.grid_curve(st.mu_x);
    res.mu_y_tilde = prob.grid_curve(st.mu_y);
    const Eigen::MatrixXd B = prob.basis().coefficient_matrix(b);
    res.alpha_hat = prob.grid_curve(st.mu_y - prob.apply_slope(B, prob.cumulative(st.mu_x)));
    res.mse = data_term(prob, st, B);
    res.df = effective_df(eq, prob.basis().omega(), lambda);
    const double nn = static_cast<double>(n);
    res.aicc = (nn - res.df - 2.0 > 0.0) ? aicc(res.mse, res.df, n) : kNaN;
    res.gcv = (res.df < nn) ? gcv(res.mse, res.df, n) : kNaN;
    res.paths = {LambdaCriteria{lambda, res.df, res.mse, res.aicc, res.gcv, res.converged, res.iterations}};
    return res;
}

FitResult alternating_fit(const CurveSample& X, const CurveSample& Y, const FitConfig& config, double lambda) {
    config.validate();
    auto basis = std::make_shared<const CausalBasis>(config.basis.build(X.grid.a(), X.grid.b()));
    const FitProblem prob(X, Y, config, basis);
    return alternating_fit(prob, lambda, {});
}

LambdaPath fit_lambda_path(const CurveSample& X, const CurveSample& Y, const FitConfig& config) {
    config.validate();
    auto basis = std::make_shared<const CausalBasis>(config.basis.build(X.grid.a(), X.grid.b()));
    const FitProblem prob(X, Y, config, basis);
    const std::size_t G = config.lambda_grid.size();
    LambdaPath path;
    path.fits.resize(G);
    if (config.warm_start) {
        std::vector<WarpParams> warm;
        for (std::size_t g = G; g-- > 0;) {
            path.fits[g] = alternating_fit(prob, config.lambda_grid[g], warm);
            warm = path.fits[g].warps;
        }
    } else {
        // parallel over lambda, so the per-subject loops inside each fit stay serial
        std::optional<FitProblem> serial;
        if (config.threads > 1) {
            FitConfig one = config;
            one.threads = 1;
            serial.emplace(X, Y, one, basis);
        }
        const FitProblem& use = serial ? *serial : prob;
        parallel_for(G, config.threads, [&](std::size_t g) {
            path.fits[g] = alternating_fit(use, config.lambda_grid[g], {});
            path.fits[g].config.threads = config.threads;
        });
    }
    path.criteria.reserve(G);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < G; ++g) {
        const FitResult& f = path.fits[g];
        path.criteria.push_back(f.paths.front());
        if (std::isfinite(f.aicc) && f.aicc < best) {
            best = f.aicc;
            path.selected = g;
            path.any_valid = true;
        }
    }
    path.boundary = path.any_valid && G > 1 && (path.selected == 0 || path.selected == G - 1);
    return path;
}

FitResult select_lambda(const CurveSample& X, const CurveSample& Y, const FitConfig& config) {
    LambdaPath path = fit_lambda_path(X, Y, config);
    if (!path.any_valid)
        throw SelectionError("every grid lambda has df >= n - 2 so AICC is undefined; use a grid with larger lambda values");
    FitResult res = std::move(path.fits[path.selected]);
    res.paths = std::move(path.criteria);
    res.selected_index = path.selected;
    res.boundary_minimum = path.boundary;
    return res;
}

double penalized_objective(const FitResult& fit) {
    const Eigen::VectorXd bv = to_vec(fit.b_hat);
    return fit.mse + fit.lambda_hat * bv.dot(fit.basis->omega() * bv);
}

} // namespace dcfr
