#include "simulate.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "errors.hpp"
#include "parallel.hpp"
#include "predict.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace dcfr {

namespace {

constexpr double kTwoPi = 6.283185307179586;

enum Stream : std::uint64_t { amplitude_train = 0, noise_train = 1, amplitude_test = 2 };

double bump(double s) { return std::exp(-30.0 * (s - 0.4) * (s - 0.4)); }

// integral over [0,u] of beta0(s,u) * bump(s)
double response_kernel(double u) {
    if (u <= 0.0) return 0.0;
    return gauss_integrate([u](double s) { return true_beta(s, u) * bump(s); }, 0.0, u, 16, 8);
}

std::vector<double> equispaced(double lo, double hi, std::size_t n) {
    if (n == 1) return {0.5 * (lo + hi)};
    return linspace(lo, hi, n);
}

struct Subjects {
    CurveSample x, y;
};

Subjects make_subjects(const TimeGrid& grid, const std::vector<double>& a, const std::vector<double>& z,
                       const std::vector<double>* u) {
    std::vector<Curve> xs, ys;
    xs.reserve(a.size());
    ys.reserve(a.size());
    std::vector<double> xv(grid.size()), yv(grid.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t m = 0; m < grid.size(); ++m) {
            const double v = std::clamp(exp_warp_inverse(a[i], grid[m]), 0.0, 1.0);
            xv[m] = z[i] * bump(v);
            yv[m] = z[i] * response_kernel(v) + (u ? (*u)[i] * std::sin(2.0 * kTwoPi * v) : 0.0);
        }
        xs.emplace_back(grid, xv);
        ys.emplace_back(grid, yv);
    }
    return {CurveSample(grid, std::move(xs)), CurveSample(grid, std::move(ys))};
}

std::vector<double> normals(std::mt19937_64 rng, std::size_t n, double mean, double sd) {
    std::normal_distribution<double> dist(mean, sd);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

} // namespace

void SimSpec::validate() const {
    if (model != 1 && model != 2) throw ContractError("model must be 1 or 2");
    if (n < 2) throw ContractError("simulation needs n >= 2");
    if (m < 4) throw ContractError("simulation grid needs at least 4 points");
    if (n_test < 1) throw ContractError("test set must be nonempty");
}

double true_beta(double s, double t) {
    if (s > t) return 0.0;
    return 5.0 * std::exp(-50.0 * ((s - 0.4) * (s - 0.4) + (t - 0.6) * (t - 0.6)));
}

double exp_warp(double a, double t) {
    if (std::abs(a) < 1e-8) return t;
    return std::expm1(a * t) / std::expm1(a);
}

double exp_warp_inverse(double a, double u) {
    if (std::abs(a) < 1e-8) return u;
    return std::log1p(u * std::expm1(a)) / a;
}

SimDataset gen_dataset(const SimSpec& spec, std::size_t replicate) {
    spec.validate();
    const TimeGrid grid = TimeGrid::uniform(0.0, 1.0, spec.m);
    SimDataset d;
    d.a_train = equispaced(-1.0, 1.0, spec.n);
    d.z_train = normals(make_stream(spec.seed, replicate, amplitude_train), spec.n, 1.0, 0.1);
    d.u_train = normals(make_stream(spec.seed, replicate, noise_train), spec.n, 0.0, 0.05);
    Subjects tr = make_subjects(grid, d.a_train, d.z_train, &d.u_train);
    d.x_train = std::move(tr.x);
    d.y_train = std::move(tr.y);
    d.a_test = spec.model == 1 ? equispaced(-1.0, 1.0, spec.n_test) : equispaced(1.5, 2.5, spec.n_test);
    d.z_test = normals(make_stream(spec.seed, replicate, amplitude_test), spec.n_test, 1.0, 0.1);
    Subjects te = make_subjects(grid, d.a_test, d.z_test, nullptr);
    d.x_test = std::move(te.x);
    d.y_test = std::move(te.y);
    return d;
}

FitConfig sim_fit_config(const SimSpec& spec, bool dynamic) {
    FitConfig cfg;
    cfg.lambda_grid = spec.lambda_grid;
    cfg.basis.order = 4;
    cfg.basis.interior_count = spec.k;
    cfg.warp_knots = dynamic ? KnotVector({0.0, 0.5, 1.0}) : KnotVector({0.0, 1.0});
    cfg.seed = spec.seed;
    cfg.warm_start = spec.warm_start;
    return cfg;
}

double ise(const Surface& beta_hat, const Surface& beta0, std::size_t res) {
    if (res < 2) throw ContractError("ISE grid needs at least 2 points");
    const std::vector<double> g = linspace(0.0, 1.0, res);
    std::vector<double> inner(res, 0.0);
    for (std::size_t j = 0; j < res; ++j) {
        double acc = 0.0, prev = 0.0;
        for (std::size_t i = 0; i <= j; ++i) {
            const double e = beta_hat(g[i], g[j]) - beta0(g[i], g[j]);
            const double cur = e * e;
            if (i > 0) acc += 0.5 * (g[i] - g[i - 1]) * (cur + prev);
            prev = cur;
        }
        inner[j] = acc;
    }
    return trapezoid(g, inner);
}

double ise_fit(const FitResult& fit, std::size_t res) {
    const std::vector<double> g = linspace(0.0, 1.0, res);
    const UniSplineBasis& uni = fit.basis->uni();
    if (uni.a() != 0.0 || uni.b() != 1.0) throw DomainError("ISE is defined on [0,1]");
    const auto q = static_cast<std::size_t>(uni.order());
    Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(uni.size()), static_cast<Eigen::Index>(res));
    std::vector<double> act(q);
    for (std::size_t m = 0; m < res; ++m) {
        const std::size_t f = uni.eval_active(g[m], act);
        for (std::size_t r = 0; r < q; ++r) psi(static_cast<Eigen::Index>(f + r), static_cast<Eigen::Index>(m)) = act[r];
    }
    const Eigen::MatrixXd surf = psi.transpose() * fit.basis->coefficient_matrix(fit.b_hat) * psi;  // (s, t)
    std::vector<double> inner(res, 0.0);
    for (std::size_t j = 0; j < res; ++j) {
        double acc = 0.0, prev = 0.0;
        for (std::size_t i = 0; i <= j; ++i) {
            const double e = surf(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - true_beta(g[i], g[j]);
            const double cur = e * e;
            if (i > 0) acc += 0.5 * (g[i] - g[i - 1]) * (cur + prev);
            prev = cur;
        }
        inner[j] = acc;
    }
    return trapezoid(g, inner);
}

ReplicateOutcome run_replicate(const SimSpec& spec, std::size_t replicate) {
    SimSpec s1 = spec, s2 = spec;
    s1.model = 1;
    s2.model = 2;
    const SimDataset d1 = gen_dataset(s1, replicate);
    const SimDataset d2 = gen_dataset(s2, replicate);
    ReplicateOutcome out;
    auto run = [&](bool dynamic, EstimatorPath& ep) {
        FitConfig cfg = sim_fit_config(spec, dynamic);
        const LambdaPath path = fit_lambda_path(d1.x_train, d1.y_train, cfg);
        if (!path.any_valid) throw SelectionError("no lambda with a valid AICC");
        for (const FitResult& f : path.fits) {
            ep.ise.push_back(ise_fit(f));
            ep.mspe1.push_back(mspe(f, d1.x_test, d1.y_test));
            ep.mspe2.push_back(mspe(f, d2.x_test, d2.y_test));
            ep.aicc.push_back(f.aicc);
        }
        ep.selected = path.selected;
        ep.boundary = path.boundary;
        ep.ok = true;
    };
    try {
        run(true, out.dynamic);
        run(false, out.classical);
    } catch (const std::exception& e) {
        out.failure = e.what();
    }
    return out;
}

namespace {

std::pair<double, double> mean_se(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), 0.0};
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

std::size_t argmin(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

} // namespace

EstimatorSummary summarize(const std::vector<const EstimatorPath*>& paths) {
    EstimatorSummary s;
    std::vector<double> io, ia, m1o, m1a, m2o, m2a;
    std::size_t interior = 0, at_min = 0, at_max = 0;
    for (const EstimatorPath* p : paths) {
        const std::size_t G = p->ise.size();
        io.push_back(p->ise[argmin(p->ise)]);
        ia.push_back(p->ise[p->selected]);
        m1o.push_back(1e3 * p->mspe1[argmin(p->mspe1)]);
        m1a.push_back(1e3 * p->mspe1[p->selected]);
        m2o.push_back(1e3 * p->mspe2[argmin(p->mspe2)]);
        m2a.push_back(1e3 * p->mspe2[p->selected]);
        if (p->selected > 0 && p->selected + 1 < G) ++interior;
        if (argmin(p->mspe1) == 0) ++at_min;
        if (argmin(p->ise) == G - 1) ++at_max;
    }
    std::tie(s.ise_opt, s.ise_opt_se) = mean_se(io);
    std::tie(s.ise_aicc, s.ise_aicc_se) = mean_se(ia);
    std::tie(s.mspe1_opt, s.mspe1_opt_se) = mean_se(m1o);
    std::tie(s.mspe1_aicc, s.mspe1_aicc_se) = mean_se(m1a);
    std::tie(s.mspe2_opt, s.mspe2_opt_se) = mean_se(m2o);
    std::tie(s.mspe2_aicc, s.mspe2_aicc_se) = mean_se(m2a);
    const double n = std::max<double>(1.0, static_cast<double>(paths.size()));
    s.frac_interior = static_cast<double>(interior) / n;
    s.frac_mspe_at_min = static_cast<double>(at_min) / n;
    s.frac_ise_at_max = static_cast<double>(at_max) / n;
    return s;
}

MCReport monte_carlo(const SimSpec& spec, const std::function<void(std::size_t)>& on_done) {
    spec.validate();
    if (spec.reps < 2) throw ContractError("Monte Carlo needs at least 2 replications");
    MCReport rep;
    rep.spec = spec;
    rep.replicates.resize(spec.reps);
    std::mutex mu;
    parallel_for(spec.reps, spec.threads, [&](std::size_t r) {
        rep.replicates[r] = run_replicate(spec, r);
        if (on_done) {
            std::lock_guard<std::mutex> lock(mu);
            on_done(r);
        }
    });
    std::vector<const EstimatorPath*> dyn, cls;
    for (const ReplicateOutcome& o : rep.replicates) {
        if (!o.failure.empty()) {
            ++rep.failures;
            continue;
        }
        dyn.push_back(&o.dynamic);
        cls.push_back(&o.classical);
    }
    if (static_cast<double>(rep.failures) > 0.1 * static_cast<double>(spec.reps))
        throw ContractError("more than 10% of Monte Carlo replicates failed (first: " +
                            [&] { for (const auto& o : rep.replicates) if (!o.failure.empty()) return o.failure; return std::string(); }() + ")");
    rep.replications = dyn.size();
    rep.dynamic = summarize(dyn);
    rep.classical = summarize(cls);
    return rep;
}

} // namespace dcfr
