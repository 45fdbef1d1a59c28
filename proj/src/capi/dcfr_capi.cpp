#include "dcfr/dcfr.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>

#include "errors.hpp"
#include "fit.hpp"
#include "inference.hpp"
#include "io.hpp"
#include "predict.hpp"
#include "simulate.hpp"

struct dcfr_sample {
    dcfr::CurveSample value;
};
struct dcfr_config {
    dcfr::FitConfig value;
};
struct dcfr_fit {
    dcfr::FitResult value;
};
struct dcfr_variance {
    dcfr::VarianceSurface value;
};
struct dcfr_mc_report {
    dcfr::MCReport value;
};

namespace {

thread_local std::string last_error;

template <class F>
dcfr_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return DCFR_OK;
    } catch (const dcfr::Error& e) {
        last_error = e.what();
        return static_cast<dcfr_status>(static_cast<int>(e.kind()));
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return DCFR_ERR_INTERNAL;
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return DCFR_ERR_IO;
    } catch (const std::exception& e) {
        last_error = e.what();
        return DCFR_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (!p) throw dcfr::ContractError(std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

dcfr::SimSpec to_spec(const dcfr_sim_spec* s) {
    dcfr::SimSpec spec;
    spec.model = s->model;
    spec.n = s->n;
    spec.k = s->k;
    spec.m = s->grid_points;
    spec.n_test = s->n_test;
    spec.reps = s->replications;
    spec.seed = s->seed;
    spec.threads = s->threads;
    spec.warm_start = s->warm_start != 0;
    return spec;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

extern "C" {

const char* dcfr_last_error(void) { return last_error.c_str(); }
const char* dcfr_version(void) { return "1.0.0"; }
void dcfr_string_free(char* s) { std::free(s); }

dcfr_status dcfr_sample_create(const double* t, size_t m, const double* values, size_t n, dcfr_sample** out) {
    return guarded([&] {
        require(t, "t");
        require(values, "values");
        require(out, "out");
        const dcfr::TimeGrid grid(std::vector<double>(t, t + m));
        std::vector<dcfr::Curve> curves;
        for (size_t i = 0; i < n; ++i) curves.emplace_back(grid, std::vector<double>(values + i * m, values + (i + 1) * m));
        *out = new dcfr_sample{dcfr::CurveSample(grid, std::move(curves))};
    });
}

dcfr_status dcfr_sample_load_csv(const char* path, dcfr_sample** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dcfr_sample{dcfr::load_curves(path)};
    });
}

dcfr_status dcfr_sample_save_csv(const dcfr_sample* s, const char* path) {
    return guarded([&] {
        require(s, "sample");
        require(path, "path");
        dcfr::save_curves(path, s->value);
    });
}

size_t dcfr_sample_count(const dcfr_sample* s) { return s ? s->value.size() : 0; }
size_t dcfr_sample_points(const dcfr_sample* s) { return s ? s->value.grid.size() : 0; }

dcfr_status dcfr_sample_grid(const dcfr_sample* s, double* out) {
    return guarded([&] {
        require(s, "sample");
        require(out, "out");
        const auto p = s->value.grid.points();
        std::copy(p.begin(), p.end(), out);
    });
}

dcfr_status dcfr_sample_values(const dcfr_sample* s, size_t i, double* out) {
    return guarded([&] {
        require(s, "sample");
        require(out, "out");
        if (i >= s->value.size()) throw dcfr::ContractError("curve index out of range");
        const auto v = s->value.curves[i].values();
        std::copy(v.begin(), v.end(), out);
    });
}

void dcfr_sample_free(dcfr_sample* s) { delete s; }

dcfr_status dcfr_config_create(dcfr_config** out) {
    return guarded([&] {
        require(out, "out");
        *out = new dcfr_config{};
    });
}

dcfr_status dcfr_config_from_json(const char* json, dcfr_config** out) {
    return guarded([&] {
        require(json, "json");
        require(out, "out");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json);
        } catch (const nlohmann::json::parse_error& e) {
            throw dcfr::FormatError(std::string("configuration is not valid JSON: ") + e.what());
        }
        auto cfg = dcfr::config_from_json(j);
        cfg.validate();
        *out = new dcfr_config{std::move(cfg)};
    });
}

dcfr_status dcfr_config_to_json(const dcfr_config* c, char** out) {
    return guarded([&] {
        require(c, "config");
        require(out, "out");
        *out = dup_string(dcfr::config_to_json(c->value).dump(2));
    });
}

dcfr_status dcfr_config_set_lambda_grid(dcfr_config* c, const double* lambdas, size_t count) {
    return guarded([&] {
        require(c, "config");
        require(lambdas, "lambdas");
        dcfr::FitConfig next = c->value;
        next.lambda_grid.assign(lambdas, lambdas + count);
        next.validate();
        c->value = std::move(next);
    });
}

dcfr_status dcfr_config_set_warp_knots(dcfr_config* c, const double* knots, size_t count) {
    return guarded([&] {
        require(c, "config");
        require(knots, "knots");
        c->value.warp_knots = dcfr::KnotVector(std::vector<double>(knots, knots + count));
    });
}

dcfr_status dcfr_config_set_basis(dcfr_config* c, int order, size_t interior_count) {
    return guarded([&] {
        require(c, "config");
        if (order < 2) throw dcfr::ContractError("basis order must be at least 2");
        c->value.basis.order = order;
        c->value.basis.interior_count = interior_count;
        c->value.basis.interior_knots.clear();
    });
}

dcfr_status dcfr_config_set_basis_knots(dcfr_config* c, const double* interior, size_t count) {
    return guarded([&] {
        require(c, "config");
        if (count > 0) require(interior, "interior");
        c->value.basis.interior_knots.assign(interior, interior + count);
        c->value.basis.interior_count = count;
    });
}

dcfr_status dcfr_config_set_iterations(dcfr_config* c, int max_outer, double rel_tol) {
    return guarded([&] {
        require(c, "config");
        dcfr::FitConfig next = c->value;
        next.max_outer = max_outer;
        next.rel_tol = rel_tol;
        next.validate();
        c->value = std::move(next);
    });
}

dcfr_status dcfr_config_set_seed(dcfr_config* c, uint64_t seed) {
    return guarded([&] {
        require(c, "config");
        c->value.seed = seed;
    });
}

dcfr_status dcfr_config_set_threads(dcfr_config* c, unsigned threads) {
    return guarded([&] {
        require(c, "config");
        c->value.threads = threads == 0 ? 1 : threads;
    });
}

void dcfr_config_free(dcfr_config* c) { delete c; }

dcfr_status dcfr_fit_select(const dcfr_sample* x, const dcfr_sample* y, const dcfr_config* c, dcfr_fit** out) {
    return guarded([&] {
        require(x, "x");
        require(y, "y");
        require(c, "config");
        require(out, "out");
        *out = new dcfr_fit{dcfr::select_lambda(x->value, y->value, c->value)};
    });
}

dcfr_status dcfr_fit_at(const dcfr_sample* x, const dcfr_sample* y, const dcfr_config* c, double lambda, dcfr_fit** out) {
    return guarded([&] {
        require(x, "x");
        require(y, "y");
        require(c, "config");
        require(out, "out");
        if (!(lambda > 0.0)) throw dcfr::ContractError("lambda must be positive");
        *out = new dcfr_fit{dcfr::alternating_fit(x->value, y->value, c->value, lambda)};
    });
}

dcfr_status dcfr_fit_load(const char* path, dcfr_fit** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new dcfr_fit{dcfr::load_fit(path)};
    });
}

dcfr_status dcfr_fit_save(const dcfr_fit* f, const char* path) {
    return guarded([&] {
        require(f, "fit");
        require(path, "path");
        dcfr::save_fit(path, f->value);
    });
}

double dcfr_fit_lambda(const dcfr_fit* f) { return f ? f->value.lambda_hat : kNaN; }
double dcfr_fit_df(const dcfr_fit* f) { return f ? f->value.df : kNaN; }
double dcfr_fit_mse(const dcfr_fit* f) { return f ? f->value.mse : kNaN; }
double dcfr_fit_aicc(const dcfr_fit* f) { return f ? f->value.aicc : kNaN; }
int dcfr_fit_boundary(const dcfr_fit* f) { return f && f->value.boundary_minimum ? 1 : 0; }
int dcfr_fit_converged(const dcfr_fit* f) { return f && f->value.converged ? 1 : 0; }
size_t dcfr_fit_coef_count(const dcfr_fit* f) { return f ? f->value.b_hat.size() : 0; }

dcfr_status dcfr_fit_coefficients(const dcfr_fit* f, double* out) {
    return guarded([&] {
        require(f, "fit");
        require(out, "out");
        std::copy(f->value.b_hat.begin(), f->value.b_hat.end(), out);
    });
}

dcfr_status dcfr_fit_beta(const dcfr_fit* f, double s, double t, double* out) {
    return guarded([&] {
        require(f, "fit");
        require(out, "out");
        *out = f->value.beta(s, t);
    });
}

dcfr_status dcfr_fit_export(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, const char* dir) {
    return guarded([&] {
        require(f, "fit");
        require(dir, "dir");
        const std::filesystem::path d(dir);
        const dcfr::FitResult& fit = f->value;
        dcfr::write_atomic(d / "beta_surface.csv", dcfr::surface_csv(dcfr::beta_grid(fit, 101), "beta"));
        dcfr::write_atomic(d / "warps.csv", dcfr::warps_csv(fit));
        dcfr::write_atomic(d / "lambda_path.csv", dcfr::paths_csv(fit));
        if (x && y) {
            const dcfr::FitProblem prob(x->value, y->value, fit.config, fit.basis);
            if (fit.warps.size() != prob.n()) throw dcfr::ContractError("fit and data have different numbers of subjects");
            const dcfr::TimeGrid tg(prob.grid());
            std::vector<dcfr::Curve> xs, ys;
            for (std::size_t i = 0; i < prob.n(); ++i) {
                const auto w = prob.warp_subject(i, dcfr::WarpFn(fit.warps[i]), false);
                xs.emplace_back(tg, std::vector<double>(w.x.data(), w.x.data() + w.x.size()));
                ys.emplace_back(tg, std::vector<double>(w.y.data(), w.y.data() + w.y.size()));
            }
            dcfr::save_curves(d / "aligned_x.csv", dcfr::CurveSample(tg, std::move(xs)), "x");
            dcfr::save_curves(d / "aligned_y.csv", dcfr::CurveSample(tg, std::move(ys)), "y");
        }
    });
}

void dcfr_fit_free(dcfr_fit* f) { delete f; }

dcfr_status dcfr_predict(const dcfr_fit* f, const dcfr_sample* x_new, dcfr_sample** y_hat) {
    return guarded([&] {
        require(f, "fit");
        require(x_new, "x_new");
        require(y_hat, "y_hat");
        std::vector<dcfr::Curve> out;
        for (const auto& c : x_new->value.curves) out.push_back(dcfr::predict_response(c, f->value).y_hat);
        const dcfr::TimeGrid& tg = f->value.mu_x_tilde.grid();
        *y_hat = new dcfr_sample{dcfr::CurveSample(tg, std::move(out))};
    });
}

dcfr_status dcfr_mspe(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, double* out) {
    return guarded([&] {
        require(f, "fit");
        require(x, "x");
        require(y, "y");
        require(out, "out");
        *out = dcfr::mspe(f->value, x->value, y->value);
    });
}

dcfr_status dcfr_variance_asymptotic(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, dcfr_variance** out) {
    return guarded([&] {
        require(f, "fit");
        require(x, "x");
        require(y, "y");
        require(out, "out");
        const auto d = dcfr::profile_derivatives(f->value, x->value, y->value);
        *out = new dcfr_variance{dcfr::VarianceSurface::from_asymptotic(dcfr::asymptotic_cov(d), f->value.basis)};
    });
}

dcfr_status dcfr_variance_bootstrap(const dcfr_fit* f, const dcfr_sample* x, const dcfr_sample* y, size_t replicates,
                                    uint64_t seed, unsigned threads, dcfr_variance** out) {
    return guarded([&] {
        require(f, "fit");
        require(x, "x");
        require(y, "y");
        require(out, "out");
        dcfr::BootstrapOptions opts;
        opts.replicates = replicates;
        opts.seed = seed;
        opts.threads = threads == 0 ? 1 : threads;
        *out = new dcfr_variance{dcfr::bootstrap_variance(f->value, x->value, y->value, opts)};
    });
}

dcfr_status dcfr_variance_eval(const dcfr_variance* v, double s, double t, double* out) {
    return guarded([&] {
        require(v, "variance");
        require(out, "out");
        *out = v->value(s, t);
    });
}

dcfr_status dcfr_variance_export(const dcfr_fit* f, const dcfr_variance* v, size_t res, const char* dir) {
    return guarded([&] {
        require(f, "fit");
        require(v, "variance");
        require(dir, "dir");
        const std::filesystem::path d(dir);
        const dcfr::SurfaceGrid beta = dcfr::beta_grid(f->value, res);
        const dcfr::SurfaceGrid var = v->value.sample(beta.axis);
        dcfr::write_atomic(d / "variance.csv", dcfr::surface_csv(var, "variance"));
        dcfr::write_atomic(d / "beta_filtered.csv", dcfr::surface_csv(dcfr::significance_filter(beta, var), "beta"));
    });
}

void dcfr_variance_free(dcfr_variance* v) { delete v; }

dcfr_status dcfr_landmark_stats(const dcfr_fit* f, const size_t* pairs, size_t count, size_t replicates, uint64_t seed,
                                char** out_json) {
    return guarded([&] {
        require(f, "fit");
        require(out_json, "out_json");
        if (count > 0) require(pairs, "pairs");
        std::vector<std::pair<std::size_t, std::size_t>> gaps;
        for (size_t k = 0; k < count; ++k) gaps.emplace_back(pairs[2 * k], pairs[2 * k + 1]);
        const auto stats = dcfr::landmark_stats(f->value.warps, gaps, replicates, seed);
        nlohmann::json j = nlohmann::json::array();
        for (const auto& s : stats) {
            j.push_back({{"first", {gaps[s.first].first, gaps[s.first].second}},
                         {"second", {gaps[s.second].first, gaps[s.second].second}},
                         {"defined", s.defined},
                         {"rho", s.defined ? nlohmann::json(s.rho) : nlohmann::json(nullptr)},
                         {"se", s.se},
                         {"bootstrap_used", s.boot_used}});
        }
        *out_json = dup_string(j.dump(2));
    });
}

void dcfr_sim_spec_default(dcfr_sim_spec* spec) {
    if (!spec) return;
    const dcfr::SimSpec d;
    spec->model = d.model;
    spec->n = d.n;
    spec->k = d.k;
    spec->grid_points = d.m;
    spec->n_test = d.n_test;
    spec->replications = d.reps;
    spec->seed = d.seed;
    spec->threads = d.threads;
    spec->warm_start = d.warm_start ? 1 : 0;
}

dcfr_status dcfr_simulate_dataset(const dcfr_sim_spec* spec, size_t replicate, const char* dir) {
    return guarded([&] {
        require(spec, "spec");
        require(dir, "dir");
        const auto d = dcfr::gen_dataset(to_spec(spec), replicate);
        const std::filesystem::path p(dir);
        dcfr::save_curves(p / "x_train.csv", d.x_train, "x");
        dcfr::save_curves(p / "y_train.csv", d.y_train, "y");
        dcfr::save_curves(p / "x_test.csv", d.x_test, "x");
        dcfr::save_curves(p / "y_test.csv", d.y_test, "y");
    });
}

dcfr_status dcfr_monte_carlo(const dcfr_sim_spec* spec, dcfr_mc_report** out) {
    return guarded([&] {
        require(spec, "spec");
        require(out, "out");
        *out = new dcfr_mc_report{dcfr::monte_carlo(to_spec(spec))};
    });
}

dcfr_status dcfr_mc_report_csv(const dcfr_mc_report* r, char** out) {
    return guarded([&] {
        require(r, "report");
        require(out, "out");
        *out = dup_string(dcfr::mc_report_csv(r->value));
    });
}

dcfr_status dcfr_mc_report_json(const dcfr_mc_report* r, char** out) {
    return guarded([&] {
        require(r, "report");
        require(out, "out");
        *out = dup_string(dcfr::mc_report_json(r->value).dump(2));
    });
}

void dcfr_mc_report_free(dcfr_mc_report* r) { delete r; }

} // extern "C"
