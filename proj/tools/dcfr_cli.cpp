// dcfr: fit / predict / infer / simulate front end over the C API.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dcfr/dcfr.h"

namespace {

const char* kind_name(int code) {
    switch (code) {
        case DCFR_ERR_IO: return "io";
        case DCFR_ERR_CONTRACT: return "contract";
        case DCFR_ERR_SINGULAR: return "singularity";
        case DCFR_ERR_SELECTION: return "selection";
        default: return "internal";
    }
}

std::string json_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '"' || c == '\\') o += '\\', o += c;
        else if (c == '\n') o += "\\n";
        else if (static_cast<unsigned char>(c) < 0x20) o += ' ';
        else o += c;
    }
    return o;
}

struct Failure {
    int code;
    std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw Failure{code, message}; }

void check(dcfr_status st) {
    if (st != DCFR_OK) fail(st, dcfr_last_error());
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
    T** out() { return &p; }
    T* get() const { return p; }
};

using Sample = Handle<dcfr_sample, dcfr_sample_free>;
using Config = Handle<dcfr_config, dcfr_config_free>;
using Fit = Handle<dcfr_fit, dcfr_fit_free>;
using Variance = Handle<dcfr_variance, dcfr_variance_free>;
using Report = Handle<dcfr_mc_report, dcfr_mc_report_free>;

std::string take(char* s) {
    std::string out = s ? s : "";
    dcfr_string_free(s);
    return out;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            v.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            fail(DCFR_ERR_CONTRACT, std::string("bad number in ") + what + ": '" + item + "'");
        }
    }
    if (v.empty()) fail(DCFR_ERR_CONTRACT, std::string(what) + " is empty");
    return v;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(DCFR_ERR_IO, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text) || !out.flush()) fail(DCFR_ERR_IO, "cannot write " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) fail(DCFR_ERR_IO, "cannot move " + tmp + " to " + path);
}

void ensure_dir(const std::string& dir) {
    // the library creates directories on write; an empty marker export keeps CLI-side files safe too
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(DCFR_ERR_IO, "cannot create " + dir + ": " + ec.message());
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct FitArgs {
    std::string x, y, config, out = "dcfr_out", lambda_grid, warp_knots, basis_knots;
    double lambda = 0.0;
    int basis_order = 0;
    bool no_warp = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 1;
};

int run_fit(const FitArgs& a) {
    Sample x, y;
    check(dcfr_sample_load_csv(a.x.c_str(), x.out()));
    check(dcfr_sample_load_csv(a.y.c_str(), y.out()));
    Config cfg;
    if (!a.config.empty()) check(dcfr_config_from_json(read_text(a.config).c_str(), cfg.out()));
    else check(dcfr_config_create(cfg.out()));
    if (!a.lambda_grid.empty()) {
        auto g = parse_list(a.lambda_grid, "--lambda-grid");
        check(dcfr_config_set_lambda_grid(cfg.get(), g.data(), g.size()));
    }
    std::vector<double> grid(dcfr_sample_points(x.get()));
    check(dcfr_sample_grid(x.get(), grid.data()));
    if (a.no_warp) {
        const double ends[2] = {grid.front(), grid.back()};
        check(dcfr_config_set_warp_knots(cfg.get(), ends, 2));
    } else if (!a.warp_knots.empty()) {
        auto k = parse_list(a.warp_knots, "--warp-knots");
        check(dcfr_config_set_warp_knots(cfg.get(), k.data(), k.size()));
    } else if (a.config.empty()) {
        const double k[3] = {grid.front(), 0.5 * (grid.front() + grid.back()), grid.back()};
        check(dcfr_config_set_warp_knots(cfg.get(), k, 3));
    }
    if (!a.basis_knots.empty()) {
        if (a.basis_knots.find_first_of(",.") == std::string::npos) {
            const int count = std::atoi(a.basis_knots.c_str());
            if (count < 0) fail(DCFR_ERR_CONTRACT, "--basis-knots count must be non-negative");
            check(dcfr_config_set_basis(cfg.get(), a.basis_order > 0 ? a.basis_order : 4, static_cast<size_t>(count)));
        } else {
            auto k = parse_list(a.basis_knots, "--basis-knots");
            if (a.basis_order > 0) check(dcfr_config_set_basis(cfg.get(), a.basis_order, 0));
            check(dcfr_config_set_basis_knots(cfg.get(), k.data(), k.size()));
        }
    } else if (a.basis_order > 0) {
        char* js = nullptr;
        check(dcfr_config_to_json(cfg.get(), &js));
        const std::string s = take(js);
        // keep the configured knot count, change only the order
        const auto pos = s.find("\"interior_count\":");
        const size_t count = pos == std::string::npos ? 5 : std::strtoul(s.c_str() + pos + 17, nullptr, 10);
        check(dcfr_config_set_basis(cfg.get(), a.basis_order, count));
    }
    if (a.seed_set) check(dcfr_config_set_seed(cfg.get(), a.seed));
    check(dcfr_config_set_threads(cfg.get(), a.threads));

    Fit fit;
    if (a.lambda > 0.0) {
        check(dcfr_fit_at(x.get(), y.get(), cfg.get(), a.lambda, fit.out()));
    } else {
        check(dcfr_fit_select(x.get(), y.get(), cfg.get(), fit.out()));
        if (dcfr_fit_boundary(fit.get())) {
            std::cerr << "WARNING: the AICC minimum lies on the boundary of the lambda grid (lambda = "
                      << fmt(dcfr_fit_lambda(fit.get())) << "); choose a value with --lambda to proceed\n";
            fail(DCFR_ERR_SELECTION, "AICC minimum on the grid boundary; rerun with --lambda");
        }
    }
    ensure_dir(a.out);
    check(dcfr_fit_save(fit.get(), (a.out + "/fit.json").c_str()));
    check(dcfr_fit_export(fit.get(), x.get(), y.get(), a.out.c_str()));
    std::cout << "lambda " << fmt(dcfr_fit_lambda(fit.get())) << "\n"
              << "df " << fmt(dcfr_fit_df(fit.get())) << "\n"
              << "mse " << fmt(dcfr_fit_mse(fit.get())) << "\n"
              << "aicc " << fmt(dcfr_fit_aicc(fit.get())) << "\n"
              << "converged " << dcfr_fit_converged(fit.get()) << "\n";
    return 0;
}

int run_predict(const std::string& fit_path, const std::string& x_path, const std::string& y_path, const std::string& out) {
    Fit fit;
    check(dcfr_fit_load(fit_path.c_str(), fit.out()));
    Sample x, yhat;
    check(dcfr_sample_load_csv(x_path.c_str(), x.out()));
    check(dcfr_predict(fit.get(), x.get(), yhat.out()));
    ensure_dir(out);
    check(dcfr_sample_save_csv(yhat.get(), (out + "/y_hat.csv").c_str()));
    if (!y_path.empty()) {
        Sample y;
        check(dcfr_sample_load_csv(y_path.c_str(), y.out()));
        double m = 0.0;
        check(dcfr_mspe(fit.get(), x.get(), y.get(), &m));
        std::cout << "mspe " << fmt(m) << "\n";
    }
    return 0;
}

int run_infer(const std::string& fit_path, const std::string& x_path, const std::string& y_path, const std::string& out,
              std::size_t boot, std::uint64_t seed, unsigned threads, const std::string& landmarks) {
    Fit fit;
    check(dcfr_fit_load(fit_path.c_str(), fit.out()));
    Sample x, y;
    check(dcfr_sample_load_csv(x_path.c_str(), x.out()));
    check(dcfr_sample_load_csv(y_path.c_str(), y.out()));
    Variance v;
    if (boot > 0) check(dcfr_variance_bootstrap(fit.get(), x.get(), y.get(), boot, seed, threads, v.out()));
    else check(dcfr_variance_asymptotic(fit.get(), x.get(), y.get(), v.out()));
    ensure_dir(out);
    check(dcfr_variance_export(fit.get(), v.get(), 101, out.c_str()));
    check(dcfr_fit_export(fit.get(), nullptr, nullptr, out.c_str()));
    std::cout << "variance " << (boot > 0 ? "bootstrap" : "asymptotic") << "\n";
    if (!landmarks.empty()) {
        std::vector<size_t> pairs;
        std::stringstream ss(landmarks);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto dash = item.find('-');
            if (dash == std::string::npos) fail(DCFR_ERR_CONTRACT, "--landmarks expects lo-hi pairs such as 1-2,2-3");
            pairs.push_back(std::stoul(item.substr(0, dash)));
            pairs.push_back(std::stoul(item.substr(dash + 1)));
        }
        char* js = nullptr;
        check(dcfr_landmark_stats(fit.get(), pairs.data(), pairs.size() / 2, boot > 0 ? boot : 200, seed, &js));
        const std::string text = take(js);
        write_text(out + "/landmarks.json", text + "\n");
        std::cout << text << "\n";
    }
    return 0;
}

int run_simulate(dcfr_sim_spec spec, const std::string& out, bool dataset_only, std::size_t replicate) {
    ensure_dir(out);
    if (dataset_only) {
        check(dcfr_simulate_dataset(&spec, replicate, out.c_str()));
        return 0;
    }
    Report rep;
    check(dcfr_monte_carlo(&spec, rep.out()));
    char* csv = nullptr;
    check(dcfr_mc_report_csv(rep.get(), &csv));
    const std::string table = take(csv);
    char* js = nullptr;
    check(dcfr_mc_report_json(rep.get(), &js));
    write_text(out + "/mc_report.csv", table);
    write_text(out + "/mc_report.json", take(js) + "\n");
    std::cout << table;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic causal functional regression"};
    app.require_subcommand(1);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "fit the model and select lambda by AICC");
    fit->add_option("--x", fa.x, "covariate curves (CSV)")->required();
    fit->add_option("--y", fa.y, "response curves (CSV)")->required();
    fit->add_option("--config", fa.config, "JSON fit configuration");
    fit->add_option("--out", fa.out, "output directory");
    fit->add_option("--lambda", fa.lambda, "fixed penalty (skips selection)");
    fit->add_option("--lambda-grid", fa.lambda_grid, "comma-separated ascending lambdas");
    fit->add_option("--warp-knots", fa.warp_knots, "comma-separated warp knots including both endpoints");
    fit->add_option("--basis-order", fa.basis_order, "spline order (2 linear, 4 cubic)");
    fit->add_option("--basis-knots", fa.basis_knots, "interior knot count or comma-separated interior knots");
    fit->add_flag("--no-warp", fa.no_warp, "classical estimator without warping");
    auto* fit_seed = fit->add_option("--seed", fa.seed, "seed recorded in the artifact");
    fit->add_option("--threads", fa.threads, "worker threads");

    std::string p_fit, p_x, p_y, p_out = "dcfr_out";
    auto* pred = app.add_subcommand("predict", "predict responses for new covariates");
    pred->add_option("--fit", p_fit, "fit artifact (JSON)")->required();
    pred->add_option("--x", p_x, "new covariate curves (CSV)")->required();
    pred->add_option("--y", p_y, "true responses; prints the MSPE");
    pred->add_option("--out", p_out, "output directory");

    std::string i_fit, i_x, i_y, i_out = "dcfr_out", i_landmarks;
    std::size_t i_boot = 0;
    std::uint64_t i_seed = 1;
    unsigned i_threads = 1;
    auto* inf = app.add_subcommand("infer", "variance of the slope surface and significance filter");
    inf->add_option("--fit", i_fit, "fit artifact (JSON)")->required();
    inf->add_option("--x", i_x, "covariate curves used for the fit")->required();
    inf->add_option("--y", i_y, "response curves used for the fit")->required();
    inf->add_option("--out", i_out, "output directory");
    inf->add_option("--bootstrap", i_boot, "bootstrap replicates (0: asymptotic variance)");
    inf->add_option("--seed", i_seed, "bootstrap seed");
    inf->add_option("--threads", i_threads, "worker threads");
    inf->add_option("--landmarks", i_landmarks, "knot gaps as lo-hi pairs, e.g. 1-2,2-3");

    dcfr_sim_spec spec;
    dcfr_sim_spec_default(&spec);
    std::string s_out = "dcfr_sim";
    bool dataset_only = false, s_no_warp = false;
    std::size_t s_rep = 0;
    auto* sim = app.add_subcommand("simulate", "simulation models and the Monte Carlo table");
    sim->add_option("--model", spec.model, "1 or 2 (test-set warps)");
    sim->add_option("--n", spec.n, "training curves");
    sim->add_option("--k", spec.k, "interior knots of the slope basis");
    sim->add_option("--reps", spec.replications, "Monte Carlo replications");
    sim->add_option("--n-test", spec.n_test, "test curves");
    sim->add_option("--seed", spec.seed, "master seed");
    sim->add_option("--threads", spec.threads, "worker threads");
    sim->add_option("--out", s_out, "output directory");
    bool warm_start = false;
    sim->add_flag("--warm-start", warm_start, "start each lambda fit from the previous lambda's warps");
    sim->add_flag("--dataset-only", dataset_only, "write one generated dataset instead of running replicates");
    sim->add_option("--replicate", s_rep, "replicate index for --dataset-only");
    sim->add_flag("--no-warp", s_no_warp, "accepted for symmetry; reports always include both estimators");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(DCFR_ERR_CONTRACT);
    }

    try {
        if (*fit) {
            fa.seed_set = fit_seed->count() > 0;
            return run_fit(fa);
        }
        if (*pred) return run_predict(p_fit, p_x, p_y, p_out);
        if (*inf) return run_infer(i_fit, i_x, i_y, i_out, i_boot, i_seed, i_threads, i_landmarks);
        if (*sim) {
            if (warm_start) spec.warm_start = 1;
            return run_simulate(spec, s_out, dataset_only, s_rep);
        }
    } catch (const Failure& f) {
        std::cerr << "{\"error\":\"" << kind_name(f.code) << "\",\"code\":" << f.code << ",\"message\":\"" << json_escape(f.message)
                  << "\"}\n";
        return f.code;
    }
    return 0;
}
