#include "io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "errors.hpp"

namespace dcfr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& field, const fs::path& path, std::size_t line) {
    const std::string f = trim(field);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        std::ostringstream os;
        os << path.string() << ":" << line << ": not a number: '" << f << "'";
        throw FormatError(os.str());
    }
    return v;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_of(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::vector<double> values_vec(const Curve& c) { return {c.values().begin(), c.values().end()}; }

} // namespace

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw FormatError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw FormatError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

CurveSample load_curves(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0, width = 0;
    std::vector<double> t;
    std::vector<std::vector<double>> cols;
    bool header = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty() || trim(line) == "\r") continue;
        const auto fields = split_csv(line);
        if (header) {
            width = fields.size();
            if (width < 2) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": need a time column and at least one curve");
            cols.assign(width - 1, {});
            header = false;
            continue;
        }
        if (fields.size() != width) {
            std::ostringstream os;
            os << path.string() << ":" << lineno << ": expected " << width << " fields, found " << fields.size();
            throw FormatError(os.str());
        }
        const double tv = parse_double(fields[0], path, lineno);
        if (!t.empty() && !(tv > t.back())) {
            std::ostringstream os;
            os << path.string() << ":" << lineno << ": time column must be strictly increasing";
            throw FormatError(os.str());
        }
        t.push_back(tv);
        for (std::size_t c = 1; c < width; ++c) cols[c - 1].push_back(parse_double(fields[c], path, lineno));
    }
    if (header) throw FormatError(path.string() + ": empty file");
    if (t.size() < 4) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": at least 4 time points are required");
    const TimeGrid grid(t);
    std::vector<Curve> curves;
    for (auto& c : cols) curves.emplace_back(grid, std::move(c));
    return CurveSample(grid, std::move(curves));
}

void save_curves(const fs::path& path, const CurveSample& sample, const std::string& prefix) {
    std::string s = "t";
    for (std::size_t i = 0; i < sample.size(); ++i) s += "," + prefix + std::to_string(i + 1);
    s += "\n";
    for (std::size_t m = 0; m < sample.grid.size(); ++m) {
        s += format_double(sample.grid[m]);
        for (const Curve& c : sample.curves) s += "," + format_double(c.values()[m]);
        s += "\n";
    }
    write_atomic(path, s);
}

json config_to_json(const FitConfig& cfg) {
    return json{{"lambda_grid", cfg.lambda_grid},
                {"max_outer", cfg.max_outer},
                {"rel_tol", cfg.rel_tol},
                {"warp_knots", cfg.warp_knots.values()},
                {"basis", {{"order", cfg.basis.order}, {"interior_count", cfg.basis.interior_count}, {"interior_knots", cfg.basis.interior_knots}}},
                {"backtrack_max", cfg.backtrack_max},
                {"work_points", cfg.work_points},
                {"warm_start", cfg.warm_start},
                {"seed", cfg.seed},
                {"threads", cfg.threads}};
}

FitConfig config_from_json(const json& j) {
    FitConfig cfg;
    try {
        if (j.contains("lambda_grid")) cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
        if (j.contains("max_outer")) cfg.max_outer = j.at("max_outer").get<int>();
        if (j.contains("rel_tol")) cfg.rel_tol = j.at("rel_tol").get<double>();
        if (j.contains("warp_knots")) cfg.warp_knots = KnotVector(j.at("warp_knots").get<std::vector<double>>());
        if (j.contains("basis")) {
            const json& b = j.at("basis");
            if (b.contains("order")) cfg.basis.order = b.at("order").get<int>();
            if (b.contains("interior_count")) cfg.basis.interior_count = b.at("interior_count").get<std::size_t>();
            if (b.contains("interior_knots")) cfg.basis.interior_knots = b.at("interior_knots").get<std::vector<double>>();
        }
        if (j.contains("backtrack_max")) cfg.backtrack_max = j.at("backtrack_max").get<int>();
        if (j.contains("work_points")) cfg.work_points = j.at("work_points").get<std::size_t>();
        if (j.contains("warm_start")) cfg.warm_start = j.at("warm_start").get<bool>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("threads")) cfg.threads = j.at("threads").get<unsigned>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad configuration: ") + e.what());
    }
    return cfg;
}

json fit_to_json(const FitResult& fit) {
    json paths = json::array();
    for (const auto& c : fit.paths)
        paths.push_back({{"lambda", c.lambda}, {"df", c.df}, {"mse", c.mse}, {"aicc", number(c.aicc)}, {"gcv", number(c.gcv)},
                         {"converged", c.converged}, {"iterations", c.iterations}});
    json warps = json::array();
    for (const auto& w : fit.warps) warps.push_back(w.theta);
    const auto g = fit.mu_x_tilde.grid().points();
    return json{{"version", kArtifactVersion},
                {"config", config_to_json(fit.config)},
                {"seed", fit.config.seed},
                {"b_hat", fit.b_hat},
                {"theta", warps},
                {"lambda_hat", fit.lambda_hat},
                {"df", fit.df},
                {"mse", fit.mse},
                {"aicc", number(fit.aicc)},
                {"gcv", number(fit.gcv)},
                {"selected_index", fit.selected_index},
                {"boundary_minimum", fit.boundary_minimum},
                {"converged", fit.converged},
                {"iterations", fit.iterations},
                {"objective_trace", fit.objective_trace},
                {"paths", paths},
                {"working_grid", std::vector<double>(g.begin(), g.end())},
                {"alpha_hat", values_vec(fit.alpha_hat)},
                {"mu_x_tilde", values_vec(fit.mu_x_tilde)},
                {"mu_y_tilde", values_vec(fit.mu_y_tilde)}};
}

FitResult fit_from_json(const json& j) {
    try {
        if (j.at("version").get<std::string>() != kArtifactVersion) throw FormatError("unsupported fit artifact version");
        FitResult f;
        f.config = config_from_json(j.at("config"));
        const TimeGrid grid(j.at("working_grid").get<std::vector<double>>());
        f.basis = std::make_shared<const CausalBasis>(f.config.basis.build(grid.a(), grid.b()));
        f.b_hat = j.at("b_hat").get<std::vector<double>>();
        if (f.b_hat.size() != f.basis->size()) throw FormatError("b_hat length does not match the basis in the artifact");
        for (const auto& th : j.at("theta")) f.warps.emplace_back(f.config.warp_knots, th.get<std::vector<double>>());
        f.lambda_hat = j.at("lambda_hat").get<double>();
        f.df = j.at("df").get<double>();
        f.mse = j.at("mse").get<double>();
        f.aicc = number_of(j.at("aicc"));
        f.gcv = number_of(j.at("gcv"));
        f.selected_index = j.at("selected_index").get<std::size_t>();
        f.boundary_minimum = j.at("boundary_minimum").get<bool>();
        f.converged = j.at("converged").get<bool>();
        f.iterations = j.at("iterations").get<int>();
        f.objective_trace = j.at("objective_trace").get<std::vector<double>>();
        for (const auto& c : j.at("paths"))
            f.paths.push_back({c.at("lambda").get<double>(), c.at("df").get<double>(), c.at("mse").get<double>(), number_of(c.at("aicc")),
                               number_of(c.at("gcv")), c.at("converged").get<bool>(), c.at("iterations").get<int>()});
        f.alpha_hat = Curve(grid, j.at("alpha_hat").get<std::vector<double>>());
        f.mu_x_tilde = Curve(grid, j.at("mu_x_tilde").get<std::vector<double>>());
        f.mu_y_tilde = Curve(grid, j.at("mu_y_tilde").get<std::vector<double>>());
        return f;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad fit artifact: ") + e.what());
    }
}

void save_fit(const fs::path& path, const FitResult& fit) { write_atomic(path, fit_to_json(fit).dump(2) + "\n"); }

FitResult load_fit(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return fit_from_json(j);
}

std::string surface_csv(const SurfaceGrid& g, const std::string& value_name) {
    std::string s = "s,t," + value_name + "\n";
    for (std::size_t j = 0; j < g.axis.size(); ++j)
        for (std::size_t i = 0; i < g.axis.size(); ++i) {
            const double v = i > j ? 0.0 : g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            s += format_double(g.axis[i]) + "," + format_double(g.axis[j]) + "," + format_double(v) + "\n";
        }
    return s;
}

std::string warps_csv(const FitResult& fit) {
    const TimeGrid& tg = fit.mu_x_tilde.grid();
    std::vector<WarpFn> fns;
    for (const auto& w : fit.warps) fns.emplace_back(w, WarpGradient::hermite_values);
    std::string s = "t";
    for (std::size_t i = 0; i < fns.size(); ++i) s += ",w" + std::to_string(i + 1);
    s += "\n";
    for (std::size_t m = 0; m < tg.size(); ++m) {
        s += format_double(tg[m]);
        for (const auto& f : fns) s += "," + format_double(f.eval(tg[m]));
        s += "\n";
    }
    return s;
}

std::string paths_csv(const FitResult& fit) {
    std::string s = "lambda,df,mse,aicc,gcv,converged,iterations,selected\n";
    for (std::size_t g = 0; g < fit.paths.size(); ++g) {
        const auto& c = fit.paths[g];
        s += format_double(c.lambda) + "," + format_double(c.df) + "," + format_double(c.mse) + "," +
             (std::isfinite(c.aicc) ? format_double(c.aicc) : "nan") + "," + (std::isfinite(c.gcv) ? format_double(c.gcv) : "nan") +
             "," + (c.converged ? "1" : "0") + "," + std::to_string(c.iterations) + "," + (g == fit.selected_index ? "1" : "0") + "\n";
    }
    return s;
}

std::string mc_report_csv(const MCReport& rep) {
    const EstimatorSummary& d = rep.dynamic;
    const EstimatorSummary& c = rep.classical;
    std::string s =
        "n,k,R,row,ise_opt_dynamic,ise_opt_classical,ise_aicc_dynamic,ise_aicc_classical,"
        "mspe1e3_m1_opt_dynamic,mspe1e3_m1_opt_classical,mspe1e3_m1_aicc_dynamic,mspe1e3_m1_aicc_classical,"
        "mspe1e3_m2_opt_dynamic,mspe1e3_m2_opt_classical,mspe1e3_m2_aicc_dynamic,mspe1e3_m2_aicc_classical\n";
    const std::string head = std::to_string(rep.spec.n) + "," + std::to_string(rep.spec.k) + "," + std::to_string(rep.replications);
    auto row = [&](const std::string& name, std::initializer_list<double> v) {
        s += head + "," + name;
        for (double x : v) s += "," + format_double(x);
        s += "\n";
    };
    row("mean", {d.ise_opt, c.ise_opt, d.ise_aicc, c.ise_aicc, d.mspe1_opt, c.mspe1_opt, d.mspe1_aicc, c.mspe1_aicc, d.mspe2_opt,
                 c.mspe2_opt, d.mspe2_aicc, c.mspe2_aicc});
    row("se", {d.ise_opt_se, c.ise_opt_se, d.ise_aicc_se, c.ise_aicc_se, d.mspe1_opt_se, c.mspe1_opt_se, d.mspe1_aicc_se,
               c.mspe1_aicc_se, d.mspe2_opt_se, c.mspe2_opt_se, d.mspe2_aicc_se, c.mspe2_aicc_se});
    return s;
}

namespace {

json summary_json(const EstimatorSummary& s) {
    return json{{"ise_opt", {{"mean", s.ise_opt}, {"se", s.ise_opt_se}}},
                {"ise_aicc", {{"mean", s.ise_aicc}, {"se", s.ise_aicc_se}}},
                {"mspe_x1e3_model1_opt", {{"mean", s.mspe1_opt}, {"se", s.mspe1_opt_se}}},
                {"mspe_x1e3_model1_aicc", {{"mean", s.mspe1_aicc}, {"se", s.mspe1_aicc_se}}},
                {"mspe_x1e3_model2_opt", {{"mean", s.mspe2_opt}, {"se", s.mspe2_opt_se}}},
                {"mspe_x1e3_model2_aicc", {{"mean", s.mspe2_aicc}, {"se", s.mspe2_aicc_se}}},
                {"fraction_aicc_interior", s.frac_interior},
                {"fraction_mspe_opt_at_smallest_lambda", s.frac_mspe_at_min},
                {"fraction_ise_opt_at_largest_lambda", s.frac_ise_at_max}};
}

json path_json(const EstimatorPath& p) {
    return json{{"ise", p.ise}, {"mspe_model1", p.mspe1}, {"mspe_model2", p.mspe2}, {"selected", p.selected}, {"boundary", p.boundary}};
}

} // namespace

json mc_report_json(const MCReport& rep) {
    json reps = json::array();
    for (const auto& o : rep.replicates) {
        if (!o.failure.empty()) reps.push_back({{"failure", o.failure}});
        else reps.push_back({{"dynamic", path_json(o.dynamic)}, {"classical", path_json(o.classical)}});
    }
    return json{{"n", rep.spec.n},
                {"k", rep.spec.k},
                {"grid_points", rep.spec.m},
                {"n_test", rep.spec.n_test},
                {"seed", rep.spec.seed},
                {"warm_start", rep.spec.warm_start},
                {"requested_replications", rep.spec.reps},
                {"replications", rep.replications},
                {"failures", rep.failures},
                {"lambda_grid", rep.spec.lambda_grid},
                {"mspe_scale", 1000},
                {"dynamic", summary_json(rep.dynamic)},
                {"classical", summary_json(rep.classical)},
                {"replicates", reps}};
}

} // namespace dcfr
