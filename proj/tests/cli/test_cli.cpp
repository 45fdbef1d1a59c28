// Drives the dcfr executable end to end; DCFR_CLI is the path to the binary.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "io.hpp"
#include "predict.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "dcfr_cli_test";

int run(const std::string& args, const std::string& log = "out.txt") {
    const std::string cmd = std::string(DCFR_CLI) + " " + args + " > " + (kWork / log).string() + " 2> " +
                            (kWork / (log + ".err")).string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Setup {
    Setup() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        REQUIRE(run("simulate --dataset-only --n 20 --n-test 10 --seed 5 --out " + (kWork / "ds").string()) == 0);
    }
};

const Setup& setup() {
    static const Setup s;
    return s;
}

std::string ds(const char* f) { return (kWork / "ds" / f).string(); }

} // namespace

TEST_CASE("fit then predict prints the library MSPE") {
    setup();
    REQUIRE(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --basis-knots 5 --warp-knots 0,0.5,1 --lambda 1e-3 --out " +
                (kWork / "fit").string()) == 0);
    for (const char* f : {"fit.json", "beta_surface.csv", "warps.csv", "lambda_path.csv", "aligned_x.csv", "aligned_y.csv"})
        CHECK(fs::exists(kWork / "fit" / f));
    REQUIRE(run("predict --fit " + (kWork / "fit/fit.json").string() + " --x " + ds("x_test.csv") + " --y " + ds("y_test.csv") +
                " --out " + (kWork / "pred").string(), "pred.txt") == 0);
    const std::string out = slurp(kWork / "pred.txt");
    REQUIRE(out.rfind("mspe ", 0) == 0);
    const double printed = std::stod(out.substr(5));
    const dcfr::FitResult fit = dcfr::load_fit(kWork / "fit/fit.json");
    const double lib = dcfr::mspe(fit, dcfr::load_curves(ds("x_test.csv")), dcfr::load_curves(ds("y_test.csv")));
    CHECK(std::abs(printed - lib) <= 1e-12 * std::max(1.0, lib));
    CHECK(fs::exists(kWork / "pred/y_hat.csv"));
}

TEST_CASE("classical fits through the no-warp flag") {
    setup();
    REQUIRE(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --no-warp --lambda 1e-3 --out " +
                (kWork / "plain").string()) == 0);
    const dcfr::FitResult fit = dcfr::load_fit(kWork / "plain/fit.json");
    CHECK(fit.config.warp_knots.interior_count() == 0);
}

TEST_CASE("infer with a small bootstrap filters by the two-sigma rule") {
    setup();
    REQUIRE(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --basis-knots 3 --lambda 1e-3 --out " +
                (kWork / "fit3").string()) == 0);
    REQUIRE(run("infer --fit " + (kWork / "fit3/fit.json").string() + " --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") +
                " --bootstrap 10 --seed 3 --out " + (kWork / "inf").string()) == 0);
    std::ifstream beta(kWork / "inf/beta_surface.csv"), var(kWork / "inf/variance.csv"), filt(kWork / "inf/beta_filtered.csv");
    std::string lb, lv, lf;
    std::getline(beta, lb), std::getline(var, lv), std::getline(filt, lf);
    std::size_t rows = 0, zeroed = 0;
    while (std::getline(beta, lb) && std::getline(var, lv) && std::getline(filt, lf)) {
        auto last = [](const std::string& s) { return std::stod(s.substr(s.rfind(',') + 1)); };
        auto key = [](const std::string& s) { return s.substr(0, s.rfind(',')); };
        REQUIRE(key(lb) == key(lv));
        REQUIRE(key(lb) == key(lf));
        const double b = last(lb), v = last(lv), f = last(lf);
        if (std::abs(b) < 2 * std::sqrt(v)) {
            CHECK(f == 0.0);
            ++zeroed;
        } else {
            CHECK(f == b);
        }
        ++rows;
    }
    CHECK(rows == 101 * 101);
    CHECK(zeroed > 0);
}

TEST_CASE("seeded simulation reports are byte-identical") {
    setup();
    const std::string common = "simulate --n 10 --n-test 5 --k 3 --reps 2 --seed 9 --out ";
    REQUIRE(run(common + (kWork / "mc1").string()) == 0);
    REQUIRE(run(common + (kWork / "mc2").string() + " --threads 2") == 0);
    CHECK(slurp(kWork / "mc1/mc_report.csv") == slurp(kWork / "mc2/mc_report.csv"));
    CHECK(slurp(kWork / "mc1/mc_report.json") == slurp(kWork / "mc2/mc_report.json"));
    CHECK(!slurp(kWork / "mc1/mc_report.csv").empty());
}

TEST_CASE("errors map to exit codes with a JSON record") {
    setup();
    CHECK(run("fit --x /nonexistent.csv --y " + ds("y_train.csv"), "e1.txt") == 2);
    CHECK(slurp(kWork / "e1.txt.err").find("\"error\":\"io\"") != std::string::npos);
    CHECK(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --warp-knots 0,0.6,0.4,1", "e2.txt") == 3);
    CHECK(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --lambda-grid 1e-9,1e-8 --basis-knots 10", "e3.txt") == 4);
    CHECK(slurp(kWork / "e3.txt.err").find("\"error\":\"singularity\"") != std::string::npos);
    CHECK(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --lambda-grid 1e-6,1e-5", "e6.txt") == 5);
    // on this data the AICC minimum sits at the top of the grid, which needs an explicit override
    CHECK(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --lambda-grid 1e-3,1e-2,1e-1", "e4.txt") == 5);
    CHECK(slurp(kWork / "e4.txt.err").find("WARNING") != std::string::npos);
    CHECK(run("fit --x " + ds("x_train.csv") + " --y " + ds("y_train.csv") + " --lambda-grid 1e-3,1e-2,1e-1 --lambda 1e-2 --out " +
              (kWork / "override").string(), "e7.txt") == 0);
    CHECK(run("frobnicate", "e5.txt") != 0);
}
