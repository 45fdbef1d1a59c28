#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "errors.hpp"
#include "io.hpp"
#include "predict.hpp"
#include "support.hpp"

using namespace dcfr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "dcfr_unit";
    fs::create_directories(dir);
    return dir / name;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

} // namespace

TEST_CASE("curve files") {
    const auto p = scratch("two_col.csv");
    write(p, "t,x\n0,2\n0.25,2\n0.5,2\n1,2\n");
    const CurveSample s = load_curves(p);
    CHECK(s.size() == 1);
    CHECK(s.curves[0](0.7) == doctest::Approx(2.0));

    write(p, "t,x\n0,1\n0.5,1\n0.5,1\n1,1\n");
    CHECK_THROWS_AS(load_curves(p), FormatError);
    write(p, "t,x,y\n0,1,2\n0.3,1\n0.6,1,2\n1,1,2\n");
    try {
        load_curves(p);
        FAIL("ragged rows must be rejected");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
    write(p, "t,x\n0,1\n0.5,abc\n0.7,1\n1,1\n");
    CHECK_THROWS_AS(load_curves(p), FormatError);
    write(p, "t,x\n0,1\n0.5,1\n1,1\n");
    CHECK_THROWS_AS(load_curves(p), FormatError);
    CHECK_THROWS_AS(load_curves(scratch("missing.csv")), Error);
}

TEST_CASE("save then load reproduces values exactly") {
    const auto toy = testdata::warped_bumps(3, 1, 37);
    const auto p = scratch("round.csv");
    save_curves(p, toy.X, "x");
    const CurveSample back = load_curves(p);
    REQUIRE(back.size() == 3);
    const auto g0 = toy.X.grid.points(), g1 = back.grid.points();
    CHECK(std::equal(g0.begin(), g0.end(), g1.begin(), g1.end()));
    for (std::size_t i = 0; i < 3; ++i) {
        const auto a = toy.X.curves[i].values(), b = back.curves[i].values();
        CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
}

TEST_CASE("fit artifacts are self-sufficient") {
    const auto toy = testdata::warped_bumps(6, 2, 51);
    FitConfig cfg;
    cfg.basis.interior_count = 2;
    cfg.warp_knots = KnotVector({0, 0.5, 1});
    cfg.lambda_grid = {1e-3, 1e-2, 1e-1};
    cfg.seed = 42;
    const FitResult fit = select_lambda(toy.X, toy.Y, cfg);
    const auto p = scratch("fit.json");
    save_fit(p, fit);
    const FitResult back = load_fit(p);
    CHECK(back.b_hat == fit.b_hat);
    CHECK(back.lambda_hat == fit.lambda_hat);
    CHECK(back.paths.size() == fit.paths.size());
    CHECK(back.config.seed == 42);
    for (std::size_t i = 0; i < 6; ++i) CHECK(back.warps[i].theta == fit.warps[i].theta);
    const Prediction p1 = predict_response(toy.X.curves[1], fit), p2 = predict_response(toy.X.curves[1], back);
    const auto y1 = p1.y_hat.values(), y2 = p2.y_hat.values();
    CHECK(std::equal(y1.begin(), y1.end(), y2.begin(), y2.end()));
    CHECK(fit_to_json(back).dump() == fit_to_json(fit).dump());

    auto j = fit_to_json(fit);
    j["version"] = "0";
    CHECK_THROWS_AS(fit_from_json(j), Error);
}

TEST_CASE("configuration json round-trip") {
    FitConfig cfg;
    cfg.basis.order = 2;
    cfg.basis.interior_knots = {0.1, 0.3};
    cfg.warp_knots = KnotVector({0, 0.05, 0.2, 1});
    cfg.lambda_grid = {1e-4, 1e-3};
    const FitConfig back = config_from_json(config_to_json(cfg));
    CHECK(back.basis.order == 2);
    CHECK(back.basis.interior_knots == cfg.basis.interior_knots);
    CHECK(back.warp_knots == cfg.warp_knots);
    CHECK(back.lambda_grid == cfg.lambda_grid);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"warp_knots":[0,0.5,0.4,1]})")), Error);
}

TEST_CASE("surface tables carry the grid and exact zeros above the diagonal") {
    SurfaceGrid g;
    g.axis = {0.0, 0.5, 1.0};
    g.values = Eigen::MatrixXd::Constant(3, 3, 0.25);
    const std::string csv = surface_csv(g, "beta");
    CHECK(csv.rfind("s,t,beta\n", 0) == 0);
    CHECK(csv.find("1,0,0\n") != std::string::npos);
    CHECK(csv.find("0,1,0.25\n") != std::string::npos);
}

TEST_CASE("atomic writes create directories") {
    const auto p = scratch("nested/a/b.txt");
    write_atomic(p, "hello");
    CHECK(read_file(p) == "hello");
    CHECK(!fs::exists(p.string() + ".tmp"));
}
