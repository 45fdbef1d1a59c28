#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "dcfr/dcfr.h"

TEST_CASE("C API round trip") {
    const std::size_t m = 41, n = 6;
    std::vector<double> t(m), x(n * m), y(n * m);
    for (std::size_t j = 0; j < m; ++j) t[j] = static_cast<double>(j) / (m - 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double s = t[j], c = 0.3 + 0.03 * static_cast<double>(i);
            x[i * m + j] = std::exp(-20 * (s - c) * (s - c)) + 0.1 * static_cast<double>(i) * s;
            y[i * m + j] = 0.8 * std::exp(-20 * (s - c - 0.15) * (s - c - 0.15)) + 0.01 * std::sin(7.0 * s + static_cast<double>(i));
        }
    dcfr_sample *X = nullptr, *Y = nullptr;
    REQUIRE(dcfr_sample_create(t.data(), m, x.data(), n, &X) == DCFR_OK);
    REQUIRE(dcfr_sample_create(t.data(), m, y.data(), n, &Y) == DCFR_OK);
    CHECK(dcfr_sample_count(X) == n);
    CHECK(dcfr_sample_points(X) == m);

    dcfr_config* cfg = nullptr;
    REQUIRE(dcfr_config_create(&cfg) == DCFR_OK);
    const double knots[3] = {0, 0.5, 1};
    CHECK(dcfr_config_set_warp_knots(cfg, knots, 3) == DCFR_OK);
    CHECK(dcfr_config_set_basis(cfg, 4, 2) == DCFR_OK);
    const double bad[3] = {0, 0.7, 0.5};
    CHECK(dcfr_config_set_warp_knots(cfg, bad, 3) == DCFR_ERR_CONTRACT);
    CHECK(std::strlen(dcfr_last_error()) > 0);

    dcfr_fit* fit = nullptr;
    REQUIRE(dcfr_fit_at(X, Y, cfg, 1e-3, &fit) == DCFR_OK);
    CHECK(dcfr_fit_lambda(fit) == 1e-3);
    const std::size_t p = dcfr_fit_coef_count(fit);
    CHECK(p == 33);
    std::vector<double> b(p);
    CHECK(dcfr_fit_coefficients(fit, b.data()) == DCFR_OK);
    double beta = 1;
    CHECK(dcfr_fit_beta(fit, 0.8, 0.2, &beta) == DCFR_OK);
    CHECK(beta == 0.0);
    CHECK(dcfr_fit_beta(fit, 0.2, 1.5, &beta) == DCFR_ERR_CONTRACT);

    dcfr_sample* yhat = nullptr;
    REQUIRE(dcfr_predict(fit, X, &yhat) == DCFR_OK);
    CHECK(dcfr_sample_count(yhat) == n);
    double err = -1;
    CHECK(dcfr_mspe(fit, X, Y, &err) == DCFR_OK);
    CHECK(err >= 0.0);

    dcfr_variance* var = nullptr;
    REQUIRE(dcfr_variance_asymptotic(fit, X, Y, &var) == DCFR_OK);
    double v = -1;
    CHECK(dcfr_variance_eval(var, 0.2, 0.6, &v) == DCFR_OK);
    CHECK(v >= 0.0);
    CHECK(dcfr_variance_eval(var, 0.6, 0.2, &v) == DCFR_OK);
    CHECK(v == 0.0);

    char* js = nullptr;
    CHECK(dcfr_config_to_json(cfg, &js) == DCFR_OK);
    CHECK(std::string(js).find("warp_knots") != std::string::npos);
    dcfr_string_free(js);

    dcfr_sample* missing = nullptr;
    CHECK(dcfr_sample_load_csv("/nonexistent/file.csv", &missing) == DCFR_ERR_IO);
    CHECK(missing == nullptr);
    CHECK(dcfr_fit_at(X, Y, cfg, 1e-3, nullptr) == DCFR_ERR_CONTRACT);
    CHECK(std::string(dcfr_version()).size() > 0);

    dcfr_variance_free(var);
    dcfr_sample_free(yhat);
    dcfr_fit_free(fit);
    dcfr_config_free(cfg);
    dcfr_sample_free(X);
    dcfr_sample_free(Y);
    dcfr_fit_free(nullptr);
}
