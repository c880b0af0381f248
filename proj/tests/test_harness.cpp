#include <linkmix/harness.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

using namespace linkmix;
using Catch::Approx;

TEST_CASE("error grid with default settings") {
    const ErrorGridConfig config;
    const auto result = error_rate_experiment(config);
    REQUIRE(result.rows.size() == 6 + 18);

    std::size_t h0_reps = 0, h0_rejections = 0;
    for (const auto& row : result.rows) {
        CHECK(row.rejections <= row.replicates);
        CHECK(row.error >= 0.0);
        CHECK(row.error <= 1.0);
        if (row.generating_model == ModelKind::admixture) {
            CHECK(row.error <= 0.05 + 2.0 * std::max(row.mc_stderr, std::sqrt(0.05 * 0.95 / 100.0)));
            h0_reps += row.replicates;
            h0_rejections += row.rejections;
        }
    }
    const double pooled = static_cast<double>(h0_rejections) / static_cast<double>(h0_reps);
    CHECK(h0_reps >= 600);
    CHECK(pooled >= 0.01);
    CHECK(pooled <= 0.07);

    const auto* far = result.find(ModelKind::linkage, 10.0, 100.0);
    const auto* near = result.find(ModelKind::linkage, 0.1, 1.0);
    REQUIRE(far);
    REQUIRE(near);
    CHECK(far->error >= near->error);

    std::ostringstream csv;
    write_csv(csv, result);
    CHECK(csv.str().rfind("model,d,r,replicates,rejections,error,mc_stderr\n", 0) == 0);
    CHECK(csv.str().find("admixture,0.1,inf,100,") != std::string::npos);
}

TEST_CASE("error grid edge cases and determinism") {
    ErrorGridConfig config;
    config.replicates = 0;
    CHECK(error_rate_experiment(config).rows.empty());

    config.replicates = 10;
    config.d_values = {1.0};
    config.r_values = {1.0};
    config.seed = 3;
    const auto a = error_rate_experiment(config);
    config.workers = 1;
    const auto b = error_rate_experiment(config);
    REQUIRE(a.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) CHECK(a.rows[i].rejections == b.rows[i].rejections);

    config.alpha = 0.0;
    CHECK_THROWS_AS(error_rate_experiment(config), ConfigError);
}

TEST_CASE("coverage with a degenerate estimator is zero") {
    CoverageConfig config;
    config.replicates = 5;
    config.markers = 20;
    config.estimator = [](const SimulationResult&) {
        return PointEstimate{{0.1, 0.9, 50.0}, {0.0, 0.0, 0.0}, false};
    };
    const auto result = coverage_experiment(config);
    CHECK(result.used == 5);
    for (double c : result.coverage) CHECK(c == 0.0);
    for (double w : result.mean_width) CHECK(w == 0.0);
}

TEST_CASE("coverage bookkeeping with an injected estimator") {
    CoverageConfig config;
    config.replicates = 6;
    config.markers = 20;
    int calls = 0;
    config.workers = 1;
    config.estimator = [&](const SimulationResult&) {
        const bool boundary = calls++ % 3 == 0;
        return PointEstimate{{0.6, 0.4, 1.0}, {0.1, 0.1, 1.0}, boundary};
    };
    const auto result = coverage_experiment(config);
    CHECK(result.boundary == 2);
    CHECK(result.used == 4);
    CHECK(result.coverage[0] == 1.0);
    CHECK(result.mean_width[0] == Approx(2 * 1.959963984540054 * 0.1));
    std::ostringstream csv;
    write_csv(csv, result);
    CHECK(csv.str().rfind("parameter,theta0,coverage,mean_width,replicates,used,boundary\n", 0) == 0);
}

TEST_CASE("coverage of the linkage estimator at desk scale") {
    CoverageConfig config;
    config.replicates = 60;
    const auto result = coverage_experiment(config);
    CHECK(result.used >= 50);
    CHECK(result.coverage[0] >= 0.85);
    CHECK(result.labels == std::vector<std::string>{"q1", "q2", "r"});
}

TEST_CASE("consistency: errors shrink as markers grow") {
    ConsistencyConfig config;
    const auto table = consistency_experiment(config);
    REQUIRE(table.size() == 3);
    CHECK(table.back().median_abs_error_q1 < table.front().median_abs_error_q1);
    CHECK(table.back().median_abs_error_r < table.front().median_abs_error_r);
    std::ostringstream csv;
    write_csv(csv, table);
    CHECK(csv.str().rfind("markers,replicates,median_abs_error_q1,median_abs_error_r,fraction_r_large\n", 0) == 0);
}

TEST_CASE("consistency at the admixture boundary") {
    ConsistencyConfig config;
    config.r0 = kInfinity;
    config.marker_schedule = {4000};
    config.replicates = 20;
    const auto table = consistency_experiment(config);
    REQUIRE(table.size() == 1);
    CHECK(table[0].fraction_r_large > 0.5);
    CHECK(std::isnan(table[0].median_abs_error_r));
}

TEST_CASE("consistency schedule validation") {
    ConsistencyConfig config;
    config.marker_schedule = {1000, 500};
    CHECK_THROWS_AS(consistency_experiment(config), ConfigError);
}

TEST_CASE("Kolmogorov distribution and KS test") {
    CHECK(kolmogorov_sf(1.3581) == Approx(0.05).margin(1e-3));
    CHECK(kolmogorov_sf(1.6276) == Approx(0.01).margin(1e-3));
    CHECK(kolmogorov_sf(0.0) == 1.0);

    std::vector<double> grid;
    for (int i = 0; i < 1000; ++i) grid.push_back((i + 0.5) / 1000.0);
    auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
    const auto ks = ks_test(grid, uniform, uniform);
    CHECK(ks.statistic == Approx(0.0005).margin(1e-12));
    CHECK(ks.p_value > 0.99);

    std::vector<double> shifted;
    for (double v : grid) shifted.push_back(v * v);
    CHECK(ks_test(shifted, uniform, uniform).p_value < 1e-6);

    // an atom at zero is handled through the left limits
    std::vector<double> mixed(500, 0.0);
    Philox rng(1);
    for (int i = 0; i < 500; ++i) {
        const double z = normal_quantile(rng.uniform_open_zero() * 0.999999);
        mixed.push_back(z * z);
    }
    CHECK(ks_test(mixed, mixture_cdf, mixture_cdf_left).p_value > 0.01);
    CHECK(ks_test(mixed, [](double x) { return chi2_cdf(x); }, [](double x) { return chi2_cdf(x); }).p_value <
          1e-6);
}

TEST_CASE("mixture quantiles and empirical quantiles") {
    CHECK(mixture_quantile(0.5) == 0.0);
    CHECK(mixture_quantile(0.95) == Approx(chi2_quantile(0.9)).epsilon(1e-12));
    CHECK(mixture_cdf(0.0) == 0.5);
    CHECK(mixture_cdf_left(0.0) == 0.0);
    CHECK(empirical_quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(empirical_quantile({0.0, 10.0}, 0.25) == 2.5);
}

TEST_CASE("null calibration") {
    NullCalibrationConfig config;
    config.replicates = 200;
    const auto result = null_calibration(config);
    CHECK(result.lambdas.size() == 200);
    CHECK(result.rejection_rate <= 0.07);
    CHECK(result.quantiles.size() == 4);
    CHECK(result.quantiles[2].chi2 == Approx(chi2_quantile(0.95)));
    CHECK(result.quantiles[2].mixture == Approx(chi2_quantile(0.90)));
    for (double l : result.lambdas) CHECK(l >= 0.0);
}
