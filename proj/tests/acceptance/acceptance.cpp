// Acceptance run: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the listed numbers. Exit status is nonzero
// when any selected criterion fails.

#include "../helpers.hpp"

#include <linkmix/cli.hpp>
#include <linkmix/linkmix.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace linkmix;

namespace {

const std::string kData = LINKMIX_TEST_DATA;

struct Outcome {
    bool pass = true;
    std::string detail;
};

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

Outcome oracle_equivalence() {
    Stopwatch clock;
    Philox rng(20240101);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t K = 2 + static_cast<std::size_t>(rng.uniform() < 0.5);
        const std::size_t C = 1 + static_cast<std::size_t>(rng.uniform() < 0.5);
        const auto total = static_cast<std::size_t>(2 + rng.uniform() * 9.0);  // 2..10
        std::vector<std::size_t> markers;
        if (C == 1) {
            markers = {total};
        } else {
            const std::size_t first = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(total - 1));
            markers = {first, total - first};
        }
        const auto inst = testing::random_instance(rng, K, markers);
        const double fast = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta).ell;
        const double slow = brute_force_loglik(inst.data, inst.freqs, inst.map, inst.theta).ell;
        worst = std::max(worst, std::abs(fast - slow));
    }
    const double t = clock.seconds();
    return {worst < 1e-10 && t < 10.0, fmt("max |forward - brute force| = %.3g over 200 instances in %.2f s", worst, t)};
}

Outcome nesting() {
    Philox rng(77);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t K = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
        auto inst = testing::random_instance(rng, K, {20, 15}, i % 2 ? Ploidy::phased_diploid : Ploidy::haploid);
        inst.theta.r = kInfinity;
        const double linked = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta).ell;
        const double independent = admixture_loglik(inst.data, inst.freqs, inst.theta.q).ell;
        worst = std::max(worst, std::abs(linked - independent));
    }

    double worst_deficit = -kInfinity;
    int fits = 0;
    for (std::uint64_t rep = 0; rep < 60; ++rep) {
        SimulationConfig cfg;
        cfg.markers_per_chromosome = {120};
        cfg.r0 = rep % 3 == 0 ? kInfinity : std::exp(static_cast<double>(rep % 5) - 1.0);
        cfg.seed = 404;
        cfg.stream = rep;
        const auto s = simulate_linkage(cfg);
        const LikelihoodModel model(s.data, s.freqs, s.map);
        const auto null_fit = fit_admixture(model);
        const auto alt_fit = fit_linkage(model);
        worst_deficit = std::max(worst_deficit, null_fit.ell_hat - alt_fit.ell_hat);
        ++fits;
    }
    const bool pass = worst <= 1e-14 && worst_deficit <= 1e-10;
    return {pass, fmt("max |forward(r=inf) - admixture| = %.3g over 100 instances; "
                      "max (ell_admixture - ell_linkage) = %.3g over %d fitted pairs",
                      worst, worst_deficit, fits)};
}

Outcome stationarity() {
    Stopwatch clock;
    Philox rng(3);
    double worst_stationary = 0.0, worst_eigen = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t K = 2 + static_cast<std::size_t>(rng.uniform() * 5.0);  // 2..6
        const auto q = rng.dirichlet_ones(K);
        const double r = std::exp(rng.uniform(-3.0, 3.0));
        const double d = rng.uniform(0.0, 3.0);
        const Eigen::MatrixXd T = transition_matrix(q, r, d);
        const Eigen::Map<const Eigen::RowVectorXd> qv(q.data(), static_cast<Eigen::Index>(K));
        worst_stationary = std::max(worst_stationary, (qv * T - qv).cwiseAbs().maxCoeff());

        const Eigen::EigenSolver<Eigen::MatrixXd> solver(T);
        std::vector<double> got;
        for (Eigen::Index j = 0; j < solver.eigenvalues().size(); ++j) {
            worst_eigen = std::max(worst_eigen, std::abs(solver.eigenvalues()[j].imag()));
            got.push_back(solver.eigenvalues()[j].real());
        }
        std::vector<double> expected(K, std::exp(-d * r));
        expected[0] = 1.0;
        std::sort(got.begin(), got.end());
        std::sort(expected.begin(), expected.end());
        for (std::size_t j = 0; j < K; ++j) worst_eigen = std::max(worst_eigen, std::abs(got[j] - expected[j]));
    }
    const double t = clock.seconds();
    const bool pass = worst_stationary < 1e-12 && worst_eigen < 1e-9 && t < 5.0;
    return {pass, fmt("max |q'T - q'| = %.3g, max eigenvalue error = %.3g over 1000 draws in %.2f s", worst_stationary,
                      worst_eigen, t)};
}

Outcome type_one_error() {
    Stopwatch clock;
    const int reps = 300;
    int rejected = 0;
    for (int rep = 0; rep < reps; ++rep) {
        SimulationConfig cfg;
        cfg.markers_per_chromosome = {100};
        cfg.seed = 4001;
        cfg.stream = static_cast<std::uint64_t>(rep);
        const auto s = simulate_admixture(cfg);
        rejected += run_test(s.data, s.freqs, s.map, 0.05).reject;
    }
    const double rate = rejected / static_cast<double>(reps);
    const double t = clock.seconds();
    return {rate <= 0.07 && t < 300.0,
            fmt("rejection rate %.4f (%d/%d) on admixture data, M=100, alpha=0.05, %.1f s", rate, rejected, reps, t)};
}

Outcome power_and_trend() {
    ErrorGridConfig cfg;
    cfg.d_values = {0.1, 1.0, 10.0};
    cfg.r_values = {1.0, 100.0};
    cfg.replicates = 100;
    cfg.seed = 5001;
    const auto grid = error_rate_experiment(cfg);
    const auto* target = grid.find(ModelKind::linkage, 1.0, 1.0);
    const auto* easy = grid.find(ModelKind::linkage, 0.1, 1.0);
    const auto* hard = grid.find(ModelKind::linkage, 10.0, 100.0);
    if (!target || !easy || !hard) return {false, "error grid is missing cells"};
    const double power = 1.0 - target->error;
    const bool power_ok = power >= 0.8;
    const bool trend_ok = hard->error >= easy->error;
    return {power_ok && trend_ok,
            fmt("power at (r=1,d=1) = %.2f (needs >= 0.80: %s); type-II at (r=100,d=10) = %.2f vs (r=1,d=0.1) = "
                "%.2f (trend %s)",
                power, power_ok ? "ok" : "FAIL", hard->error, easy->error, trend_ok ? "ok" : "FAIL")};
}

Outcome consistency() {
    ConsistencyConfig cfg;
    cfg.marker_schedule = {5000};
    cfg.replicates = 20;
    cfg.seed = 6001;
    const auto table = consistency_experiment(cfg);
    const auto& row = table.front();
    const bool pass = row.median_abs_error_q1 < 0.03 && row.median_abs_error_r < 0.4;
    return {pass, fmt("M=5000, 20 replicates: median |q1 - 0.6| = %.4f, median |r - 1| = %.4f", row.median_abs_error_q1,
                      row.median_abs_error_r)};
}

Outcome coverage() {
    CoverageConfig cfg;
    cfg.seed = 7001;
    const auto base = coverage_experiment(cfg);
    auto doubled_cfg = cfg;
    doubled_cfg.markers = 2 * cfg.markers;
    const auto doubled = coverage_experiment(doubled_cfg);
    const double cov = base.coverage[0];
    const double ratio = base.mean_width[0] / doubled.mean_width[0];
    const double rel = std::abs(ratio - std::sqrt(2.0)) / std::sqrt(2.0);
    const bool pass = cov >= 0.90 && cov <= 0.99 && rel <= 0.15;
    return {pass, fmt("q1 coverage %.3f (%zu used, %zu boundary); width ratio M=%zu vs %zu: %.3f (sqrt 2 off by %.1f%%)",
                      cov, base.used, base.boundary, cfg.markers, doubled_cfg.markers, ratio, 100.0 * rel)};
}

Outcome null_calibration_check() {
    NullCalibrationConfig cfg;
    cfg.seed = 8001;
    const auto res = null_calibration(cfg);
    std::ostringstream q;
    for (const auto& row : res.quantiles)
        q << fmt(" p=%.2f emp=%.3f chi2=%.3f mix=%.3f;", row.probability, row.empirical, row.chi2, row.mixture);
    const bool pass = res.rejection_rate >= 0.01 && res.rejection_rate <= 0.07;
    return {pass, fmt("rejection rate %.4f over %zu replicates; KS p chi2=%.3g mixture=%.3g;", res.rejection_rate,
                      res.lambdas.size(), res.ks_chi2.p_value, res.ks_mixture.p_value) +
                      q.str()};
}

// Independent reference: erf from its Maclaurin series, quantile by bisection.
double series_erf(double x) {
    double term = x, sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= -x * x / n;
        sum += term / (2 * n + 1);
    }
    return 2.0 / std::sqrt(std::acos(-1.0)) * sum;
}

Outcome chi_square() {
    double lo = 0.0, hi = 6.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * (1.0 + series_erf(mid / std::sqrt(2.0))) < 0.975 ? lo : hi) = mid;
    }
    const double oracle = 0.25 * (lo + hi) * (lo + hi);
    const double q95 = chi2_quantile(0.95);
    double worst = 0.0;
    for (double p : {0.5, 0.9, 0.95, 0.99}) worst = std::max(worst, std::abs(chi2_sf(chi2_quantile(p)) - (1.0 - p)));
    const bool pass = std::abs(q95 - 3.84146) < 1e-4 && std::abs(q95 - oracle) < 1e-4 && worst < 1e-8;
    return {pass, fmt("chi2_quantile(0.95) = %.8f, bisection oracle %.8f; max |sf(quantile(p)) - (1-p)| = %.3g", q95,
                      oracle, worst)};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        rows.push_back(std::move(fields));
    }
    return rows;
}

Outcome panel_pipeline() {
    const auto dir = std::filesystem::temp_directory_path() / "linkmix_acceptance_panel";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    const std::string results = (dir / "results.csv").string();
    const std::string summary = (dir / "summary.csv").string();
    const std::vector<std::string> args{"linkmix",   "test-panel", "--genotypes", kData + "/panel.genotypes.tsv",
                                        "--map",     kData + "/panel.map.tsv",   "--labels",
                                        kData + "/panel.labels.tsv", "--loo",    "--out",
                                        results,     "--summary",  summary};
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != cli::kExitOk) return {false, "test-panel exited with " + std::to_string(code) + ": " + err.str()};

    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto rows = csv_rows(slurp(results));
    const std::vector<std::string> header{"id",     "ell_null", "ell_alt", "lambda", "p_value", "reject",       "q_hat1",
                                          "q_hat2", "q_hat3",   "q_hat4",  "q_hat5", "r_hat",   "boundary_flag"};
    bool schema = !rows.empty() && rows[0] == header && rows.size() == 21;
    std::set<std::string> ids;
    std::size_t markers = 0;
    {
        std::ifstream map(kData + "/panel.map.tsv");
        std::string line;
        std::set<std::string> chroms;
        std::getline(map, line);
        while (std::getline(map, line))
            if (!line.empty()) {
                ++markers;
                chroms.insert(line.substr(0, line.find('\t')));
            }
        schema = schema && chroms.size() == 20;
    }
    int rejected = 0;
    for (std::size_t i = 1; schema && i < rows.size(); ++i) {
        schema = rows[i].size() == header.size() && (rows[i][5] == "0" || rows[i][5] == "1") &&
                 (rows[i][12] == "0" || rows[i][12] == "1");
        ids.insert(rows[i][0]);
        rejected += rows[i][5] == "1";
    }
    schema = schema && ids.size() == 20 && markers == 55;
    const auto sum_rows = csv_rows(slurp(summary));
    schema = schema && !sum_rows.empty() &&
             sum_rows[0] == std::vector<std::string>{"population", "n", "non_rejected", "non_rejection_fraction"} &&
             sum_rows.size() == 7 && sum_rows.back()[0] == "ALL";
    const double rate = rejected / 20.0;
    return {schema && rate <= 0.07, fmt("20 individuals, %zu markers on 20 chromosomes, K=5: schema %s, rejection rate "
                                        "%.3f (%d/20)",
                                        markers, schema ? "exact" : "MISMATCH", rate, rejected)};
}

} // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
        {1, {"forward algorithm equals brute-force enumeration", oracle_equivalence}},
        {2, {"nesting identity", nesting}},
        {3, {"stationarity and eigenvalues", stationarity}},
        {4, {"type-I error", type_one_error}},
        {5, {"power and trend", power_and_trend}},
        {6, {"consistency", consistency}},
        {7, {"CLT coverage", coverage}},
        {8, {"null calibration", null_calibration_check}},
        {9, {"chi-square math", chi_square}},
        {10, {"test-panel --loo pipeline", panel_pipeline}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (!criteria.count(n)) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.push_back(n);
    }
    if (selected.empty())
        for (const auto& [n, _] : criteria) selected.push_back(n);

    int failures = 0;
    for (int n : selected) {
        const auto& [name, check] = criteria.at(n);
        Outcome outcome;
        try {
            outcome = check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        failures += !outcome.pass;
        std::printf("%s criterion %d (%s): %s\n", outcome.pass ? "PASS" : "FAIL", n, name, outcome.detail.c_str());
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
