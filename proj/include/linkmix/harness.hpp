#pragma once

#include <linkmix/chi2.hpp>
#include <linkmix/inference.hpp>
#include <linkmix/lrt.hpp>
#include <linkmix/parallel.hpp>
#include <linkmix/random.hpp>
#include <linkmix/simulate.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

namespace linkmix {

// ---------------------------------------------------------------------------
// Type-I / type-II error grid
// ---------------------------------------------------------------------------

struct ErrorGridConfig {
    std::vector<double> d_values{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    std::vector<double> r_values{1.0, 10.0, 100.0};
    std::size_t markers = 100;
    std::size_t replicates = 100;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::size_t K = 2;
    std::vector<double> q0{0.5, 0.5};
    FitOptions fit;
    unsigned workers = 0;
};

struct ErrorGridRow {
    ModelKind generating_model = ModelKind::admixture;
    double d = 0.0;
    double r = kInfinity;        // kInfinity for Admixture-generated cells
    std::size_t replicates = 0;
    std::size_t rejections = 0;
    double error = 0.0;          // type-I for Admixture cells, type-II for Linkage cells
    double mc_stderr = 0.0;
};

struct ErrorGridResult {
    std::vector<ErrorGridRow> rows;

    const ErrorGridRow* find(ModelKind model, double d, double r) const {
        for (const auto& row : rows)
            if (row.generating_model == model && row.d == d && (row.r == r || (std::isinf(row.r) && std::isinf(r))))
                return &row;
        return nullptr;
    }
};

inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline void write_csv(std::ostream& os, const ErrorGridResult& result) {
    os << "model,d,r,replicates,rejections,error,mc_stderr\n";
    for (const auto& row : result.rows)
        os << to_string(row.generating_model) << ',' << format_double(row.d) << ',' << format_double(row.r) << ','
           << row.replicates << ',' << row.rejections << ',' << format_double(row.error) << ','
           << format_double(row.mc_stderr) << '\n';
}

// Replicate i of every Linkage cell reads stream replicate_stream(0, i), so
// those cells share their random numbers and differ only by (d, r). Admixture
// data does not depend on d, so each Admixture cell gets its own streams and
// the pooled type-I error rests on independent replicates.
inline ErrorGridResult error_rate_experiment(const ErrorGridConfig& config) {
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
    ErrorGridResult result;
    if (config.replicates == 0) return result;

    struct Cell {
        ModelKind model;
        double d, r;
        std::uint64_t stream_cell;
    };
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < config.d_values.size(); ++i)
        cells.push_back({ModelKind::admixture, config.d_values[i], kInfinity, 1 + i});
    for (double r : config.r_values)
        for (double d : config.d_values) cells.push_back({ModelKind::linkage, d, r, 0});

    const std::size_t R = config.replicates;
    std::vector<char> rejected(cells.size() * R, 0);
    parallel_for(
        cells.size() * R,
        [&](std::size_t job) {
            const auto& cell = cells[job / R];
            const std::size_t rep = job % R;
            SimulationConfig sim;
            sim.K = config.K;
            sim.q0 = config.q0;
            sim.markers_per_chromosome = {config.markers};
            sim.distance = cell.d;
            sim.r0 = cell.r;
            sim.emission = config.fit.emission;
            sim.seed = config.seed;
            sim.stream = replicate_stream(cell.stream_cell, rep);
            const auto s = simulate_linkage(sim);
            rejected[job] = run_test(s.data, s.freqs, s.map, config.alpha, config.fit).reject ? 1 : 0;
        },
        config.workers);

    for (std::size_t i = 0; i < cells.size(); ++i) {
        ErrorGridRow row;
        row.generating_model = cells[i].model;
        row.d = cells[i].d;
        row.r = cells[i].r;
        row.replicates = R;
        for (std::size_t rep = 0; rep < R; ++rep) row.rejections += static_cast<std::size_t>(rejected[i * R + rep]);
        const double rate = static_cast<double>(row.rejections) / static_cast<double>(R);
        row.error = cells[i].model == ModelKind::admixture ? rate : 1.0 - rate;
        row.mc_stderr = std::sqrt(row.error * (1.0 - row.error) / static_cast<double>(R));
        result.rows.push_back(row);
    }
    return result;
}

// ---------------------------------------------------------------------------
// CLT coverage
// ---------------------------------------------------------------------------

struct PointEstimate {
    std::vector<double> theta;   // (q_1..q_K, r)
    std::vector<double> se;      // standard errors, same order
    bool boundary = false;
};

using Estimator = std::function<PointEstimate(const SimulationResult&)>;

struct CoverageConfig {
    std::vector<double> q0{0.6, 0.4};
    double r0 = 1.0;
    double d = 1.0;
    std::size_t markers = 2000;
    std::size_t replicates = 200;
    std::uint64_t seed = 0;
    double z = 1.959963984540054;  // two-sided 95%
    FitOptions fit;
    Estimator estimator;           // default: fit_linkage + covariance_mle
    unsigned workers = 0;
};

struct CoverageResult {
    std::vector<std::string> labels;   // q1..qK, r
    std::vector<double> coverage;
    std::vector<double> mean_width;
    std::vector<double> theta0;
    std::size_t replicates = 0;
    std::size_t used = 0;              // replicates with an interior estimate
    std::size_t boundary = 0;
};

inline PointEstimate linkage_estimate(const SimulationResult& s, const FitOptions& options) {
    const LikelihoodModel model(s.data, s.freqs, s.map, options.emission);
    const auto fit = fit_linkage(model, options);
    PointEstimate est;
    est.theta = fit.theta_hat.q;
    est.theta.push_back(fit.theta_hat.r);
    est.boundary = fit.boundary();
    if (est.boundary) return est;
    const auto cov = covariance_mle(fit, model);
    for (Eigen::Index i = 0; i < cov.natural.rows(); ++i) est.se.push_back(std::sqrt(std::max(0.0, cov.natural(i, i))));
    est.boundary = !cov.reliable;
    return est;
}

inline CoverageResult coverage_experiment(const CoverageConfig& config) {
    const std::size_t K = config.q0.size();
    CoverageResult result;
    result.theta0 = config.q0;
    result.theta0.push_back(config.r0);
    for (std::size_t k = 0; k < K; ++k) result.labels.push_back("q" + std::to_string(k + 1));
    result.labels.push_back("r");
    result.replicates = config.replicates;
    const std::size_t P = K + 1;
    result.coverage.assign(P, 0.0);
    result.mean_width.assign(P, 0.0);
    if (config.replicates == 0) return result;

    const Estimator estimator =
        config.estimator ? config.estimator : [&](const SimulationResult& s) { return linkage_estimate(s, config.fit); };
    std::vector<PointEstimate> estimates(config.replicates);
    parallel_for(
        config.replicates,
        [&](std::size_t rep) {
            SimulationConfig sim;
            sim.K = K;
            sim.q0 = config.q0;
            sim.r0 = config.r0;
            sim.distance = config.d;
            sim.markers_per_chromosome = {config.markers};
            sim.emission = config.fit.emission;
            sim.seed = config.seed;
            sim.stream = replicate_stream(1, rep);
            estimates[rep] = estimator(simulate_linkage(sim));
        },
        config.workers);

    std::vector<std::size_t> hits(P, 0);
    for (const auto& est : estimates) {
        if (est.boundary || est.se.size() != P) {
            ++result.boundary;
            continue;
        }
        ++result.used;
        for (std::size_t i = 0; i < P; ++i) {
            const double half = config.z * est.se[i];
            if (std::abs(est.theta[i] - result.theta0[i]) <= half) ++hits[i];
            result.mean_width[i] += 2.0 * half;
        }
    }
    if (result.used > 0)
        for (std::size_t i = 0; i < P; ++i) {
            result.coverage[i] = static_cast<double>(hits[i]) / static_cast<double>(result.used);
            result.mean_width[i] /= static_cast<double>(result.used);
        }
    return result;
}

inline void write_csv(std::ostream& os, const CoverageResult& result) {
    os << "parameter,theta0,coverage,mean_width,replicates,used,boundary\n";
    for (std::size_t i = 0; i < result.labels.size(); ++i)
        os << result.labels[i] << ',' << format_double(result.theta0[i]) << ',' << format_double(result.coverage[i])
           << ',' << format_double(result.mean_width[i]) << ',' << result.replicates << ',' << result.used << ','
           << result.boundary << '\n';
}

// ---------------------------------------------------------------------------
// Consistency
// ---------------------------------------------------------------------------

struct ConsistencyConfig {
    std::vector<double> q0{0.6, 0.4};
    double r0 = 1.0;
    double d = 1.0;
    std::vector<std::size_t> marker_schedule{250, 1000, 4000};
    std::size_t replicates = 50;
    std::uint64_t seed = 0;
    FitOptions fit;
    unsigned workers = 0;
};

struct ConsistencyRow {
    std::size_t markers = 0;
    std::size_t replicates = 0;
    double median_abs_error_q1 = 0.0;
    double median_abs_error_r = 0.0;   // NaN when r0 is infinite
    double fraction_r_large = 0.0;     // r_hat infinite or > 100
};

namespace detail {
inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
} // namespace detail

inline std::vector<ConsistencyRow> consistency_experiment(const ConsistencyConfig& config) {
    for (std::size_t level = 1; level < config.marker_schedule.size(); ++level)
        if (config.marker_schedule[level] <= config.marker_schedule[level - 1])
            throw ConfigError("marker schedule must be increasing");
    std::vector<ConsistencyRow> table;
    for (std::size_t level = 0; level < config.marker_schedule.size(); ++level) {
        const std::size_t M = config.marker_schedule[level];
        std::vector<ParameterPoint> fits(config.replicates);
        parallel_for(
            config.replicates,
            [&](std::size_t rep) {
                SimulationConfig sim;
                sim.K = config.q0.size();
                sim.q0 = config.q0;
                sim.r0 = config.r0;
                sim.distance = config.d;
                sim.markers_per_chromosome = {M};
                sim.emission = config.fit.emission;
                sim.seed = config.seed;
                sim.stream = replicate_stream(2 + level, rep);
                const auto s = simulate_linkage(sim);
                fits[rep] = fit_linkage(s.data, s.freqs, s.map, config.fit).theta_hat;
            },
            config.workers);
        ConsistencyRow row;
        row.markers = M;
        row.replicates = config.replicates;
        std::vector<double> eq, er;
        std::size_t large = 0;
        for (const auto& t : fits) {
            eq.push_back(std::abs(t.q[0] - config.q0[0]));
            if (!std::isinf(config.r0)) er.push_back(std::isinf(t.r) ? kInfinity : std::abs(t.r - config.r0));
            if (t.is_admixture() || t.r > 100.0) ++large;
        }
        row.median_abs_error_q1 = detail::median(eq);
        row.median_abs_error_r = detail::median(er);
        row.fraction_r_large = config.replicates ? static_cast<double>(large) / static_cast<double>(config.replicates) : 0.0;
        table.push_back(row);
    }
    return table;
}

inline void write_csv(std::ostream& os, const std::vector<ConsistencyRow>& table) {
    os << "markers,replicates,median_abs_error_q1,median_abs_error_r,fraction_r_large\n";
    for (const auto& row : table)
        os << row.markers << ',' << row.replicates << ',' << format_double(row.median_abs_error_q1) << ','
           << format_double(row.median_abs_error_r) << ',' << format_double(row.fraction_r_large) << '\n';
}

// ---------------------------------------------------------------------------
// Null calibration of Lambda
// ---------------------------------------------------------------------------

// Asymptotic Kolmogorov distribution: P(sqrt(n) D > t).
inline double kolmogorov_sf(double t) {
    if (t <= 0.0) return 1.0;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * t * t);
        sum += (j % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

// One-sample KS distance for a reference CDF that may have atoms;
// cdf_left(x) = F(x-).
template <class Cdf, class CdfLeft>
KsResult ks_test(std::vector<double> sample, Cdf cdf, CdfLeft cdf_left) {
    KsResult ks;
    const std::size_t n = sample.size();
    if (n == 0) return ks;
    std::sort(sample.begin(), sample.end());
    double D = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && sample[j] == sample[i]) ++j;
        const double below = static_cast<double>(i) / static_cast<double>(n);
        const double upto = static_cast<double>(j) / static_cast<double>(n);
        D = std::max({D, std::abs(upto - cdf(sample[i])), std::abs(below - cdf_left(sample[i]))});
        i = j;
    }
    ks.statistic = D;
    const double sn = std::sqrt(static_cast<double>(n));
    ks.p_value = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * D);
    return ks;
}

inline double mixture_cdf(double x) { return x < 0.0 ? 0.0 : 0.5 + 0.5 * chi2_cdf(x); }
inline double mixture_cdf_left(double x) { return x <= 0.0 ? 0.0 : mixture_cdf(x); }
inline double mixture_quantile(double p) { return p <= 0.5 ? 0.0 : chi2_quantile(2.0 * p - 1.0); }

struct NullCalibrationConfig {
    std::size_t markers = 200;
    std::size_t replicates = 500;
    double d = 1.0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::size_t K = 2;
    std::vector<double> q0{0.5, 0.5};
    FitOptions fit;
    unsigned workers = 0;
};

struct QuantileRow {
    double probability;
    double empirical;
    double chi2;
    double mixture;
};

struct NullCalibrationResult {
    std::vector<double> lambdas;
    std::size_t rejections = 0;
    double rejection_rate = 0.0;
    KsResult ks_chi2;
    KsResult ks_mixture;
    std::vector<QuantileRow> quantiles;
};

inline double empirical_quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline NullCalibrationResult null_calibration(const NullCalibrationConfig& config) {
    NullCalibrationResult result;
    result.lambdas.assign(config.replicates, 0.0);
    std::vector<char> rejected(config.replicates, 0);
    parallel_for(
        config.replicates,
        [&](std::size_t rep) {
            SimulationConfig sim;
            sim.K = config.K;
            sim.q0 = config.q0;
            sim.r0 = kInfinity;
            sim.distance = config.d;
            sim.markers_per_chromosome = {config.markers};
            sim.emission = config.fit.emission;
            sim.seed = config.seed;
            sim.stream = replicate_stream(100, rep);
            const auto s = simulate_admixture(sim);
            const auto t = run_test(s.data, s.freqs, s.map, config.alpha, config.fit);
            result.lambdas[rep] = t.lambda;
            rejected[rep] = t.reject ? 1 : 0;
        },
        config.workers);
    if (config.replicates == 0) return result;
    for (char r : rejected) result.rejections += static_cast<std::size_t>(r);
    result.rejection_rate = static_cast<double>(result.rejections) / static_cast<double>(config.replicates);
    result.ks_chi2 = ks_test(
        result.lambdas, [](double x) { return x < 0.0 ? 0.0 : chi2_cdf(x); },
        [](double x) { return x < 0.0 ? 0.0 : chi2_cdf(x); });
    result.ks_mixture = ks_test(result.lambdas, mixture_cdf, mixture_cdf_left);
    for (double p : {0.5, 0.9, 0.95, 0.99})
        result.quantiles.push_back({p, empirical_quantile(result.lambdas, p), chi2_quantile(p), mixture_quantile(p)});
    return result;
}

} // namespace linkmix
