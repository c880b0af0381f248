#pragma once

#include <linkmix/chi2.hpp>
#include <linkmix/inference.hpp>

#include <cmath>
#include <vector>

namespace linkmix {

// Likelihood-ratio test of H0: r = infinity (Admixture) against H1: r finite.
struct TestResult {
    double lambda = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    ModelFit null_fit;
    ModelFit alt_fit;
    std::size_t m_total = 0;
};

struct PopulationTestResult {
    double lambda = 0.0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
    PopulationFit null_fit;
    PopulationFit alt_fit;
    std::size_t m_total = 0;  // summed over individuals
};

// Tolerated negative drift of Lambda from optimizer noise before it is
// treated as an optimizer failure.
inline constexpr double kLambdaNegativeSlack = 1e-9;

namespace detail {
inline double clamp_lambda(double lambda) {
    if (lambda < -kLambdaNegativeSlack)
        throw NumericError("alternative maximum below null maximum (Lambda = " + std::to_string(lambda) + ")");
    return std::max(0.0, lambda);
}

inline void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("significance level must lie in (0,1)");
}
} // namespace detail

// Lambda = 2 M_total (ell_alt - ell_null), built from the unnormalized
// log-likelihoods and clamped at 0.
inline double lrt_statistic(const ModelFit& null_fit, const ModelFit& alt_fit, std::size_t m_total) {
    if (null_fit.m_total != m_total || alt_fit.m_total != m_total)
        throw InvalidComparison("fits were computed on data with different marker counts");
    if (alt_fit.model == ModelKind::linkage && alt_fit.theta_hat.is_admixture()) return 0.0;
    return detail::clamp_lambda(2.0 * static_cast<double>(m_total) * (alt_fit.ell_hat - null_fit.ell_hat));
}

inline TestResult assemble_test(ModelFit null_fit, ModelFit alt_fit, double alpha) {
    detail::check_alpha(alpha);
    TestResult result;
    result.m_total = null_fit.m_total;
    result.lambda = lrt_statistic(null_fit, alt_fit, result.m_total);
    result.p_value = chi2_sf(result.lambda);
    result.alpha = alpha;
    result.reject = result.lambda > chi2_quantile(1.0 - alpha);
    result.null_fit = std::move(null_fit);
    result.alt_fit = std::move(alt_fit);
    return result;
}

inline TestResult run_test(const LikelihoodModel& model, double alpha = 0.05, const FitOptions& options = {}) {
    detail::check_alpha(alpha);
    auto null_fit = fit_admixture(model, options);
    auto alt_fit = fit_linkage(model, options, null_fit);
    return assemble_test(std::move(null_fit), std::move(alt_fit), alpha);
}

inline TestResult run_test(const GenotypeData& data, const AlleleFrequencySet& freqs, const GeneticMap& map,
                           double alpha = 0.05, const FitOptions& options = {}) {
    return run_test(LikelihoodModel(data, freqs, map, options.emission), alpha, options);
}

// Population version: N independent Admixture fits against N ancestries with
// one shared r; one extra parameter, so still chi2(1).
inline PopulationTestResult run_population_test(const std::vector<GenotypeData>& individuals,
                                                const AlleleFrequencySet& freqs, const GeneticMap& map,
                                                double alpha = 0.05, const FitOptions& options = {}) {
    detail::check_alpha(alpha);
    PopulationTestResult result;
    result.null_fit = fit_population_admixture(individuals, freqs, options);
    result.alt_fit = fit_population(individuals, freqs, map, options, result.null_fit);
    result.m_total = result.null_fit.m_total;
    result.alpha = alpha;
    result.lambda = std::isinf(result.alt_fit.r_hat)
                        ? 0.0
                        : detail::clamp_lambda(2.0 * (result.alt_fit.total_log_likelihood -
                                                      result.null_fit.total_log_likelihood));
    result.p_value = chi2_sf(result.lambda);
    result.reject = result.lambda > chi2_quantile(1.0 - alpha);
    return result;
}

} // namespace linkmix
