#pragma once

#include <linkmix/types.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace linkmix {

// e^{-d r}: probability that the ancestry chain keeps its state across a
// distance d. Zero for r = infinity whatever d is.
inline double stay_probability(double r, double d) {
    if (std::isinf(r)) return 0.0;
    return std::exp(-d * r);
}

// T = e^{-dr} I + (1 - e^{-dr}) 1 q^T. Rows index the source state, columns
// the target state.
inline Eigen::MatrixXd transition_matrix(std::span<const double> q, double r, double d) {
    check_simplex(q);
    if (!(d >= 0.0)) throw InvalidMap("negative genetic distance");
    if (std::isnan(r) || r < 0.0) throw InvalidParameter("recombination rate must be >= 0 or infinity");
    const auto K = static_cast<Eigen::Index>(q.size());
    const double stay = stay_probability(r, d);
    Eigen::MatrixXd T(K, K);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < K; ++j) T(i, j) = (1.0 - stay) * q[j] + (i == j ? stay : 0.0);
    return T;
}

// P(X = x | Z = k) for every k. A missing observation emits 1 in every state.
inline std::vector<double> emission_vector(int x, std::span<const double> p_col, std::span<const double> q,
                                           EmissionMode mode = EmissionMode::standard) {
    if (x != 0 && x != 1 && x != kMissing) throw InvalidGenotype("observation must be 0, 1 or missing");
    if (mode == EmissionMode::paper_literal && q.size() != p_col.size())
        throw StructuralError("ancestry and frequency column differ in length");
    std::vector<double> e(p_col.size(), 1.0);
    if (x == kMissing) return e;
    for (std::size_t k = 0; k < p_col.size(); ++k) {
        const double success = mode == EmissionMode::standard ? p_col[k] : q[k] * p_col[k];
        e[k] = x == 1 ? success : 1.0 - success;
    }
    return e;
}

// Second-largest eigenvalue modulus of transition_matrix(q, r, d), i.e. e^{-dr}.
inline double second_eigenvalue(std::span<const double> q, double r, double d) {
    if (q.size() < 2) throw InvalidParameter("second eigenvalue needs K >= 2");
    if (!(d >= 0.0)) throw InvalidMap("negative genetic distance");
    return stay_probability(r, d);
}

struct AssumptionReport {
    std::size_t frequency_out_of_bounds = 0;  // A2: entries outside [kappa_p, kappa_p']
    std::size_t frequency_clamped = 0;        // clamped when the frequency set was built
    std::size_t equal_frequency_markers = 0;  // A3: markers with p_k == p_l for some k != l
    std::vector<std::string> short_distances; // A5: "chrom:marker" with d < kappa_d
    double log_eigenvalue_product = 0.0;      // A4: sum of log e^{-d r_lb}
    double eigenvalue_product = 1.0;
    std::vector<std::string> warnings;

    std::size_t violation_count() const {
        return frequency_out_of_bounds + equal_frequency_markers + short_distances.size();
    }
};

// Diagnostics for the regularity conditions on frequencies, map and parameter
// box. Never throws on violations; everything lands in the report.
inline AssumptionReport validate_assumptions(const GenotypeData& data, const AlleleFrequencySet& freqs,
                                             const GeneticMap& map, const AssumptionConfig& config = {}) {
    config.validate();
    check_consistent(data, freqs, map);
    AssumptionReport report;
    report.frequency_clamped = freqs.clamped_count();
    const std::size_t K = freqs.K();
    double total_distance = 0.0;
    for (std::size_t c = 0; c < freqs.num_chromosomes(); ++c) {
        for (std::size_t m = 0; m < freqs.num_markers(c); ++m) {
            auto col = freqs.column(c, m);
            bool equal_pair = false;
            for (std::size_t k = 0; k < K; ++k) {
                if (col[k] < config.kappa_p || col[k] > config.kappa_p_upper) ++report.frequency_out_of_bounds;
                for (std::size_t l = k + 1; l < K; ++l)
                    if (col[k] == col[l]) equal_pair = true;
            }
            if (equal_pair) ++report.equal_frequency_markers;
            if (m > 0) {
                const double d = map.distance(c, m);
                total_distance += d;
                if (d < config.kappa_d)
                    report.short_distances.push_back(map.layout().chromosomes[c] + ":" + map.layout().markers[c][m]);
            }
        }
    }
    report.log_eigenvalue_product = -config.r_lower * total_distance;
    report.eigenvalue_product = std::exp(report.log_eigenvalue_product);
    if (report.frequency_clamped > 0)
        report.warnings.push_back(std::to_string(report.frequency_clamped) + " allele frequencies were clamped");
    if (report.frequency_out_of_bounds > 0)
        report.warnings.push_back(std::to_string(report.frequency_out_of_bounds) +
                                  " allele frequencies outside [kappa_p, kappa_p']");
    if (report.equal_frequency_markers > 0)
        report.warnings.push_back(std::to_string(report.equal_frequency_markers) +
                                  " markers with equal frequencies across populations");
    if (!report.short_distances.empty())
        report.warnings.push_back(std::to_string(report.short_distances.size()) +
                                  " inter-marker distances below kappa_d");
    return report;
}

} // namespace linkmix
