#pragma once

#include <linkmix/model.hpp>
#include <linkmix/types.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace linkmix {

struct LikelihoodResult {
    double ell = 0.0;                 // log P(x) / M_total
    std::vector<double> per_marker;   // D_{c,m}, in (c, m) order, summed over tracks
    std::size_t m_total = 0;

    double total() const { return ell * static_cast<double>(m_total); }
};

// Genotypes, frequencies and map flattened for repeated likelihood
// evaluation at many parameter points. Owns copies of everything it needs.
class LikelihoodModel {
public:
    LikelihoodModel(const GenotypeData& data, const AlleleFrequencySet& freqs, const GeneticMap& map,
                    EmissionMode mode = EmissionMode::standard)
        : LikelihoodModel(data, freqs, mode) {
        check_consistent(data, freqs, map);
        has_map_ = true;
        distances_.reserve(chrom_offset_.back());
        for (std::size_t c = 0; c < map.num_chromosomes(); ++c)
            for (double d : map.distances(c)) distances_.push_back(d);
    }

    // Map-less model; only r = infinity may be evaluated.
    LikelihoodModel(const GenotypeData& data, const AlleleFrequencySet& freqs,
                    EmissionMode mode = EmissionMode::standard)
        : K_(freqs.K()), mode_(mode), m_total_(data.m_total()) {
        check_consistent(data, freqs);
        if (m_total_ == 0) throw InvalidInput("genotype data has no markers");
        chrom_offset_.push_back(0);
        for (std::size_t c = 0; c < data.num_chromosomes(); ++c)
            chrom_offset_.push_back(chrom_offset_.back() + data.num_markers(c));
        freqs_.reserve(m_total_ * K_);
        for (std::size_t c = 0; c < freqs.num_chromosomes(); ++c)
            for (std::size_t m = 0; m < freqs.num_markers(c); ++m)
                for (double p : freqs.column(c, m)) freqs_.push_back(p);
        for (std::size_t t = 0; t < data.num_tracks(); ++t) {
            std::vector<std::int8_t> flat;
            flat.reserve(m_total_);
            for (const auto& chrom : data.track(t)) flat.insert(flat.end(), chrom.begin(), chrom.end());
            tracks_.push_back(std::move(flat));
        }
        observed_ = data.observed_count();
    }

    std::size_t K() const { return K_; }
    std::size_t m_total() const { return m_total_; }
    std::size_t observed_count() const { return observed_; }
    EmissionMode mode() const { return mode_; }
    bool has_map() const { return has_map_; }

    // Unnormalized log P(x) under the Linkage Model; r = infinity gives the
    // Admixture Model. Scaled forward recursion without per-marker output.
    double log_likelihood(std::span<const double> q, double r) const {
        check_point(q, r);
        if (std::isinf(r)) return admixture_log_likelihood(q);
        std::vector<double> alpha(K_), e(K_);
        double log_sum = 0.0;
        for (const auto& track : tracks_) {
            double scale = 1.0;
            for (std::size_t c = 0; c + 1 < chrom_offset_.size(); ++c) {
                std::copy(q.begin(), q.end(), alpha.begin());
                for (std::size_t i = chrom_offset_[c]; i < chrom_offset_[c + 1]; ++i) {
                    if (i > chrom_offset_[c]) predict(alpha, q, stay_probability(r, distances_[i]));
                    if (track[i] == kMissing) continue;
                    emission(track[i], i, q, e);
                    double s = 0.0;
                    for (std::size_t k = 0; k < K_; ++k) s += (alpha[k] *= e[k]);
                    for (std::size_t k = 0; k < K_; ++k) alpha[k] /= s;
                    scale *= s;
                    if (scale < 1e-280) {
                        log_sum += std::log(scale);
                        scale = 1.0;
                    }
                }
            }
            log_sum += std::log(scale);
        }
        return log_sum;
    }

    double ell(std::span<const double> q, double r) const {
        return log_likelihood(q, r) / static_cast<double>(m_total_);
    }

    // Full result with the per-marker predictive log terms
    // D_m = log sum_k P(Z_m = k | x_1..x_{m-1}) P(x_m | Z_m = k).
    LikelihoodResult evaluate(std::span<const double> q, double r) const {
        check_point(q, r);
        LikelihoodResult result;
        result.m_total = m_total_;
        result.per_marker.assign(m_total_, 0.0);
        std::vector<double> alpha(K_), e(K_);
        for (const auto& track : tracks_) {
            for (std::size_t c = 0; c + 1 < chrom_offset_.size(); ++c) {
                std::copy(q.begin(), q.end(), alpha.begin());
                for (std::size_t i = chrom_offset_[c]; i < chrom_offset_[c + 1]; ++i) {
                    if (i > chrom_offset_[c]) predict(alpha, q, stay_probability(r, distances_.empty() ? 0.0 : distances_[i]));
                    if (track[i] == kMissing) continue;
                    emission(track[i], i, q, e);
                    double s = 0.0;
                    for (std::size_t k = 0; k < K_; ++k) s += (alpha[k] *= e[k]);
                    for (std::size_t k = 0; k < K_; ++k) alpha[k] /= s;
                    result.per_marker[i] += std::log(s);
                }
            }
        }
        double sum = 0.0;
        for (double d : result.per_marker) sum += d;
        result.ell = sum / static_cast<double>(m_total_);
        return result;
    }

    double admixture_log_likelihood(std::span<const double> q) const {
        std::vector<double> e(K_);
        double log_sum = 0.0;
        for (const auto& track : tracks_) {
            double scale = 1.0;
            for (std::size_t i = 0; i < m_total_; ++i) {
                if (track[i] == kMissing) continue;
                emission(track[i], i, q, e);
                double s = 0.0;
                for (std::size_t k = 0; k < K_; ++k) s += q[k] * e[k];
                scale *= s;
                if (scale < 1e-280) {
                    log_sum += std::log(scale);
                    scale = 1.0;
                }
            }
            log_sum += std::log(scale);
        }
        return log_sum;
    }

private:
    void check_point(std::span<const double> q, double r) const {
        if (q.size() != K_) throw StructuralError("ancestry vector length differs from K");
        if (std::isnan(r) || r < 0.0) throw InvalidParameter("recombination rate must be >= 0 or infinity");
        if (!std::isinf(r) && !has_map_) throw InvalidInput("finite r requires a genetic map");
    }

    // One step of the chain: alpha <- alpha T with T = stay I + (1 - stay) 1 q^T.
    // alpha is normalized, so the rank-one part contributes (1 - stay) q.
    void predict(std::vector<double>& alpha, std::span<const double> q, double stay) const {
        for (std::size_t k = 0; k < K_; ++k) alpha[k] = stay * alpha[k] + (1.0 - stay) * q[k];
    }

    void emission(int x, std::size_t i, std::span<const double> q, std::vector<double>& e) const {
        const double* p = freqs_.data() + i * K_;
        for (std::size_t k = 0; k < K_; ++k) {
            const double success = mode_ == EmissionMode::standard ? p[k] : q[k] * p[k];
            e[k] = x == 1 ? success : 1.0 - success;
        }
    }

    std::size_t K_;
    EmissionMode mode_;
    std::size_t m_total_;
    std::size_t observed_ = 0;
    bool has_map_ = false;
    std::vector<std::size_t> chrom_offset_;
    std::vector<double> freqs_;        // [i*K + k], i = flat marker index
    std::vector<double> distances_;    // [i]
    std::vector<std::vector<std::int8_t>> tracks_;
};

inline LikelihoodResult forward_loglik(const GenotypeData& data, const AlleleFrequencySet& freqs,
                                       const GeneticMap& map, const ParameterPoint& theta,
                                       EmissionMode mode = EmissionMode::standard) {
    theta.validate();
    return LikelihoodModel(data, freqs, map, mode).evaluate(theta.q, theta.r);
}

// Closed form of the r = infinity special case: markers are independent with
// P(x_m = 1) = sum_k q_k P(x=1 | Z=k), which is <q, p_m> under the standard emission.
inline LikelihoodResult admixture_loglik(const GenotypeData& data, const AlleleFrequencySet& freqs,
                                         std::span<const double> q, EmissionMode mode = EmissionMode::standard) {
    check_simplex(q);
    LikelihoodModel model(data, freqs, mode);
    if (q.size() != model.K()) throw StructuralError("ancestry vector length differs from K");
    LikelihoodResult result;
    result.m_total = data.m_total();
    result.per_marker.assign(result.m_total, 0.0);
    for (std::size_t t = 0; t < data.num_tracks(); ++t) {
        std::size_t i = 0;
        for (std::size_t c = 0; c < data.num_chromosomes(); ++c) {
            for (std::size_t m = 0; m < data.num_markers(c); ++m, ++i) {
                const int x = data.track(t)[c][m];
                if (x == kMissing) continue;
                const auto e = emission_vector(x, freqs.column(c, m), q, mode);
                double s = 0.0;
                for (std::size_t k = 0; k < q.size(); ++k) s += q[k] * e[k];
                result.per_marker[i] += std::log(s);
            }
        }
    }
    double sum = 0.0;
    for (double d : result.per_marker) sum += d;
    result.ell = sum / static_cast<double>(result.m_total);
    return result;
}

// Exact marginal likelihood by summing over every hidden state sequence.
// Test oracle only; refuses inputs with more than 12 markers or K > 3.
inline LikelihoodResult brute_force_loglik(const GenotypeData& data, const AlleleFrequencySet& freqs,
                                           const GeneticMap& map, const ParameterPoint& theta,
                                           EmissionMode mode = EmissionMode::standard) {
    theta.validate();
    check_consistent(data, freqs, map);
    const std::size_t K = freqs.K();
    const std::size_t M = data.m_total();
    if (M > 12 || K > 3) throw RefuseToRun("brute-force likelihood limited to 12 markers and K <= 3");
    if (theta.K() != K) throw StructuralError("ancestry vector length differs from K");

    struct Site {
        std::size_t c, m;
        bool chrom_start;
    };
    std::vector<Site> sites;
    for (std::size_t c = 0; c < data.num_chromosomes(); ++c)
        for (std::size_t m = 0; m < data.num_markers(c); ++m) sites.push_back({c, m, m == 0});

    // P(x_1..x_n) for the prefix of length n of one track.
    auto prefix_probability = [&](const GenotypeData::Track& track, std::size_t n) {
        std::vector<std::size_t> path(n, 0);
        double total = 0.0;
        while (true) {
            double prob = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const auto& s = sites[i];
                const std::size_t z = path[i];
                if (s.chrom_start) {
                    prob *= theta.q[z];
                } else {
                    const double stay = stay_probability(theta.r, map.distance(s.c, s.m));
                    prob *= (1.0 - stay) * theta.q[z] + (path[i - 1] == z ? stay : 0.0);
                }
                const int x = track[s.c][s.m];
                if (x != kMissing) {
                    const double p = freqs.at(s.c, z, s.m);
                    const double success = mode == EmissionMode::standard ? p : theta.q[z] * p;
                    prob *= x == 1 ? success : 1.0 - success;
                }
            }
            total += prob;
            std::size_t i = 0;
            while (i < n && ++path[i] == K) path[i++] = 0;
            if (i == n) break;
        }
        return total;
    };

    LikelihoodResult result;
    result.m_total = M;
    result.per_marker.assign(M, 0.0);
    for (std::size_t t = 0; t < data.num_tracks(); ++t) {
        double previous = 0.0;  // log P of the empty prefix
        for (std::size_t n = 1; n <= M; ++n) {
            const double current = std::log(prefix_probability(data.track(t), n));
            result.per_marker[n - 1] += current - previous;
            previous = current;
        }
    }
    double sum = 0.0;
    for (double d : result.per_marker) sum += d;
    result.ell = sum / static_cast<double>(M);
    return result;
}

} // namespace linkmix
