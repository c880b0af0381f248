#pragma once

#include <linkmix/model.hpp>
#include <linkmix/random.hpp>
#include <linkmix/types.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace linkmix {

struct SimulationConfig {
    std::size_t K = 2;
    std::vector<std::size_t> markers_per_chromosome{100};
    std::vector<double> q0{0.5, 0.5};
    double r0 = 1.0;                             // kInfinity simulates the Admixture Model
    double distance = 1.0;                       // constant spacing when no map is given
    std::optional<GeneticMap> map;
    std::optional<AlleleFrequencySet> frequencies;
    double frequency_lower = 0.1;                // i.i.d. uniform frequencies when none are given
    double frequency_upper = 0.9;
    Ploidy ploidy = Ploidy::haploid;
    EmissionMode emission = EmissionMode::standard;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    void validate() const {
        if (K < 1) throw ConfigError("K must be positive");
        if (markers_per_chromosome.empty()) throw ConfigError("need at least one chromosome");
        for (auto m : markers_per_chromosome)
            if (m < 1) throw ConfigError("every chromosome needs at least one marker");
        if (q0.size() != K) throw ConfigError("q0 length differs from K");
        try {
            check_simplex(q0);
        } catch (const InvalidParameter& e) {
            throw ConfigError(std::string("q0: ") + e.what());
        }
        if (std::isnan(r0) || r0 < 0.0) throw ConfigError("r0 must be >= 0 or infinity");
        if (!(distance >= 0.0) || !std::isfinite(distance)) throw ConfigError("distance must be finite and >= 0");
        if (!(0.0 <= frequency_lower && frequency_lower <= frequency_upper && frequency_upper <= 1.0))
            throw ConfigError("need 0 <= frequency_lower <= frequency_upper <= 1");
        auto check_layout = [&](std::size_t chromosomes, auto markers_of, const char* what) {
            if (chromosomes != markers_per_chromosome.size())
                throw ConfigError(std::string(what) + " disagrees with the chromosome count");
            for (std::size_t c = 0; c < chromosomes; ++c)
                if (markers_of(c) != markers_per_chromosome[c])
                    throw ConfigError(std::string(what) + " disagrees with the marker counts");
        };
        if (map) check_layout(map->num_chromosomes(), [&](std::size_t c) { return map->num_markers(c); }, "map");
        if (frequencies) {
            if (frequencies->K() != K) throw ConfigError("frequency table K differs from config K");
            check_layout(frequencies->num_chromosomes(), [&](std::size_t c) { return frequencies->num_markers(c); },
                         "frequency table");
        }
    }
};

struct SimulationResult {
    GenotypeData data;
    AlleleFrequencySet freqs;
    GeneticMap map;
    std::vector<std::vector<std::vector<int>>> hidden;  // [track][c][m]
};

// i.i.d. uniform frequencies on [lo, hi] for every population and marker.
inline AlleleFrequencySet random_frequencies(std::size_t K, std::span<const std::size_t> markers_per_chromosome,
                                             double lo, double hi, Philox& rng) {
    std::vector<std::vector<std::vector<double>>> table;
    for (auto M : markers_per_chromosome) {
        std::vector<std::vector<double>> chrom(M, std::vector<double>(K));
        for (auto& col : chrom)
            for (auto& p : col) p = rng.uniform(lo, hi);
        table.push_back(std::move(chrom));
    }
    return AlleleFrequencySet(table);
}

namespace detail {
inline std::size_t categorical_from_uniform(double u, std::span<const double> weights) {
    double acc = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        acc += weights[k];
        if (u < acc) return k;
    }
    for (std::size_t k = weights.size(); k-- > 0;)
        if (weights[k] > 0.0) return k;
    return weights.size() - 1;
}
} // namespace detail

// Draws one individual under the Linkage Model. Random numbers are consumed
// in a fixed order from Philox(seed, stream): frequencies (when generated),
// then for every track, chromosome and marker three uniforms (jump, state,
// allele). The layout does not depend on r0, so r0 = infinity reproduces
// simulate_admixture exactly and runs at different r0 share their draws.
inline SimulationResult simulate_linkage(const SimulationConfig& config) {
    config.validate();
    Philox rng(config.seed, config.stream);
    SimulationResult out;
    out.freqs = config.frequencies ? *config.frequencies
                                   : random_frequencies(config.K, config.markers_per_chromosome,
                                                        config.frequency_lower, config.frequency_upper, rng);
    if (config.map) {
        out.map = *config.map;
    } else {
        std::vector<std::vector<double>> d;
        for (auto M : config.markers_per_chromosome) d.emplace_back(M, config.distance);
        out.map = GeneticMap(std::move(d));
    }
    const std::size_t tracks = config.ploidy == Ploidy::haploid ? 1 : 2;
    const auto& q = config.q0;
    std::vector<GenotypeData::Track> observed(tracks);
    out.hidden.assign(tracks, {});
    for (std::size_t t = 0; t < tracks; ++t) {
        for (std::size_t c = 0; c < config.markers_per_chromosome.size(); ++c) {
            const std::size_t M = config.markers_per_chromosome[c];
            std::vector<int> z(M);
            std::vector<std::int8_t> x(M);
            for (std::size_t m = 0; m < M; ++m) {
                const double u_jump = rng.uniform();
                const double u_state = rng.uniform();
                const double u_allele = rng.uniform();
                const bool fresh = m == 0 || u_jump >= stay_probability(config.r0, out.map.distance(c, m));
                z[m] = fresh ? static_cast<int>(detail::categorical_from_uniform(u_state, q)) : z[m - 1];
                const double p = out.freqs.at(c, static_cast<std::size_t>(z[m]), m);
                const double success =
                    config.emission == EmissionMode::standard ? p : q[static_cast<std::size_t>(z[m])] * p;
                x[m] = u_allele < success ? 1 : 0;
            }
            out.hidden[t].push_back(std::move(z));
            observed[t].push_back(std::move(x));
        }
    }
    out.data = GenotypeData(config.ploidy, std::move(observed));
    return out;
}

// Admixture Model: ancestry drawn independently at every marker.
inline SimulationResult simulate_admixture(SimulationConfig config) {
    config.r0 = kInfinity;
    return simulate_linkage(config);
}

} // namespace linkmix
