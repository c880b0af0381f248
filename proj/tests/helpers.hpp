#pragma once

// Random small instances shared by the unit tests and the acceptance binary.

#include <linkmix/random.hpp>
#include <linkmix/types.hpp>

#include <cstdint>
#include <vector>

namespace linkmix::testing {

struct Instance {
    GenotypeData data;
    AlleleFrequencySet freqs;
    GeneticMap map;
    ParameterPoint theta;
};

inline std::vector<double> random_simplex(Philox& rng, std::size_t K) { return rng.dirichlet_ones(K); }

// Random haploid (or diploid) instance with the given marker counts. A
// `missing_rate` fraction of sites is set to kMissing.
inline Instance random_instance(Philox& rng, std::size_t K, const std::vector<std::size_t>& markers,
                                Ploidy ploidy = Ploidy::haploid, double missing_rate = 0.0) {
    std::vector<std::vector<std::vector<double>>> freq;
    std::vector<std::vector<double>> dist;
    for (auto M : markers) {
        std::vector<std::vector<double>> chrom(M, std::vector<double>(K));
        for (auto& col : chrom)
            for (auto& p : col) p = rng.uniform(0.02, 0.98);
        freq.push_back(std::move(chrom));
        std::vector<double> d(M);
        for (auto& v : d) v = rng.uniform(0.0, 3.0);
        dist.push_back(std::move(d));
    }
    const std::size_t tracks = ploidy == Ploidy::haploid ? 1 : 2;
    std::vector<GenotypeData::Track> obs(tracks);
    for (auto& track : obs)
        for (auto M : markers) {
            std::vector<std::int8_t> chrom(M);
            for (auto& x : chrom)
                x = rng.uniform() < missing_rate ? static_cast<std::int8_t>(kMissing)
                                                 : static_cast<std::int8_t>(rng.uniform() < 0.5);
            track.push_back(std::move(chrom));
        }
    ParameterPoint theta{random_simplex(rng, K), std::exp(rng.uniform(-3.0, 3.0))};
    return {GenotypeData(ploidy, std::move(obs)), AlleleFrequencySet(freq), GeneticMap(dist), theta};
}

inline GenotypeData haploid_data(std::vector<std::vector<std::int8_t>> track) {
    return GenotypeData::haploid(std::move(track));
}

inline AlleleFrequencySet constant_frequencies(std::size_t M, std::vector<double> column) {
    return AlleleFrequencySet({std::vector<std::vector<double>>(M, column)});
}

} // namespace linkmix::testing
