#pragma once

#include <linkmix/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace linkmix {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Observation codes. Alleles are stored as int8 with -1 marking a missing call.
inline constexpr int kMissing = -1;

enum class EmissionMode {
    standard,      // P(X=1 | Z=k) = p_k
    paper_literal  // P(X=1 | Z=k) = q_k * p_k
};

enum class Ploidy { haploid, phased_diploid };

inline std::string to_string(EmissionMode mode) {
    return mode == EmissionMode::standard ? "standard" : "paper-literal";
}

inline EmissionMode parse_emission_mode(const std::string& s) {
    if (s == "standard") return EmissionMode::standard;
    if (s == "paper-literal") return EmissionMode::paper_literal;
    throw ConfigError("unknown emission mode '" + s + "'");
}

inline constexpr double kSimplexTolerance = 1e-12;

inline void check_simplex(std::span<const double> q) {
    if (q.size() < 1) throw InvalidParameter("ancestry vector is empty");
    double sum = 0.0;
    for (double v : q) {
        if (!(v >= 0.0) || v > 1.0) throw InvalidParameter("ancestry proportion outside [0,1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance)
        throw InvalidParameter("ancestry proportions do not sum to 1");
}

// A point of the parameter space: ancestry proportions q on the simplex and
// the recombination rate r in [0, inf]. r == kInfinity is the Admixture Model.
struct ParameterPoint {
    std::vector<double> q;
    double r = kInfinity;

    std::size_t K() const { return q.size(); }
    bool is_admixture() const { return std::isinf(r); }

    void validate() const {
        check_simplex(q);
        if (std::isnan(r) || r < 0.0) throw InvalidParameter("recombination rate must be >= 0 or infinity");
    }
};

// Chromosome and marker labels shared by all input files of one dataset.
struct MarkerLayout {
    std::vector<std::string> chromosomes;
    std::vector<std::vector<std::string>> markers;

    std::size_t num_chromosomes() const { return chromosomes.size(); }
    std::size_t num_markers(std::size_t c) const { return markers.at(c).size(); }
    std::size_t total_markers() const {
        std::size_t n = 0;
        for (const auto& m : markers) n += m.size();
        return n;
    }

    // Labels "1".."C" and "1".."M_c".
    static MarkerLayout numbered(std::span<const std::size_t> markers_per_chromosome) {
        MarkerLayout layout;
        for (std::size_t c = 0; c < markers_per_chromosome.size(); ++c) {
            layout.chromosomes.push_back(std::to_string(c + 1));
            std::vector<std::string> names;
            for (std::size_t m = 0; m < markers_per_chromosome[c]; ++m) names.push_back(std::to_string(m + 1));
            layout.markers.push_back(std::move(names));
        }
        return layout;
    }

    bool operator==(const MarkerLayout&) const = default;
};

// Distances d_{c,m} (centiMorgan) between marker m-1 and m. Entry 0 of every
// chromosome is stored as 0 and never read: chains restart from q.
class GeneticMap {
public:
    GeneticMap() = default;

    explicit GeneticMap(std::vector<std::vector<double>> distances, MarkerLayout layout = {})
        : distances_(std::move(distances)), layout_(std::move(layout)) {
        if (layout_.chromosomes.empty()) {
            std::vector<std::size_t> counts;
            for (const auto& d : distances_) counts.push_back(d.size());
            layout_ = MarkerLayout::numbered(counts);
        }
        if (layout_.num_chromosomes() != distances_.size())
            throw StructuralError("map layout and distance table disagree on chromosome count");
        for (std::size_t c = 0; c < distances_.size(); ++c) {
            if (distances_[c].empty()) throw InvalidMap("chromosome without markers in genetic map");
            if (layout_.num_markers(c) != distances_[c].size())
                throw StructuralError("map layout and distance table disagree on marker count");
            distances_[c][0] = 0.0;
            for (double d : distances_[c])
                if (!(d >= 0.0) || !std::isfinite(d)) throw InvalidMap("genetic distance must be finite and >= 0");
        }
    }

    // C chromosomes of M markers each, all spaced d apart.
    static GeneticMap uniform(std::size_t chromosomes, std::size_t markers, double d) {
        return GeneticMap(std::vector<std::vector<double>>(chromosomes, std::vector<double>(markers, d)));
    }

    std::size_t num_chromosomes() const { return distances_.size(); }
    std::size_t num_markers(std::size_t c) const { return distances_.at(c).size(); }
    std::span<const double> distances(std::size_t c) const { return distances_.at(c); }
    double distance(std::size_t c, std::size_t m) const { return distances_.at(c).at(m); }
    const MarkerLayout& layout() const { return layout_; }

private:
    std::vector<std::vector<double>> distances_;
    MarkerLayout layout_;
};

// p_{c,k,m}: frequency of allele 1 in population k. Values are clamped into
// [lower, upper] at construction; the number of clamped entries is kept.
class AlleleFrequencySet {
public:
    static constexpr double kDefaultLowerBound = 1e-6;

    AlleleFrequencySet() = default;

    // frequencies[c][m][k]
    AlleleFrequencySet(const std::vector<std::vector<std::vector<double>>>& frequencies,
                       std::vector<std::string> population_names = {},
                       MarkerLayout layout = {},
                       double lower = kDefaultLowerBound,
                       double upper = 1.0 - kDefaultLowerBound)
        : population_names_(std::move(population_names)), layout_(std::move(layout)), lower_(lower), upper_(upper) {
        if (!(lower > 0.0 && lower < upper && upper < 1.0))
            throw InvalidParameter("frequency clamp bounds must satisfy 0 < lower < upper < 1");
        if (frequencies.empty()) throw InvalidInput("frequency table is empty");
        K_ = frequencies.front().empty() ? 0 : frequencies.front().front().size();
        if (K_ < 1) throw InvalidInput("frequency table has no populations");
        std::vector<std::size_t> counts;
        for (const auto& chrom : frequencies) {
            if (chrom.empty()) throw InvalidInput("chromosome without markers in frequency table");
            counts.push_back(chrom.size());
            std::vector<double> flat;
            flat.reserve(chrom.size() * K_);
            for (const auto& column : chrom) {
                if (column.size() != K_) throw StructuralError("ragged frequency table");
                for (double p : column) {
                    if (!std::isfinite(p) || p < 0.0 || p > 1.0)
                        throw InvalidInput("allele frequency outside [0,1]");
                    double clamped = std::clamp(p, lower_, upper_);
                    if (clamped != p) ++clamped_count_;
                    flat.push_back(clamped);
                }
            }
            values_.push_back(std::move(flat));
        }
        if (population_names_.empty())
            for (std::size_t k = 0; k < K_; ++k) population_names_.push_back("pop" + std::to_string(k + 1));
        if (population_names_.size() != K_) throw StructuralError("population name count differs from K");
        if (layout_.chromosomes.empty()) layout_ = MarkerLayout::numbered(counts);
        if (layout_.num_chromosomes() != values_.size())
            throw StructuralError("frequency layout and table disagree on chromosome count");
        for (std::size_t c = 0; c < values_.size(); ++c)
            if (layout_.num_markers(c) != counts[c])
                throw StructuralError("frequency layout and table disagree on marker count");
    }

    std::size_t K() const { return K_; }
    std::size_t num_chromosomes() const { return values_.size(); }
    std::size_t num_markers(std::size_t c) const { return values_.at(c).size() / K_; }
    std::span<const double> column(std::size_t c, std::size_t m) const {
        return std::span<const double>(values_.at(c)).subspan(m * K_, K_);
    }
    double at(std::size_t c, std::size_t k, std::size_t m) const { return values_.at(c).at(m * K_ + k); }
    std::size_t clamped_count() const { return clamped_count_; }
    double lower_bound() const { return lower_; }
    double upper_bound() const { return upper_; }
    const std::vector<std::string>& population_names() const { return population_names_; }
    const MarkerLayout& layout() const { return layout_; }

private:
    std::size_t K_ = 0;
    std::vector<std::vector<double>> values_;  // [c][m*K + k]
    std::vector<std::string> population_names_;
    MarkerLayout layout_;
    double lower_ = kDefaultLowerBound;
    double upper_ = 1.0 - kDefaultLowerBound;
    std::size_t clamped_count_ = 0;
};

// Observed alleles of one individual. Haploid data has one track, phased
// diploid data two; tracks[t][c][m] is 0, 1 or kMissing.
class GenotypeData {
public:
    using Track = std::vector<std::vector<std::int8_t>>;

    GenotypeData() = default;

    GenotypeData(Ploidy ploidy, std::vector<Track> tracks) : ploidy_(ploidy), tracks_(std::move(tracks)) {
        const std::size_t expected = ploidy_ == Ploidy::haploid ? 1 : 2;
        if (tracks_.size() != expected) throw StructuralError("track count does not match ploidy");
        for (const auto& track : tracks_) {
            if (track.size() != tracks_.front().size()) throw StructuralError("tracks differ in chromosome count");
            for (std::size_t c = 0; c < track.size(); ++c) {
                if (track[c].size() != tracks_.front()[c].size())
                    throw StructuralError("tracks differ in marker count");
                for (auto x : track[c])
                    if (x != 0 && x != 1 && x != kMissing) throw InvalidGenotype("allele code must be 0, 1 or missing");
            }
        }
    }

    static GenotypeData haploid(Track track) { return GenotypeData(Ploidy::haploid, {std::move(track)}); }

    Ploidy ploidy() const { return ploidy_; }
    std::size_t num_tracks() const { return tracks_.size(); }
    std::size_t num_chromosomes() const { return tracks_.empty() ? 0 : tracks_.front().size(); }
    std::size_t num_markers(std::size_t c) const { return tracks_.front().at(c).size(); }
    const Track& track(std::size_t t) const { return tracks_.at(t); }

    // Marker count summed over chromosomes, not over tracks.
    std::size_t m_total() const {
        std::size_t n = 0;
        for (std::size_t c = 0; c < num_chromosomes(); ++c) n += num_markers(c);
        return n;
    }

    std::size_t observed_count() const {
        std::size_t n = 0;
        for (const auto& track : tracks_)
            for (const auto& chrom : track)
                n += static_cast<std::size_t>(std::count_if(chrom.begin(), chrom.end(), [](auto x) { return x != kMissing; }));
        return n;
    }

    // The single-track view of track t.
    GenotypeData haploid_track(std::size_t t) const { return haploid(tracks_.at(t)); }

    bool operator==(const GenotypeData&) const = default;

private:
    Ploidy ploidy_ = Ploidy::haploid;
    std::vector<Track> tracks_;
};

// Compact-box constants of the parameter space and data regularity bounds.
struct AssumptionConfig {
    double kappa_q = 1e-4;
    double kappa_q_upper = 1.0 - 1e-4;
    double kappa_p = AlleleFrequencySet::kDefaultLowerBound;
    double kappa_p_upper = 1.0 - AlleleFrequencySet::kDefaultLowerBound;
    double r_lower = 0.01;
    double kappa_d = 0.01;

    void validate() const {
        if (!(0.0 < kappa_q && kappa_q < kappa_q_upper && kappa_q_upper < 1.0))
            throw ConfigError("need 0 < kappa_q < kappa_q' < 1");
        if (!(0.0 < kappa_p && kappa_p < kappa_p_upper && kappa_p_upper < 1.0))
            throw ConfigError("need 0 < kappa_p < kappa_p' < 1");
        if (!(r_lower >= 0.0)) throw ConfigError("need r_lb >= 0");
        if (!(kappa_d > 0.0)) throw ConfigError("need kappa_d > 0");
    }
};

// Throws StructuralError unless genotypes, frequencies and map agree on layout.
inline void check_consistent(const GenotypeData& data, const AlleleFrequencySet& freqs) {
    if (data.num_chromosomes() == 0) throw InvalidInput("genotype data is empty");
    if (data.num_chromosomes() != freqs.num_chromosomes())
        throw StructuralError("genotypes and frequencies disagree on chromosome count");
    for (std::size_t c = 0; c < data.num_chromosomes(); ++c)
        if (data.num_markers(c) != freqs.num_markers(c))
            throw StructuralError("genotypes and frequencies disagree on marker count of chromosome " +
                                  std::to_string(c + 1));
}

inline void check_consistent(const GenotypeData& data, const AlleleFrequencySet& freqs, const GeneticMap& map) {
    check_consistent(data, freqs);
    if (data.num_chromosomes() != map.num_chromosomes())
        throw StructuralError("genotypes and map disagree on chromosome count");
    for (std::size_t c = 0; c < data.num_chromosomes(); ++c)
        if (data.num_markers(c) != map.num_markers(c))
            throw StructuralError("genotypes and map disagree on marker count of chromosome " + std::to_string(c + 1));
}

} // namespace linkmix
