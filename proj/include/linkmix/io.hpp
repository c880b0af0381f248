#pragma once

#include <linkmix/types.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace linkmix::io {

// Tab-separated formats, one header line each:
//   frequencies  chrom  marker  <pop1> .. <popK>
//   map          chrom  marker  dist_cM      (first marker of a chromosome: 0, ignored)
//   genotypes    id     chrom   marker  hap1 [hap2]   alleles 0, 1 or '.'
//   labels       id     population

struct PanelDataset {
    std::vector<std::string> ids;
    std::vector<GenotypeData> individuals;
    MarkerLayout layout;

    std::size_t size() const { return ids.size(); }
    std::size_t index_of(const std::string& id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return i;
        throw InvalidInput("individual '" + id + "' not in panel");
    }
};

inline std::string format_number(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

inline double parse_number(const std::string& s, const std::string& file, std::size_t line, const char* what) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError(file, line, std::string("malformed ") + what + " '" + s + "'");
    return v;
}

// Reads all non-empty lines with their 1-based line numbers; strips '\r'.
struct Table {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

inline Table read_table(std::istream& in, const std::string& file) {
    Table t;
    t.file = file;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw ParseError(file, number, "expected " + std::to_string(t.header.size()) + " columns, found " +
                                               std::to_string(fields.size()));
        t.rows.emplace_back(number, std::move(fields));
    }
    if (t.header.empty()) throw ParseError(file, 0, "file is empty");
    return t;
}

inline Table read_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_table(in, path);
}

// Layout assembled in order of first appearance.
struct LayoutBuilder {
    MarkerLayout layout;
    std::unordered_map<std::string, std::size_t> chrom_index;
    std::map<std::pair<std::size_t, std::string>, std::size_t> marker_index;

    // Returns (c, m); throws on a repeated (chrom, marker).
    std::pair<std::size_t, std::size_t> add(const std::string& chrom, const std::string& marker,
                                            const std::string& file, std::size_t line) {
        auto [it, fresh] = chrom_index.try_emplace(chrom, layout.chromosomes.size());
        if (fresh) {
            layout.chromosomes.push_back(chrom);
            layout.markers.emplace_back();
        }
        const std::size_t c = it->second;
        const std::size_t m = layout.markers[c].size();
        if (!marker_index.try_emplace({c, marker}, m).second)
            throw ParseError(file, line, "duplicate marker " + chrom + ":" + marker);
        layout.markers[c].push_back(marker);
        return {c, m};
    }
};

inline void expect_header_prefix(const Table& t, std::initializer_list<std::string_view> names) {
    std::size_t i = 0;
    for (auto name : names) {
        if (i >= t.header.size() || t.header[i] != name)
            throw ParseError(t.file, 1, "header column " + std::to_string(i + 1) + " must be '" + std::string(name) + "'");
        ++i;
    }
}

} // namespace detail

inline GeneticMap read_map(std::istream& in, const std::string& name = "<map>") {
    const auto t = detail::read_table(in, name);
    detail::expect_header_prefix(t, {"chrom", "marker", "dist_cM"});
    if (t.header.size() != 3) throw ParseError(name, 1, "map has exactly three columns");
    detail::LayoutBuilder builder;
    std::vector<std::vector<double>> distances;
    for (const auto& [line, f] : t.rows) {
        const auto [c, m] = builder.add(f[0], f[1], name, line);
        const double d = detail::parse_number(f[2], name, line, "distance");
        if (!(d >= 0.0) || !std::isfinite(d))
            throw ParseError(name, line, "negative or non-finite distance in row " + f[0] + ":" + f[1]);
        if (c == distances.size()) distances.emplace_back();
        distances[c].push_back(d);
    }
    if (distances.empty()) throw ParseError(name, 1, "map has no rows");
    return GeneticMap(std::move(distances), std::move(builder.layout));
}

inline AlleleFrequencySet read_frequencies(std::istream& in, const std::string& name = "<frequencies>",
                                           double lower = AlleleFrequencySet::kDefaultLowerBound) {
    const auto t = detail::read_table(in, name);
    detail::expect_header_prefix(t, {"chrom", "marker"});
    if (t.header.size() < 3) throw ParseError(name, 1, "frequency table needs at least one population column");
    const std::vector<std::string> pops(t.header.begin() + 2, t.header.end());
    detail::LayoutBuilder builder;
    std::vector<std::vector<std::vector<double>>> table;
    for (const auto& [line, f] : t.rows) {
        const auto [c, m] = builder.add(f[0], f[1], name, line);
        std::vector<double> col;
        for (std::size_t k = 2; k < f.size(); ++k) {
            const double p = detail::parse_number(f[k], name, line, "frequency");
            if (!(p >= 0.0 && p <= 1.0)) throw ParseError(name, line, "frequency outside [0,1]");
            col.push_back(p);
        }
        if (c == table.size()) table.emplace_back();
        table[c].push_back(std::move(col));
    }
    if (table.empty()) throw ParseError(name, 1, "frequency table has no rows");
    return AlleleFrequencySet(table, pops, std::move(builder.layout), lower, 1.0 - lower);
}

// Genotypes are placed on `layout` when given (every individual must cover
// it exactly), otherwise on the layout of the file's own row order.
inline PanelDataset read_genotypes(std::istream& in, const std::string& name = "<genotypes>",
                                   const MarkerLayout* layout = nullptr) {
    const auto t = detail::read_table(in, name);
    detail::expect_header_prefix(t, {"id", "chrom", "marker", "hap1"});
    if (t.header.size() > 5 || (t.header.size() == 5 && t.header[4] != "hap2"))
        throw ParseError(name, 1, "genotype header must be id, chrom, marker, hap1[, hap2]");
    const Ploidy ploidy = t.header.size() == 5 ? Ploidy::phased_diploid : Ploidy::haploid;
    const std::size_t tracks = ploidy == Ploidy::haploid ? 1 : 2;

    PanelDataset panel;
    std::unordered_map<std::string, std::size_t> id_index;
    std::vector<std::vector<std::pair<std::size_t, const std::vector<std::string>*>>> rows_by_id;
    for (const auto& [line, f] : t.rows) {
        auto [it, fresh] = id_index.try_emplace(f[0], panel.ids.size());
        if (fresh) {
            panel.ids.push_back(f[0]);
            rows_by_id.emplace_back();
        }
        rows_by_id[it->second].emplace_back(line, &f);
    }
    if (panel.ids.empty()) throw ParseError(name, 1, "genotype file has no rows");

    if (layout) {
        panel.layout = *layout;
    } else {
        detail::LayoutBuilder builder;
        for (const auto& [line, f] : rows_by_id.front()) builder.add((*f)[1], (*f)[2], name, line);
        panel.layout = std::move(builder.layout);
    }
    std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> position;
    for (std::size_t c = 0; c < panel.layout.num_chromosomes(); ++c)
        for (std::size_t m = 0; m < panel.layout.num_markers(c); ++m)
            position[{panel.layout.chromosomes[c], panel.layout.markers[c][m]}] = {c, m};

    auto parse_allele = [&](const std::string& s, std::size_t line) -> std::int8_t {
        if (s == "0") return 0;
        if (s == "1") return 1;
        if (s == ".") return static_cast<std::int8_t>(kMissing);
        throw ParseError(name, line, "allele must be 0, 1 or '.', found '" + s + "'");
    };

    for (std::size_t i = 0; i < panel.ids.size(); ++i) {
        std::vector<GenotypeData::Track> data(tracks);
        std::vector<std::vector<char>> seen;
        for (auto& track : data)
            for (std::size_t c = 0; c < panel.layout.num_chromosomes(); ++c)
                track.emplace_back(panel.layout.num_markers(c), static_cast<std::int8_t>(kMissing));
        for (std::size_t c = 0; c < panel.layout.num_chromosomes(); ++c) seen.emplace_back(panel.layout.num_markers(c), 0);
        for (const auto& [line, f] : rows_by_id[i]) {
            const auto pos = position.find({(*f)[1], (*f)[2]});
            if (pos == position.end())
                throw StructuralError(name + ":" + std::to_string(line) + ": marker " + (*f)[1] + ":" + (*f)[2] +
                                      " not in marker layout");
            const auto [c, m] = pos->second;
            if (seen[c][m]) throw ParseError(name, line, "duplicate row for " + panel.ids[i]);
            seen[c][m] = 1;
            for (std::size_t h = 0; h < tracks; ++h) data[h][c][m] = parse_allele((*f)[3 + h], line);
        }
        for (std::size_t c = 0; c < seen.size(); ++c)
            for (std::size_t m = 0; m < seen[c].size(); ++m)
                if (!seen[c][m])
                    throw StructuralError(name + ": individual " + panel.ids[i] + " lacks marker " +
                                          panel.layout.chromosomes[c] + ":" + panel.layout.markers[c][m]);
        panel.individuals.emplace_back(ploidy, std::move(data));
    }
    return panel;
}

// id -> population label, in file order.
inline std::vector<std::pair<std::string, std::string>> read_labels(std::istream& in, const std::string& name = "<labels>") {
    const auto t = detail::read_table(in, name);
    detail::expect_header_prefix(t, {"id", "population"});
    if (t.header.size() != 2) throw ParseError(name, 1, "labels have exactly two columns");
    std::vector<std::pair<std::string, std::string>> labels;
    std::set<std::string> ids;
    for (const auto& [line, f] : t.rows) {
        if (!ids.insert(f[0]).second) throw ParseError(name, line, "duplicate id '" + f[0] + "'");
        labels.emplace_back(f[0], f[1]);
    }
    return labels;
}

inline void write_map(std::ostream& os, const GeneticMap& map) {
    os << "chrom\tmarker\tdist_cM\n";
    const auto& layout = map.layout();
    for (std::size_t c = 0; c < map.num_chromosomes(); ++c)
        for (std::size_t m = 0; m < map.num_markers(c); ++m)
            os << layout.chromosomes[c] << '\t' << layout.markers[c][m] << '\t' << format_number(map.distance(c, m))
               << '\n';
}

inline void write_frequencies(std::ostream& os, const AlleleFrequencySet& freqs) {
    os << "chrom\tmarker";
    for (const auto& p : freqs.population_names()) os << '\t' << p;
    os << '\n';
    const auto& layout = freqs.layout();
    for (std::size_t c = 0; c < freqs.num_chromosomes(); ++c)
        for (std::size_t m = 0; m < freqs.num_markers(c); ++m) {
            os << layout.chromosomes[c] << '\t' << layout.markers[c][m];
            for (double p : freqs.column(c, m)) os << '\t' << format_number(p);
            os << '\n';
        }
}

inline void write_genotypes(std::ostream& os, const PanelDataset& panel) {
    if (panel.individuals.empty()) throw InvalidInput("empty panel");
    const bool diploid = panel.individuals.front().ploidy() == Ploidy::phased_diploid;
    os << "id\tchrom\tmarker\thap1" << (diploid ? "\thap2" : "") << '\n';
    auto allele = [](int x) { return x == kMissing ? '.' : static_cast<char>('0' + x); };
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& g = panel.individuals[i];
        if ((g.ploidy() == Ploidy::phased_diploid) != diploid) throw StructuralError("mixed ploidy in panel");
        for (std::size_t c = 0; c < g.num_chromosomes(); ++c)
            for (std::size_t m = 0; m < g.num_markers(c); ++m) {
                os << panel.ids[i] << '\t' << panel.layout.chromosomes[c] << '\t' << panel.layout.markers[c][m];
                for (std::size_t t = 0; t < g.num_tracks(); ++t) os << '\t' << allele(g.track(t)[c][m]);
                os << '\n';
            }
    }
}

inline void write_labels(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& labels) {
    os << "id\tpopulation\n";
    for (const auto& [id, pop] : labels) os << id << '\t' << pop << '\n';
}

inline GeneticMap load_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_map(in, path);
}

inline AlleleFrequencySet load_frequencies(const std::string& path,
                                           double lower = AlleleFrequencySet::kDefaultLowerBound) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_frequencies(in, path, lower);
}

inline PanelDataset load_genotypes(const std::string& path, const MarkerLayout* layout = nullptr) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_genotypes(in, path, layout);
}

inline std::vector<std::pair<std::string, std::string>> load_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path + "'");
    return read_labels(in, path);
}

// Population label per panel individual, aligned with panel.ids.
inline std::vector<std::string> labels_for(const PanelDataset& panel,
                                           const std::vector<std::pair<std::string, std::string>>& labels) {
    std::unordered_map<std::string, std::string> by_id(labels.begin(), labels.end());
    std::vector<std::string> out;
    for (const auto& id : panel.ids) {
        const auto it = by_id.find(id);
        if (it == by_id.end()) throw InvalidInput("no population label for individual '" + id + "'");
        out.push_back(it->second);
    }
    return out;
}

// Distinct labels in sorted order; this is the population order used for
// leave-one-out frequencies.
inline std::vector<std::string> population_order(const std::vector<std::string>& labels) {
    std::set<std::string> distinct(labels.begin(), labels.end());
    return {distinct.begin(), distinct.end()};
}

// Relative frequency of allele 1 among the haplotypes of each labelled
// population, leaving out individual `target`. Markers where a population has
// no observed allele get 0.5. Results are clamped to [lower, 1 - lower].
inline AlleleFrequencySet leave_one_out_frequencies(const PanelDataset& panel, std::size_t target,
                                                    const std::vector<std::string>& labels,
                                                    double lower = AlleleFrequencySet::kDefaultLowerBound) {
    if (labels.size() != panel.size()) throw StructuralError("one population label per individual required");
    if (target >= panel.size()) throw InvalidInput("target individual not in panel");
    const auto pops = population_order(labels);
    const std::size_t K = pops.size();
    std::vector<std::size_t> pop_of(panel.size());
    std::vector<std::size_t> members(K, 0);
    for (std::size_t i = 0; i < panel.size(); ++i) {
        pop_of[i] = static_cast<std::size_t>(std::lower_bound(pops.begin(), pops.end(), labels[i]) - pops.begin());
        if (i != target) ++members[pop_of[i]];
    }
    for (std::size_t k = 0; k < K; ++k)
        if (members[k] == 0) throw InvalidInput("population '" + pops[k] + "' is empty after leaving out the target");

    std::vector<std::vector<std::vector<double>>> table;
    for (std::size_t c = 0; c < panel.layout.num_chromosomes(); ++c) {
        std::vector<std::vector<double>> chrom;
        for (std::size_t m = 0; m < panel.layout.num_markers(c); ++m) {
            std::vector<double> ones(K, 0.0), total(K, 0.0);
            for (std::size_t i = 0; i < panel.size(); ++i) {
                if (i == target) continue;
                const auto& g = panel.individuals[i];
                for (std::size_t t = 0; t < g.num_tracks(); ++t) {
                    const int x = g.track(t)[c][m];
                    if (x == kMissing) continue;
                    ones[pop_of[i]] += x;
                    total[pop_of[i]] += 1.0;
                }
            }
            std::vector<double> col(K);
            for (std::size_t k = 0; k < K; ++k) col[k] = total[k] > 0.0 ? ones[k] / total[k] : 0.5;
            chrom.push_back(std::move(col));
        }
        table.push_back(std::move(chrom));
    }
    return AlleleFrequencySet(table, pops, panel.layout, lower, 1.0 - lower);
}

} // namespace linkmix::io
