#pragma once

// Command-line front end. Kept header-only so tests can drive run_cli()
// in-process; tools/linkmix.cpp is a thin main().

#include <linkmix/harness.hpp>
#include <linkmix/inference.hpp>
#include <linkmix/io.hpp>
#include <linkmix/lrt.hpp>
#include <linkmix/parallel.hpp>
#include <linkmix/simulate.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace linkmix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

struct Args {
    std::string genotypes, freqs, map, out, labels, summary;
    std::string emission = "standard";
    double alpha = 0.05;
    int starts = 8;
    std::uint64_t seed = 0;
    bool loo = false;
    bool haploid_track = false;
    std::string model = "linkage";
    std::string coordinates = "natural";
    std::string id;

    // simulate
    std::size_t K = 2;
    std::size_t chromosomes = 1;
    std::vector<std::size_t> markers;  // empty: command default
    std::vector<double> q;
    std::string r = "1";
    double d = 1.0;
    std::string ploidy = "haploid";
    std::size_t individuals = 1;
    double concentration = 0.0;

    // evaluate
    std::string experiment = "error-grid";
    std::vector<double> d_grid{0.1, 0.5, 1.0, 2.0, 5.0, 10.0};
    std::vector<double> r_grid{1.0, 10.0, 100.0};
    std::vector<std::size_t> marker_schedule{250, 1000, 4000};
    std::size_t replicates = 100;
};

inline double parse_rate(const std::string& s) {
    if (s == "inf" || s == "infinity" || s == "Inf") return kInfinity;
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !(v >= 0.0)) throw ConfigError("bad r");
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("r must be a nonnegative number or 'inf', got '" + s + "'");
    }
}

inline FitOptions fit_options(const Args& a) {
    FitOptions o;
    o.emission = parse_emission_mode(a.emission);
    if (a.starts < 1) throw ConfigError("--starts must be at least 1");
    o.starts = a.starts;
    o.seed = a.seed;
    return o;
}

// Output sink: --out file when given, else the fallback stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw InvalidInput("cannot write '" + path + "'");
        }
        os_ = file_ ? file_.get() : &fallback;
    }
    std::ostream& operator*() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

struct Inputs {
    io::PanelDataset panel;
    std::optional<AlleleFrequencySet> freqs;
    std::optional<GeneticMap> map;
    std::vector<std::string> labels;  // aligned with panel.ids, empty when absent
};

inline void require(const std::string& value, const char* flag) {
    if (value.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

inline Inputs load_inputs(const Args& a, bool need_map, bool need_freqs) {
    Inputs in;
    require(a.genotypes, "--genotypes");
    if (need_map) require(a.map, "--map");
    if (need_freqs) require(a.freqs, "--freqs");
    if (!a.map.empty()) in.map = io::load_map(a.map);
    if (!a.freqs.empty()) in.freqs = io::load_frequencies(a.freqs);
    if (in.map && in.freqs && !(in.map->layout() == in.freqs->layout()))
        throw StructuralError("map and frequency files list different markers");
    const MarkerLayout* layout = in.map ? &in.map->layout() : in.freqs ? &in.freqs->layout() : nullptr;
    in.panel = io::load_genotypes(a.genotypes, layout);
    if (a.haploid_track)
        for (auto& g : in.panel.individuals) g = g.haploid_track(0);
    if (!a.labels.empty()) in.labels = io::labels_for(in.panel, io::load_labels(a.labels));
    return in;
}

inline std::string rate_string(double r) { return std::isinf(r) ? "inf" : io::format_number(r); }

inline void write_test_header(std::ostream& os, std::size_t K) {
    os << "id,ell_null,ell_alt,lambda,p_value,reject";
    for (std::size_t k = 0; k < K; ++k) os << ",q_hat" << k + 1;
    os << ",r_hat,boundary_flag\n";
}

inline void write_test_row(std::ostream& os, const std::string& id, const TestResult& t) {
    os << id << ',' << io::format_number(t.null_fit.ell_hat) << ',' << io::format_number(t.alt_fit.ell_hat) << ','
       << io::format_number(t.lambda) << ',' << io::format_number(t.p_value) << ',' << (t.reject ? 1 : 0);
    for (double v : t.alt_fit.theta_hat.q) os << ',' << io::format_number(v);
    os << ',' << rate_string(t.alt_fit.theta_hat.r) << ',' << (t.alt_fit.boundary() ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------

inline void cmd_simulate(const Args& a, std::ostream& out) {
    require(a.out, "--out");
    SimulationConfig base;
    base.K = a.K;
    if (a.markers.empty()) {
        base.markers_per_chromosome.assign(a.chromosomes, 100);
    } else if (a.markers.size() == 1) {
        base.markers_per_chromosome.assign(a.chromosomes, a.markers.front());
    } else {
        if (a.markers.size() != a.chromosomes && a.chromosomes != 1)
            throw ConfigError("--markers lists a count per chromosome");
        base.markers_per_chromosome = a.markers;
    }
    base.q0 = a.q.empty() ? std::vector<double>(a.K, 1.0 / static_cast<double>(a.K)) : a.q;
    base.r0 = a.model == "admixture" ? kInfinity : parse_rate(a.r);
    if (a.model != "admixture" && a.model != "linkage") throw ConfigError("--model must be linkage or admixture");
    base.distance = a.d;
    base.emission = parse_emission_mode(a.emission);
    if (a.ploidy == "haploid") base.ploidy = Ploidy::haploid;
    else if (a.ploidy == "diploid") base.ploidy = Ploidy::phased_diploid;
    else throw ConfigError("--ploidy must be haploid or diploid");
    base.seed = a.seed;
    if (a.individuals < 1) throw ConfigError("--individuals must be positive");
    if (a.concentration < 0.0 || a.concentration > 1.0) throw ConfigError("--concentration must lie in [0,1]");
    base.validate();

    // Frequencies are shared by the whole panel and drawn from their own stream.
    Philox freq_rng(a.seed, 0xF5EC0000ULL);
    base.frequencies = random_frequencies(base.K, base.markers_per_chromosome, base.frequency_lower,
                                          base.frequency_upper, freq_rng);

    io::PanelDataset panel;
    std::vector<std::pair<std::string, std::string>> labels;
    std::optional<GeneticMap> map;
    for (std::size_t i = 0; i < a.individuals; ++i) {
        auto cfg = base;
        cfg.stream = i;
        if (a.concentration > 0.0) {
            const std::size_t k = i % a.K;
            const double rest = a.K > 1 ? (1.0 - a.concentration) / static_cast<double>(a.K - 1) : 0.0;
            cfg.q0.assign(a.K, rest);
            cfg.q0[k] = a.K > 1 ? a.concentration : 1.0;
            double sum = 0.0;
            for (std::size_t j = 0; j + 1 < a.K; ++j) sum += cfg.q0[j];
            cfg.q0.back() = 1.0 - sum;
            labels.emplace_back("ind" + std::to_string(i + 1), "pop" + std::to_string(k + 1));
        }
        auto sim = simulate_linkage(cfg);
        panel.ids.push_back("ind" + std::to_string(i + 1));
        panel.individuals.push_back(std::move(sim.data));
        if (!map) map = sim.map;
    }
    panel.layout = map->layout();

    auto write = [](const std::string& path, auto&& fn) {
        std::ofstream os(path);
        if (!os) throw InvalidInput("cannot write '" + path + "'");
        fn(os);
    };
    write(a.out + ".genotypes.tsv", [&](std::ostream& os) { io::write_genotypes(os, panel); });
    write(a.out + ".freqs.tsv", [&](std::ostream& os) { io::write_frequencies(os, *base.frequencies); });
    write(a.out + ".map.tsv", [&](std::ostream& os) { io::write_map(os, *map); });
    if (!labels.empty()) write(a.out + ".labels.tsv", [&](std::ostream& os) { io::write_labels(os, labels); });
    out << "wrote " << panel.size() << " individual(s) to " << a.out << ".{genotypes,freqs,map}.tsv\n";
}

inline void cmd_fit(const Args& a, std::ostream& out, std::ostream& err) {
    const bool linkage = a.model == "linkage";
    if (!linkage && a.model != "admixture") throw ConfigError("--model must be linkage or admixture");
    const auto in = load_inputs(a, linkage, true);
    const auto options = fit_options(a);
    Sink sink(a.out, out);
    const std::size_t K = in.freqs->K();
    *sink << "id,model,ell_hat";
    for (std::size_t k = 0; k < K; ++k) *sink << ",q_hat" << k + 1;
    *sink << ",r_hat,converged,boundary_flag,n_starts\n";
    std::vector<ModelFit> fits(in.panel.size());
    parallel_for(in.panel.size(), [&](std::size_t i) {
        const auto& g = in.panel.individuals[i];
        fits[i] = linkage ? fit_linkage(g, *in.freqs, *in.map, options) : fit_admixture(g, *in.freqs, options);
    });
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const auto& f = fits[i];
        *sink << in.panel.ids[i] << ',' << to_string(f.model) << ',' << io::format_number(f.ell_hat);
        for (double v : f.theta_hat.q) *sink << ',' << io::format_number(v);
        *sink << ',' << rate_string(f.theta_hat.r) << ',' << (f.converged ? 1 : 0) << ',' << (f.boundary() ? 1 : 0)
              << ',' << f.n_starts << '\n';
        for (const auto& w : f.warnings) err << "warning: " << in.panel.ids[i] << ": " << w << '\n';
    }
}

inline void cmd_test(const Args& a, std::ostream& out) {
    const auto in = load_inputs(a, true, true);
    const auto options = fit_options(a);
    std::vector<TestResult> results(in.panel.size());
    parallel_for(in.panel.size(), [&](std::size_t i) {
        results[i] = run_test(in.panel.individuals[i], *in.freqs, *in.map, a.alpha, options);
    });
    Sink sink(a.out, out);
    write_test_header(*sink, in.freqs->K());
    for (std::size_t i = 0; i < results.size(); ++i) write_test_row(*sink, in.panel.ids[i], results[i]);
}

struct PanelSummaryRow {
    std::string population;
    std::size_t n = 0;
    std::size_t non_rejected = 0;
    double fraction() const { return n ? static_cast<double>(non_rejected) / static_cast<double>(n) : 0.0; }
};

// Per-population non-rejection counts followed by the overall row "ALL".
inline std::vector<PanelSummaryRow> summarize_panel(const std::vector<TestResult>& results,
                                                    const std::vector<std::string>& labels) {
    std::map<std::string, PanelSummaryRow> by_pop;
    PanelSummaryRow all{"ALL"};
    for (std::size_t i = 0; i < results.size(); ++i) {
        const bool keep = !results[i].reject;
        ++all.n;
        all.non_rejected += keep;
        if (!labels.empty()) {
            auto& row = by_pop[labels[i]];
            row.population = labels[i];
            ++row.n;
            row.non_rejected += keep;
        }
    }
    std::vector<PanelSummaryRow> rows;
    for (auto& [_, row] : by_pop) rows.push_back(row);
    rows.push_back(all);
    return rows;
}

inline void cmd_test_panel(const Args& a, std::ostream& out, std::ostream& err) {
    if (a.loo) require(a.labels, "--labels (required by --loo)");
    const auto in = load_inputs(a, true, !a.loo);
    const auto options = fit_options(a);
    std::vector<TestResult> results(in.panel.size());
    std::size_t K = in.freqs ? in.freqs->K() : io::population_order(in.labels).size();
    parallel_for(in.panel.size(), [&](std::size_t i) {
        if (a.loo) {
            const auto freqs = io::leave_one_out_frequencies(in.panel, i, in.labels);
            results[i] = run_test(in.panel.individuals[i], freqs, *in.map, a.alpha, options);
        } else {
            results[i] = run_test(in.panel.individuals[i], *in.freqs, *in.map, a.alpha, options);
        }
    });
    {
        Sink sink(a.out, out);
        write_test_header(*sink, K);
        for (std::size_t i = 0; i < results.size(); ++i) write_test_row(*sink, in.panel.ids[i], results[i]);
    }
    Sink summary(a.summary, a.out.empty() ? err : out);
    *summary << "population,n,non_rejected,non_rejection_fraction\n";
    for (const auto& row : summarize_panel(results, in.labels))
        *summary << row.population << ',' << row.n << ',' << row.non_rejected << ','
                 << io::format_number(row.fraction()) << '\n';
}

inline void cmd_test_population(const Args& a, std::ostream& out) {
    const auto in = load_inputs(a, true, true);
    const auto t = run_population_test(in.panel.individuals, *in.freqs, *in.map, a.alpha, fit_options(a));
    Sink sink(a.out, out);
    *sink << "n,parameter_count,ell_null,ell_alt,lambda,p_value,reject,r_hat\n";
    *sink << t.alt_fit.n << ',' << in.panel.size() * (in.freqs->K() - 1) + 1 << ','
          << io::format_number(t.null_fit.ell_hat) << ',' << io::format_number(t.alt_fit.ell_hat) << ','
          << io::format_number(t.lambda) << ',' << io::format_number(t.p_value) << ',' << (t.reject ? 1 : 0) << ','
          << rate_string(t.alt_fit.r_hat) << '\n';
}

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m, const std::vector<std::string>& labels) {
    for (const auto& l : labels) os << ',' << l;
    os << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        os << labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) os << ',' << io::format_number(m(i, j));
        os << '\n';
    }
}

inline void cmd_covariance(const Args& a, std::ostream& out, std::ostream& err) {
    const bool linkage = a.model == "linkage";
    if (!linkage && a.model != "admixture") throw ConfigError("--model must be linkage or admixture");
    if (a.coordinates != "natural" && a.coordinates != "free") throw ConfigError("--coordinates must be natural or free");
    const auto in = load_inputs(a, linkage, true);
    const auto options = fit_options(a);
    const std::size_t i = a.id.empty() ? 0 : in.panel.index_of(a.id);
    const auto& g = in.panel.individuals[i];
    const LikelihoodModel model = linkage ? LikelihoodModel(g, *in.freqs, *in.map, options.emission)
                                          : LikelihoodModel(g, *in.freqs, options.emission);
    const auto fit = linkage ? fit_linkage(model, options) : fit_admixture(model, options);
    const auto cov = covariance_mle(fit, model);
    for (const auto& w : cov.warnings) err << "warning: " << w << '\n';
    Sink sink(a.out, out);
    if (a.coordinates == "natural") write_matrix(*sink, cov.natural, cov.natural_labels);
    else write_matrix(*sink, cov.free_coordinates, cov.free_labels);
}

inline void cmd_evaluate(const Args& a, std::ostream& out, std::ostream& err) {
    const auto options = fit_options(a);
    Sink sink(a.out, out);
    if (a.experiment == "error-grid") {
        ErrorGridConfig cfg;
        cfg.d_values = a.d_grid;
        cfg.r_values = a.r_grid;
        if (!a.markers.empty()) cfg.markers = a.markers.front();
        cfg.replicates = a.replicates;
        cfg.alpha = a.alpha;
        cfg.seed = a.seed;
        cfg.K = a.K;
        cfg.q0 = a.q.empty() ? std::vector<double>(a.K, 1.0 / static_cast<double>(a.K)) : a.q;
        cfg.fit = options;
        write_csv(*sink, error_rate_experiment(cfg));
    } else if (a.experiment == "coverage") {
        CoverageConfig cfg;
        if (!a.q.empty()) cfg.q0 = a.q;
        cfg.r0 = parse_rate(a.r);
        cfg.d = a.d;
        if (!a.markers.empty()) cfg.markers = a.markers.front();
        cfg.replicates = a.replicates;
        cfg.seed = a.seed;
        cfg.fit = options;
        write_csv(*sink, coverage_experiment(cfg));
    } else if (a.experiment == "consistency") {
        ConsistencyConfig cfg;
        if (!a.q.empty()) cfg.q0 = a.q;
        cfg.r0 = parse_rate(a.r);
        cfg.d = a.d;
        cfg.marker_schedule = a.marker_schedule;
        cfg.replicates = a.replicates;
        cfg.seed = a.seed;
        cfg.fit = options;
        write_csv(*sink, consistency_experiment(cfg));
    } else if (a.experiment == "null-calibration") {
        NullCalibrationConfig cfg;
        if (!a.markers.empty()) cfg.markers = a.markers.front();
        cfg.replicates = a.replicates;
        cfg.d = a.d;
        cfg.alpha = a.alpha;
        cfg.seed = a.seed;
        cfg.fit = options;
        const auto res = null_calibration(cfg);
        *sink << "probability,empirical,chi2,mixture\n";
        for (const auto& q : res.quantiles)
            *sink << io::format_number(q.probability) << ',' << io::format_number(q.empirical) << ','
                  << io::format_number(q.chi2) << ',' << io::format_number(q.mixture) << '\n';
        err << "rejection rate " << res.rejection_rate << "; KS chi2 D=" << res.ks_chi2.statistic
                  << " p=" << res.ks_chi2.p_value << "; KS mixture D=" << res.ks_mixture.statistic
                  << " p=" << res.ks_mixture.p_value << '\n';
    } else {
        throw ConfigError("unknown experiment '" + a.experiment + "'");
    }
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"linkmix: Linkage vs Admixture model likelihood-ratio test"};
    app.require_subcommand(1);
    Args a;

    auto data_flags = [&](CLI::App* sub) {
        sub->add_option("--genotypes", a.genotypes, "genotype TSV (id chrom marker hap1 [hap2])");
        sub->add_option("--freqs", a.freqs, "allele frequency TSV (chrom marker pop1..popK)");
        sub->add_option("--map", a.map, "genetic map TSV (chrom marker dist_cM)");
        sub->add_option("--emission", a.emission, "standard | paper-literal")->capture_default_str();
        sub->add_option("--starts", a.starts, "optimizer starts")->capture_default_str();
        sub->add_option("--seed", a.seed, "random seed")->capture_default_str();
        sub->add_option("--out", a.out, "output path");
        sub->add_flag("--haploid-track", a.haploid_track, "use only the first haplotype track");
    };

    auto* simulate = app.add_subcommand("simulate", "simulate genotypes, frequencies and map");
    simulate->add_option("--model", a.model, "linkage | admixture")->capture_default_str();
    simulate->add_option("--K", a.K, "number of populations")->capture_default_str();
    simulate->add_option("--chromosomes", a.chromosomes, "number of chromosomes")->capture_default_str();
    simulate->add_option("--markers", a.markers, "markers per chromosome (one value or one per chromosome)")
        ->delimiter(',');
    simulate->add_option("--q", a.q, "ancestry proportions, comma separated")->delimiter(',');
    simulate->add_option("--r", a.r, "recombination rate or 'inf'")->capture_default_str();
    simulate->add_option("--d", a.d, "distance between adjacent markers (cM)")->capture_default_str();
    simulate->add_option("--ploidy", a.ploidy, "haploid | diploid")->capture_default_str();
    simulate->add_option("--individuals", a.individuals, "panel size")->capture_default_str();
    simulate->add_option("--concentration", a.concentration,
                         "if > 0, individual i belongs to population i mod K with that ancestry share; writes labels");
    simulate->add_option("--emission", a.emission, "standard | paper-literal")->capture_default_str();
    simulate->add_option("--seed", a.seed, "random seed")->capture_default_str();
    simulate->add_option("--out", a.out, "output prefix");

    auto* fit = app.add_subcommand("fit", "maximum-likelihood fit per individual");
    data_flags(fit);
    fit->add_option("--model", a.model, "linkage | admixture")->capture_default_str();

    auto* test = app.add_subcommand("test", "likelihood-ratio test per individual");
    data_flags(test);
    test->add_option("--alpha", a.alpha, "significance level")->capture_default_str();

    auto* panel = app.add_subcommand("test-panel", "per-individual tests over a labelled panel");
    data_flags(panel);
    panel->add_option("--alpha", a.alpha, "significance level")->capture_default_str();
    panel->add_option("--labels", a.labels, "labels TSV (id population)");
    panel->add_flag("--loo", a.loo, "leave-one-out frequencies from the labelled panel");
    panel->add_option("--summary", a.summary, "summary CSV path (default: stdout with --out, else stderr)");

    auto* population = app.add_subcommand("test-population", "joint test with one shared r");
    data_flags(population);
    population->add_option("--alpha", a.alpha, "significance level")->capture_default_str();

    auto* covariance = app.add_subcommand("covariance", "asymptotic covariance of the MLE");
    data_flags(covariance);
    covariance->add_option("--model", a.model, "linkage | admixture")->capture_default_str();
    covariance->add_option("--id", a.id, "individual (default: first)");
    covariance->add_option("--coordinates", a.coordinates, "natural | free")->capture_default_str();

    auto* evaluate = app.add_subcommand("evaluate", "simulation experiments");
    evaluate->add_option("--experiment", a.experiment, "error-grid | coverage | consistency | null-calibration")
        ->capture_default_str();
    evaluate->add_option("--d-grid", a.d_grid, "distances")->delimiter(',');
    evaluate->add_option("--r-grid", a.r_grid, "recombination rates")->delimiter(',');
    evaluate->add_option("--markers", a.markers, "markers per replicate")->delimiter(',');
    evaluate->add_option("--marker-schedule", a.marker_schedule, "consistency marker counts")->delimiter(',');
    evaluate->add_option("--replicates", a.replicates, "replicates per cell")->capture_default_str();
    evaluate->add_option("--alpha", a.alpha, "significance level")->capture_default_str();
    evaluate->add_option("--K", a.K, "number of populations")->capture_default_str();
    evaluate->add_option("--q", a.q, "true ancestry proportions")->delimiter(',');
    evaluate->add_option("--r", a.r, "true r for coverage/consistency")->capture_default_str();
    evaluate->add_option("--d", a.d, "distance for coverage/consistency")->capture_default_str();
    evaluate->add_option("--emission", a.emission, "standard | paper-literal")->capture_default_str();
    evaluate->add_option("--starts", a.starts, "optimizer starts")->capture_default_str();
    evaluate->add_option("--seed", a.seed, "random seed")->capture_default_str();
    evaluate->add_option("--out", a.out, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*simulate) cmd_simulate(a, out);
        else if (*fit) cmd_fit(a, out, err);
        else if (*test) cmd_test(a, out);
        else if (*panel) cmd_test_panel(a, out, err);
        else if (*population) cmd_test_population(a, out);
        else if (*covariance) cmd_covariance(a, out, err);
        else if (*evaluate) cmd_evaluate(a, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.is_validation() ? kExitValidation : kExitNumeric;
    }
    return kExitOk;
}

} // namespace linkmix::cli
