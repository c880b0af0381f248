#include "helpers.hpp"

#include <linkmix/coordinates.hpp>
#include <linkmix/likelihood.hpp>
#include <linkmix/numdiff.hpp>
#include <linkmix/simulate.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace linkmix;
using namespace linkmix::testing;
using Catch::Approx;

TEST_CASE("single marker likelihood is log <q, p>") {
    auto g = haploid_data({{1}});
    AlleleFrequencySet f({{{0.9, 0.1}}});
    GeneticMap map(std::vector<std::vector<double>>{{0.0}});
    const auto res = forward_loglik(g, f, map, {{0.4, 0.6}, 1.0});
    CHECK(res.ell == Approx(std::log(0.42)).epsilon(1e-15));
    CHECK(res.m_total == 1);
    const auto bf = brute_force_loglik(g, f, map, {{0.4, 0.6}, 1.0});
    CHECK(std::abs(bf.ell - res.ell) < 1e-14);
}

TEST_CASE("admixture likelihood examples") {
    AlleleFrequencySet f({{{0.9, 0.1}}});
    const auto res = admixture_loglik(haploid_data({{1}}), f, std::vector<double>{1.0, 0.0});
    CHECK(res.per_marker[0] == Approx(std::log(0.9)).epsilon(1e-15));

    AlleleFrequencySet half({{{0.5, 0.5}, {0.5, 0.5}}});
    const auto flat = admixture_loglik(haploid_data({{1, 0}}), half, std::vector<double>{0.3, 0.7});
    CHECK(flat.ell == Approx(std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("admixture likelihood prefers the generating q") {
    SimulationConfig cfg;
    cfg.q0 = {0.7, 0.3};
    cfg.seed = 17;
    const auto s = simulate_admixture(cfg);
    const double at_truth = admixture_loglik(s.data, s.freqs, cfg.q0).ell;
    const double swapped = admixture_loglik(s.data, s.freqs, std::vector<double>{0.3, 0.7}).ell;
    CHECK(at_truth > swapped);
}

TEST_CASE("forward agrees with brute-force enumeration") {
    Philox rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t K = trial % 2 ? 3 : 2;
        std::vector<std::size_t> markers = trial % 3 == 0 ? std::vector<std::size_t>{6}
                                                            : std::vector<std::size_t>{3, 4};
        auto inst = random_instance(rng, K, markers, Ploidy::haploid, trial % 4 == 0 ? 0.2 : 0.0);
        for (auto mode : {EmissionMode::standard, EmissionMode::paper_literal}) {
            const auto fw = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta, mode);
            const auto bf = brute_force_loglik(inst.data, inst.freqs, inst.map, inst.theta, mode);
            CHECK(std::abs(fw.ell - bf.ell) < 1e-10);
            for (std::size_t i = 0; i < fw.per_marker.size(); ++i)
                CHECK(std::abs(fw.per_marker[i] - bf.per_marker[i]) < 1e-10);
        }
    }
}

TEST_CASE("two markers on separate chromosomes are independent") {
    auto g = haploid_data({{1}, {0}});
    AlleleFrequencySet f({{{0.8, 0.3}}, {{0.6, 0.1}}});
    GeneticMap map({{0.0}, {0.0}});
    const std::vector<double> q{0.25, 0.75};
    const auto res = brute_force_loglik(g, f, map, {q, 0.5});
    const double expected = std::log(0.25 * 0.8 + 0.75 * 0.3) + std::log(0.25 * 0.4 + 0.75 * 0.9);
    CHECK(res.total() == Approx(expected).epsilon(1e-14));
    CHECK(forward_loglik(g, f, map, {q, 0.5}).total() == Approx(expected).epsilon(1e-14));
}

TEST_CASE("brute force refuses large inputs") {
    Philox rng(1);
    auto big = random_instance(rng, 2, {13});
    CHECK_THROWS_AS(brute_force_loglik(big.data, big.freqs, big.map, big.theta), RefuseToRun);
    auto wide = random_instance(rng, 4, {3});
    CHECK_THROWS_AS(brute_force_loglik(wide.data, wide.freqs, wide.map, wide.theta), RefuseToRun);
}

TEST_CASE("r = infinity reproduces the admixture likelihood") {
    Philox rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t K = 2 + static_cast<std::size_t>(rng.uniform() * 3);
        auto inst = random_instance(rng, K, {20, 15}, trial % 2 ? Ploidy::phased_diploid : Ploidy::haploid, 0.1);
        const auto fw = forward_loglik(inst.data, inst.freqs, inst.map, {inst.theta.q, kInfinity});
        const auto ad = admixture_loglik(inst.data, inst.freqs, inst.theta.q);
        CHECK(std::abs(fw.ell - ad.ell) < 1e-14);

        // continuity: a very large finite r with d >= 0.1 is numerically the same
        std::vector<std::vector<double>> d(2);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t m = 0; m < inst.map.num_markers(c); ++m)
                d[c].push_back(std::max(0.1, inst.map.distance(c, m)));
        const GeneticMap spaced(d);
        const auto large = forward_loglik(inst.data, inst.freqs, spaced, {inst.theta.q, 1e6});
        CHECK(std::abs(large.ell - ad.ell) < 1e-8);
    }
}

TEST_CASE("likelihood normalizes over all observation vectors") {
    Philox rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t M = 6 + static_cast<std::size_t>(trial % 3);
        auto inst = random_instance(rng, 2 + trial % 2, {M});
        for (auto mode : {EmissionMode::standard, EmissionMode::paper_literal}) {
            const LikelihoodModel model(inst.data, inst.freqs, inst.map, mode);
            double total = 0.0;
            for (std::size_t bits = 0; bits < (1u << M); ++bits) {
                std::vector<std::int8_t> x(M);
                for (std::size_t m = 0; m < M; ++m) x[m] = static_cast<std::int8_t>((bits >> m) & 1u);
                total += std::exp(forward_loglik(haploid_data({x}), inst.freqs, inst.map, inst.theta, mode).total());
            }
            CHECK(total == Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("population relabeling leaves the likelihood unchanged") {
    Philox rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_instance(rng, 3, {12, 9});
        const std::vector<std::size_t> perm{2, 0, 1};
        std::vector<std::vector<std::vector<double>>> table;
        for (std::size_t c = 0; c < 2; ++c) {
            std::vector<std::vector<double>> chrom;
            for (std::size_t m = 0; m < inst.freqs.num_markers(c); ++m) {
                std::vector<double> col(3);
                for (std::size_t k = 0; k < 3; ++k) col[k] = inst.freqs.at(c, perm[k], m);
                chrom.push_back(col);
            }
            table.push_back(chrom);
        }
        std::vector<double> q(3);
        for (std::size_t k = 0; k < 3; ++k) q[k] = inst.theta.q[perm[k]];
        const double a = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta).ell;
        const double b = forward_loglik(inst.data, AlleleFrequencySet(table), inst.map, {q, inst.theta.r}).ell;
        CHECK(std::abs(a - b) < 1e-14);
    }
}

TEST_CASE("diploid likelihood is the sum of its haploid tracks") {
    Philox rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_instance(rng, 2, {30, 10}, Ploidy::phased_diploid, 0.05);
        const auto both = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta);
        const auto t0 = forward_loglik(inst.data.haploid_track(0), inst.freqs, inst.map, inst.theta);
        const auto t1 = forward_loglik(inst.data.haploid_track(1), inst.freqs, inst.map, inst.theta);
        CHECK(both.m_total == 40);
        CHECK(both.total() == Approx(t0.total() + t1.total()).epsilon(1e-13));
    }
}

TEST_CASE("missing marker equals merging the adjacent distances") {
    Philox rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        auto inst = random_instance(rng, 2 + trial % 2, {7});
        auto track = inst.data.track(0);
        const std::size_t hole = 1 + static_cast<std::size_t>(rng.uniform() * 5);  // interior marker
        track[0][hole] = kMissing;
        const auto with_missing = haploid_data(track);

        // same data with the missing marker removed and its distances merged
        std::vector<std::int8_t> x;
        std::vector<double> d;
        std::vector<std::vector<double>> p;
        for (std::size_t m = 0; m < 7; ++m) {
            if (m == hole) continue;
            x.push_back(track[0][m]);
            double dist = inst.map.distance(0, m);
            if (m == hole + 1) dist += inst.map.distance(0, hole);
            d.push_back(dist);
            auto col = inst.freqs.column(0, m);
            p.emplace_back(col.begin(), col.end());
        }
        const auto a = brute_force_loglik(with_missing, inst.freqs, inst.map, inst.theta);
        const auto b = brute_force_loglik(haploid_data({x}), AlleleFrequencySet({p}), GeneticMap({d}), inst.theta);
        CHECK(a.total() == Approx(b.total()).epsilon(1e-12));
        const auto f = forward_loglik(with_missing, inst.freqs, inst.map, inst.theta);
        CHECK(f.total() == Approx(b.total()).epsilon(1e-12));
        CHECK(f.per_marker[hole] == 0.0);
    }
}

TEST_CASE("likelihood result invariants") {
    Philox rng(4);
    auto inst = random_instance(rng, 3, {40, 25});
    const auto res = forward_loglik(inst.data, inst.freqs, inst.map, inst.theta);
    double sum = 0.0;
    for (double d : res.per_marker) {
        CHECK(d <= 0.0);
        CHECK(std::isfinite(d));
        sum += d;
    }
    CHECK(res.ell == Approx(sum / 65.0).margin(1e-10));
    const LikelihoodModel model(inst.data, inst.freqs, inst.map);
    CHECK(model.ell(inst.theta.q, inst.theta.r) == Approx(res.ell).epsilon(1e-12));
}

TEST_CASE("likelihood errors") {
    Philox rng(6);
    auto inst = random_instance(rng, 2, {5});
    AlleleFrequencySet short_freqs({{{0.1, 0.2}}});
    CHECK_THROWS_AS(forward_loglik(inst.data, short_freqs, inst.map, inst.theta), StructuralError);
    CHECK_THROWS_AS(forward_loglik(inst.data, inst.freqs, inst.map, {{0.2, 0.3, 0.5}, 1.0}), StructuralError);
    const LikelihoodModel mapless(inst.data, inst.freqs);
    CHECK_THROWS(mapless.ell(inst.theta.q, 1.0));
    CHECK_NOTHROW(mapless.ell(inst.theta.q, kInfinity));
}

TEST_CASE("long sequences do not underflow") {
    SimulationConfig cfg;
    cfg.markers_per_chromosome = {20000};
    cfg.seed = 3;
    const auto s = simulate_linkage(cfg);
    const auto res = forward_loglik(s.data, s.freqs, s.map, {{0.5, 0.5}, 1.0});
    CHECK(std::isfinite(res.ell));
    CHECK(res.ell < 0.0);
    CHECK(res.ell > -1.0);
}

TEST_CASE("gradient of ell agrees with a quadratic-fit slope") {
    SimulationConfig cfg;
    cfg.markers_per_chromosome = {50};
    cfg.seed = 21;
    const auto s = simulate_linkage(cfg);
    const LikelihoodModel model(s.data, s.freqs, s.map);
    const ParameterPoint theta{{0.35, 0.65}, 0.8};
    auto f = [&](const Eigen::VectorXd& x) {
        const auto t = coords::from_free(x, true);
        return model.ell(t.q, t.r);
    };
    const Eigen::VectorXd x0 = coords::to_free(theta, true);
    const Eigen::VectorXd g = numerical_gradient(f, x0);
    // oracle: least-squares parabola through 5 points at a much larger spacing
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        const double h = 1e-3;
        Eigen::MatrixXd A(5, 3);
        Eigen::VectorXd b(5);
        for (int j = -2; j <= 2; ++j) {
            Eigen::VectorXd x = x0;
            x[i] += j * h;
            A.row(j + 2) << 1.0, j * h, (j * h) * (j * h);
            b[j + 2] = f(x);
        }
        const Eigen::Vector3d coef = A.colPivHouseholderQr().solve(b);
        CHECK(g[i] == Approx(coef[1]).epsilon(1e-4));
    }
}
