#pragma once

#include <linkmix/coordinates.hpp>
#include <linkmix/likelihood.hpp>
#include <linkmix/numdiff.hpp>
#include <linkmix/optimize.hpp>
#include <linkmix/random.hpp>
#include <linkmix/types.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace linkmix {

enum class ModelKind { admixture, linkage };
enum class OptimizerKind { quasi_newton, projected_gradient };

inline std::string to_string(ModelKind m) { return m == ModelKind::admixture ? "admixture" : "linkage"; }

struct FitOptions {
    EmissionMode emission = EmissionMode::standard;
    int starts = 8;
    std::uint64_t seed = 0;
    int max_iterations = 500;
    double gradient_tolerance = 1e-6;
    double f_tolerance = 1e-10;
    OptimizerKind optimizer = OptimizerKind::quasi_newton;
};

// Starting r values paired with the uniform ancestry vector.
inline constexpr double kStartRGrid[] = {0.1, 1.0, 10.0, 100.0};

// Ancestry estimates closer than this to 0 or 1 count as boundary estimates.
inline constexpr double kBoundaryEpsilon = 1e-4;

// Values of ell closer than this are ties; ties go to the lower start index.
inline constexpr double kTieTolerance = 1e-12;

struct ModelFit {
    ParameterPoint theta_hat;
    double ell_hat = -kInfinity;
    ModelKind model = ModelKind::admixture;
    int n_starts = 0;
    bool converged = false;
    std::vector<double> start_ells;
    std::vector<ParameterPoint> start_thetas;
    std::size_t m_total = 0;
    std::vector<std::string> warnings;

    bool boundary() const {
        if (model == ModelKind::linkage && theta_hat.is_admixture()) return true;
        return std::any_of(theta_hat.q.begin(), theta_hat.q.end(),
                           [](double v) { return v < kBoundaryEpsilon || v > 1.0 - kBoundaryEpsilon; });
    }
};

// Start points: the uniform q combined with each r of kStartRGrid, then
// Dirichlet(1) draws of q with log10 r ~ U(-1, 2). Admixture starts skip the
// repeated uniform points.
inline std::vector<ParameterPoint> start_points(std::size_t K, int count, std::uint64_t seed, ModelKind model) {
    std::vector<ParameterPoint> starts;
    const std::vector<double> uniform(K, 1.0 / static_cast<double>(K));
    Philox rng(seed, 0x53544152ULL);  // dedicated stream for start points
    const int grid = model == ModelKind::linkage ? 4 : 1;
    for (int i = 0; i < count; ++i) {
        if (i < grid) {
            starts.push_back({uniform, model == ModelKind::linkage ? kStartRGrid[i] : kInfinity});
        } else {
            auto q = rng.dirichlet_ones(K);
            const double r = std::pow(10.0, rng.uniform(-1.0, 2.0));
            starts.push_back({std::move(q), model == ModelKind::linkage ? r : kInfinity});
        }
    }
    return starts;
}

namespace detail {

inline OptimizerSettings settings_for(const FitOptions& options, std::size_t K, bool with_r) {
    OptimizerSettings s;
    s.max_iterations = options.max_iterations;
    s.gradient_tolerance = options.gradient_tolerance;
    s.f_tolerance = options.f_tolerance;
    const auto n = static_cast<Eigen::Index>(K - 1 + (with_r ? 1 : 0));
    s.lower = Eigen::VectorXd::Constant(n, -coords::kLogRatioBound);
    s.upper = Eigen::VectorXd::Constant(n, coords::kLogRatioBound);
    if (with_r) {
        s.lower[n - 1] = coords::kLogitLower;
        s.upper[n - 1] = coords::kLogitUpper;
    }
    return s;
}

inline std::size_t best_index(const std::vector<double>& ells) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ells.size(); ++i)
        if (ells[i] > ells[best] + kTieTolerance) best = i;
    return best;
}

// Partial derivative of f along `dir` at z, central where both sides are
// feasible and one-sided otherwise.
template <class F, class Feasible>
double feasible_derivative(F& f, Feasible& feasible, const std::vector<double>& z, std::size_t i, double h) {
    auto shifted = [&](double delta) {
        auto w = z;
        w[i] += delta;
        return w;
    };
    const auto zp = shifted(h), zm = shifted(-h);
    const bool fp_ok = feasible(zp), fm_ok = feasible(zm);
    if (fp_ok && fm_ok) return (f(zp) - f(zm)) / (2.0 * h);
    if (fp_ok) return (f(zp) - f(z)) / h;
    if (fm_ok) return (f(z) - f(zm)) / h;
    return 0.0;
}

// Projected gradient ascent of ell directly in (q_1..q_{K-1}, s = e^{-r}).
// Used as an independent cross-check of the log-ratio/logit route.
inline ParameterPoint projected_gradient_fit(const LikelihoodModel& model, const ParameterPoint& start,
                                             bool with_r, int max_iterations = 5000) {
    const std::size_t K = model.K();
    auto to_theta = [&](const std::vector<double>& z) {
        ParameterPoint t;
        t.q.assign(z.begin(), z.begin() + static_cast<long>(K - 1));
        double sum = 0.0;
        for (double v : t.q) sum += v;
        t.q.push_back(std::max(0.0, 1.0 - sum));
        t.r = with_r ? (z.back() <= 0.0 ? kInfinity : -std::log(z.back())) : kInfinity;
        return t;
    };
    auto objective = [&](const std::vector<double>& z) {
        const auto t = to_theta(z);
        const double v = model.ell(t.q, t.r);
        if (!std::isfinite(v)) throw NumericError("projected gradient: objective is not finite");
        return v;
    };
    auto feasible = [&](const std::vector<double>& z) {
        double sum = 0.0;
        for (std::size_t k = 0; k + 1 < K; ++k) {
            if (z[k] < 0.0) return false;
            sum += z[k];
        }
        if (sum > 1.0) return false;
        return !with_r || (z.back() >= 0.0 && z.back() <= 1.0);
    };
    auto project = [&](std::vector<double> z) {
        std::vector<double> full(z.begin(), z.begin() + static_cast<long>(K - 1));
        double sum = 0.0;
        for (double v : full) sum += v;
        full.push_back(1.0 - sum);
        full = project_to_simplex(std::move(full));
        for (std::size_t k = 0; k + 1 < K; ++k) z[k] = full[k];
        if (with_r) z.back() = std::clamp(z.back(), 0.0, 1.0);
        return z;
    };

    std::vector<double> z(start.q.begin(), start.q.end() - 1);
    if (with_r) z.push_back(start.is_admixture() ? 0.0 : std::exp(-start.r));
    z = project(z);
    double fz = objective(z);
    double alpha = 1.0;
    const double h = 1e-6;
    for (int iter = 0; iter < max_iterations; ++iter) {
        std::vector<double> g(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) g[i] = feasible_derivative(objective, feasible, z, i, h);
        alpha = std::min(alpha * 4.0, 1e6);
        bool moved = false;
        std::vector<double> z_new;
        double f_new = fz;
        for (int bt = 0; bt < 80; ++bt, alpha *= 0.5) {
            z_new = z;
            for (std::size_t i = 0; i < z.size(); ++i) z_new[i] += alpha * g[i];
            z_new = project(z_new);
            double ascent = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) ascent += g[i] * (z_new[i] - z[i]);
            f_new = objective(z_new);
            if (f_new >= fz + 1e-4 * ascent && ascent >= 0.0) {
                moved = true;
                break;
            }
        }
        if (!moved) break;
        double dz = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) dz = std::max(dz, std::abs(z_new[i] - z[i]));
        const double df = f_new - fz;
        z = std::move(z_new);
        fz = f_new;
        if (dz < 1e-12 || df < 1e-14) break;
    }
    return to_theta(z);
}

} // namespace detail

// Maximizes the Admixture log-likelihood over the simplex.
inline ModelFit fit_admixture(const LikelihoodModel& model, const FitOptions& options = {}) {
    const std::size_t K = model.K();
    if (K < 2) throw InvalidInput("need at least two populations");
    if (model.observed_count() == 0) throw InvalidInput("all markers are missing");
    const double M = static_cast<double>(model.m_total());
    auto objective = [&](const Eigen::VectorXd& x) {
        const auto q = coords::q_from_log_ratio(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
        return -model.admixture_log_likelihood(q) / M;
    };
    ModelFit fit;
    fit.model = ModelKind::admixture;
    fit.m_total = model.m_total();
    const auto starts = start_points(K, std::max(1, options.starts), options.seed, ModelKind::admixture);
    std::vector<bool> converged;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        ParameterPoint theta;
        bool ok = false;
        if (options.optimizer == OptimizerKind::projected_gradient) {
            theta = detail::projected_gradient_fit(model, starts[i], false);
            ok = true;
        } else {
            OptimizerResult res;
            try {
                res = bfgs_minimize(objective, coords::to_free(starts[i], false), detail::settings_for(options, K, false));
            } catch (const NumericError& e) {
                throw NumericError("admixture fit, start " + std::to_string(i) + ": " + e.what());
            }
            theta = coords::from_free(res.x, false);
            ok = res.converged;
        }
        fit.start_ells.push_back(model.admixture_log_likelihood(theta.q) / M);
        fit.start_thetas.push_back(std::move(theta));
        converged.push_back(ok);
    }
    const auto best = detail::best_index(fit.start_ells);
    fit.theta_hat = fit.start_thetas[best];
    fit.ell_hat = fit.start_ells[best];
    fit.converged = converged[best];
    fit.n_starts = static_cast<int>(starts.size());
    const auto [lo, hi] = std::minmax_element(fit.start_ells.begin(), fit.start_ells.end());
    if (starts.size() > 1 && *hi - *lo < kTieTolerance) {
        double spread = 0.0;
        for (const auto& t : fit.start_thetas)
            for (std::size_t k = 0; k < K; ++k) spread = std::max(spread, std::abs(t.q[k] - fit.theta_hat.q[k]));
        if (spread > 1e-3) fit.warnings.push_back("flat likelihood: ancestry proportions are not identifiable");
    }
    return fit;
}

inline ModelFit fit_admixture(const GenotypeData& data, const AlleleFrequencySet& freqs, const FitOptions& options = {}) {
    return fit_admixture(LikelihoodModel(data, freqs, options.emission), options);
}

// Maximizes the Linkage log-likelihood over simplex x [0, inf]. The Admixture
// fit enters as start 0 (the r = infinity boundary), so the result never has
// a lower ell than the nested model and ties resolve to r = infinity.
inline ModelFit fit_linkage(const LikelihoodModel& model, const FitOptions& options, const ModelFit& null_fit) {
    if (!model.has_map()) throw InvalidInput("linkage fit requires a genetic map");
    const std::size_t K = model.K();
    const double M = static_cast<double>(model.m_total());
    auto objective = [&](const Eigen::VectorXd& x) {
        const auto q = coords::q_from_log_ratio(std::span<const double>(x.data(), static_cast<std::size_t>(x.size() - 1)));
        return -model.log_likelihood(q, coords::r_from_logit(x[x.size() - 1])) / M;
    };
    ModelFit fit;
    fit.model = ModelKind::linkage;
    fit.m_total = model.m_total();
    fit.start_thetas.push_back(null_fit.theta_hat);
    fit.start_ells.push_back(null_fit.ell_hat);
    std::vector<bool> converged{null_fit.converged};

    const auto starts = start_points(K, std::max(1, options.starts), options.seed, ModelKind::linkage);
    for (std::size_t i = 0; i < starts.size(); ++i) {
        ParameterPoint theta;
        bool ok = false;
        if (options.optimizer == OptimizerKind::projected_gradient) {
            theta = detail::projected_gradient_fit(model, starts[i], true);
            ok = true;
        } else {
            OptimizerResult res;
            try {
                res = bfgs_minimize(objective, coords::to_free(starts[i], true), detail::settings_for(options, K, true));
            } catch (const NumericError& e) {
                throw NumericError("linkage fit, start " + std::to_string(i) + ": " + e.what());
            }
            theta = coords::from_free(res.x, true);
            ok = res.converged;
        }
        fit.start_ells.push_back(model.ell(theta.q, theta.r));
        fit.start_thetas.push_back(std::move(theta));
        converged.push_back(ok);
    }
    const auto best = detail::best_index(fit.start_ells);
    fit.theta_hat = fit.start_thetas[best];
    fit.ell_hat = fit.start_ells[best];
    fit.converged = converged[best];
    fit.n_starts = static_cast<int>(fit.start_ells.size());
    fit.warnings = null_fit.warnings;
    return fit;
}

inline ModelFit fit_linkage(const LikelihoodModel& model, const FitOptions& options = {}) {
    return fit_linkage(model, options, fit_admixture(model, options));
}

inline ModelFit fit_linkage(const GenotypeData& data, const AlleleFrequencySet& freqs, const GeneticMap& map,
                            const FitOptions& options = {}) {
    return fit_linkage(LikelihoodModel(data, freqs, map, options.emission), options);
}

// Asymptotic covariance J^{-1} / M_total with J = -Hessian of ell.
struct CovarianceEstimate {
    Eigen::MatrixXd free_coordinates;   // (y_1..y_{K-1}[, u])
    Eigen::MatrixXd natural;            // (q_1..q_K[, r]) via the chain rule
    std::vector<std::string> free_labels;
    std::vector<std::string> natural_labels;
    std::string parameterization;
    std::size_t m_total = 0;
    bool boundary = false;
    bool reliable = true;
    std::vector<std::string> warnings;
};

namespace detail {

// Inverse of a symmetric matrix, falling back to the pseudo-inverse over the
// positive part of the spectrum when it is not positive definite.
inline Eigen::MatrixXd inverse_information(const Eigen::MatrixXd& J, bool& singular) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
    const auto& values = eig.eigenvalues();
    const double scale = std::max(values.cwiseAbs().maxCoeff(), 1e-300);
    const double tol = 1e-10 * scale;
    singular = values.minCoeff() <= tol;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(values.size());
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (values[i] > tol) inv[i] = 1.0 / values[i];
    const Eigen::MatrixXd C = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    return 0.5 * (C + C.transpose());
}

} // namespace detail

// Covariance from an arbitrary normalized log-likelihood `ell` of free
// coordinates, evaluated at its maximizer x_hat.
inline CovarianceEstimate covariance_from_objective(const std::function<double(const Eigen::VectorXd&)>& ell,
                                                    const Eigen::VectorXd& x_hat, std::size_t m_total) {
    if (m_total == 0) throw InvalidInput("m_total must be positive");
    CovarianceEstimate est;
    est.m_total = m_total;
    const Eigen::MatrixXd J = -numerical_hessian(ell, x_hat);
    bool singular = false;
    est.free_coordinates = detail::inverse_information(J, singular) / static_cast<double>(m_total);
    if (singular) {
        est.reliable = false;
        est.warnings.push_back("Fisher information is singular; pseudo-inverse used");
    }
    est.natural = est.free_coordinates;
    est.parameterization = "free";
    for (Eigen::Index i = 0; i < x_hat.size(); ++i) est.free_labels.push_back("x" + std::to_string(i + 1));
    est.natural_labels = est.free_labels;
    return est;
}

inline CovarianceEstimate covariance_mle(const ModelFit& fit, const LikelihoodModel& model) {
    const bool with_r = fit.model == ModelKind::linkage;
    const std::size_t K = model.K();
    const double M = static_cast<double>(model.m_total());
    if (fit.theta_hat.K() != K) throw StructuralError("fit and data disagree on K");
    const Eigen::VectorXd x_hat = coords::to_free(fit.theta_hat, with_r);
    std::function<double(const Eigen::VectorXd&)> ell = [&](const Eigen::VectorXd& x) {
        const auto theta = coords::from_free(x, with_r);
        return model.log_likelihood(theta.q, theta.r) / M;
    };
    auto est = covariance_from_objective(ell, x_hat, model.m_total());
    est.free_labels.clear();
    est.natural_labels.clear();
    for (std::size_t k = 0; k + 1 < K; ++k) est.free_labels.push_back("y" + std::to_string(k + 1));
    if (with_r) est.free_labels.push_back("u");
    for (std::size_t k = 0; k < K; ++k) est.natural_labels.push_back("q" + std::to_string(k + 1));
    if (with_r) est.natural_labels.push_back("r");
    const Eigen::MatrixXd G = coords::natural_jacobian(x_hat, with_r);
    est.natural = G * est.free_coordinates * G.transpose();
    est.natural = 0.5 * (est.natural + est.natural.transpose());
    est.parameterization = with_r ? "free=(log q_k/q_K, logit e^{-r}); natural=(q, r)"
                                  : "free=(log q_k/q_K); natural=(q)";
    est.boundary = fit.boundary();
    if (est.boundary) {
        est.reliable = false;
        est.warnings.push_back("estimate on the boundary of the parameter space; covariance is unreliable");
    }
    if (!fit.converged) {
        est.reliable = false;
        est.warnings.push_back("fit did not converge");
    }
    return est;
}

inline CovarianceEstimate covariance_mle(const ModelFit& fit, const GenotypeData& data, const AlleleFrequencySet& freqs,
                                         const GeneticMap& map, EmissionMode mode = EmissionMode::standard) {
    return covariance_mle(fit, LikelihoodModel(data, freqs, map, mode));
}

// Joint fit of N individuals with individual ancestries and one shared r.
struct PopulationFit {
    std::vector<std::vector<double>> q_hat;
    double r_hat = kInfinity;
    double ell_hat = -kInfinity;       // total log-likelihood / sum of M_total
    double total_log_likelihood = -kInfinity;
    std::size_t n = 0;
    std::size_t m_total = 0;           // summed over individuals
    bool converged = false;
    int iterations = 0;

    std::size_t parameter_count() const {
        if (q_hat.empty()) return 0;
        return n * (q_hat.front().size() - 1) + 1;
    }
};

namespace detail {

inline std::vector<LikelihoodModel> build_models(const std::vector<GenotypeData>& individuals,
                                                 const AlleleFrequencySet& freqs, const GeneticMap& map,
                                                 EmissionMode mode) {
    if (individuals.empty()) throw InvalidInput("population fit needs at least one individual");
    std::vector<LikelihoodModel> models;
    models.reserve(individuals.size());
    for (const auto& data : individuals) models.emplace_back(data, freqs, map, mode);
    return models;
}

// Best q for one individual with r held fixed, starting from q0.
inline std::vector<double> fit_q_at_r(const LikelihoodModel& model, const std::vector<double>& q0, double r,
                                      const FitOptions& options) {
    const double M = static_cast<double>(model.m_total());
    auto objective = [&](const Eigen::VectorXd& y) {
        const auto q = coords::q_from_log_ratio(std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
        return -model.log_likelihood(q, r) / M;
    };
    const auto res = bfgs_minimize(objective, coords::to_free({q0, kInfinity}, false),
                                   settings_for(options, model.K(), false));
    return coords::q_from_log_ratio(std::span<const double>(res.x.data(), static_cast<std::size_t>(res.x.size())));
}

} // namespace detail

// Null model for a population: independent Admixture fits (r = infinity).
inline PopulationFit fit_population_admixture(const std::vector<GenotypeData>& individuals,
                                              const AlleleFrequencySet& freqs, const FitOptions& options = {}) {
    if (individuals.empty()) throw InvalidInput("population fit needs at least one individual");
    PopulationFit fit;
    fit.n = individuals.size();
    fit.converged = true;
    double total = 0.0;
    for (const auto& data : individuals) {
        const auto f = fit_admixture(data, freqs, options);
        fit.q_hat.push_back(f.theta_hat.q);
        total += f.ell_hat * static_cast<double>(f.m_total);
        fit.m_total += f.m_total;
        fit.converged = fit.converged && f.converged;
    }
    fit.total_log_likelihood = total;
    fit.ell_hat = total / static_cast<double>(fit.m_total);
    return fit;
}

// Alternative model for a population: per-individual q and one shared r.
// Alternates per-individual q updates at fixed r with a golden-section
// search over log r, until the joint log-likelihood gains less than 1e-9
// (in ell units). The null fit enters as the r = infinity candidate.
inline PopulationFit fit_population(const std::vector<GenotypeData>& individuals, const AlleleFrequencySet& freqs,
                                    const GeneticMap& map, const FitOptions& options, const PopulationFit& null_fit) {
    const auto models = detail::build_models(individuals, freqs, map, options.emission);
    const std::size_t N = models.size();
    std::size_t m_sum = 0;
    for (const auto& m : models) m_sum += m.m_total();
    const double M = static_cast<double>(m_sum);

    auto joint = [&](const std::vector<std::vector<double>>& qs, double r) {
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i) total += models[i].log_likelihood(qs[i], r);
        return total / M;
    };
    auto update_q = [&](std::vector<std::vector<double>>& qs, double r) {
        for (std::size_t i = 0; i < N; ++i) qs[i] = detail::fit_q_at_r(models[i], qs[i], r, options);
    };

    const double log_r_lo = std::log(1e-3), log_r_hi = std::log(1e4);
    // Coarse scan for the initial r, each with q re-optimized from the null fit.
    std::vector<std::vector<double>> qs = null_fit.q_hat;
    double r = kStartRGrid[0];
    double current = -kInfinity;
    for (double r0 : kStartRGrid) {
        auto trial = null_fit.q_hat;
        update_q(trial, r0);
        const double v = joint(trial, r0);
        if (v > current) {
            current = v;
            qs = std::move(trial);
            r = r0;
        }
    }

    PopulationFit fit;
    fit.n = N;
    fit.m_total = m_sum;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        // r-step: scan on a log grid to bracket, then golden section
        constexpr int kScan = 40;
        double best_lr = std::log(r), best_v = joint(qs, r);
        for (int j = 0; j <= kScan; ++j) {
            const double lr = log_r_lo + (log_r_hi - log_r_lo) * j / kScan;
            const double v = joint(qs, std::exp(lr));
            if (v > best_v) {
                best_v = v;
                best_lr = lr;
            }
        }
        const double width = (log_r_hi - log_r_lo) / kScan;
        const double lr = golden_section_maximize([&](double t) { return joint(qs, std::exp(t)); },
                                                  std::max(log_r_lo, best_lr - width),
                                                  std::min(log_r_hi, best_lr + width), 1e-10);
        if (joint(qs, std::exp(lr)) >= best_v) best_lr = lr;
        r = std::exp(best_lr);
        update_q(qs, r);
        const double next = joint(qs, r);
        const double gain = next - current;
        current = std::max(current, next);
        if (gain < 1e-9) {
            fit.converged = true;
            ++iter;
            break;
        }
    }
    fit.iterations = iter;
    if (null_fit.ell_hat + kTieTolerance >= current) {
        fit.q_hat = null_fit.q_hat;
        fit.r_hat = kInfinity;
        fit.ell_hat = null_fit.ell_hat;
        fit.total_log_likelihood = null_fit.total_log_likelihood;
    } else {
        fit.q_hat = std::move(qs);
        fit.r_hat = r;
        fit.ell_hat = current;
        fit.total_log_likelihood = current * M;
    }
    return fit;
}

inline PopulationFit fit_population(const std::vector<GenotypeData>& individuals, const AlleleFrequencySet& freqs,
                                    const GeneticMap& map, const FitOptions& options = {}) {
    return fit_population(individuals, freqs, map, options, fit_population_admixture(individuals, freqs, options));
}

} // namespace linkmix
