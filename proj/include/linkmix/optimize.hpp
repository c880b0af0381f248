#pragma once

#include <linkmix/errors.hpp>
#include <linkmix/numdiff.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace linkmix {

struct OptimizerSettings {
    int max_iterations = 500;
    double f_tolerance = 1e-10;
    double gradient_tolerance = 1e-6;
    double max_step = 5.0;        // infinity-norm cap on a single step
    Eigen::VectorXd lower, upper; // optional coordinate caps (empty = none)
};

struct OptimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline void clamp_to_box(Eigen::VectorXd& x, const OptimizerSettings& s) {
    if (s.lower.size() == x.size()) x = x.cwiseMax(s.lower);
    if (s.upper.size() == x.size()) x = x.cwiseMin(s.upper);
}

// Zero gradient components that push against an active cap.
inline Eigen::VectorXd free_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& x, const OptimizerSettings& s) {
    Eigen::VectorXd out = g;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (s.lower.size() == x.size() && x[i] <= s.lower[i] && g[i] > 0.0) out[i] = 0.0;
        if (s.upper.size() == x.size() && x[i] >= s.upper[i] && g[i] < 0.0) out[i] = 0.0;
    }
    return out;
}

} // namespace detail

// Minimizes f by BFGS with numerical gradients and a backtracking Armijo line
// search. Converged when |delta f| < f_tolerance and the gradient norm is
// below gradient_tolerance (or the gradient alone is already below it).
template <class F>
OptimizerResult bfgs_minimize(F&& f, Eigen::VectorXd x, const OptimizerSettings& settings = {}) {
    const Eigen::Index n = x.size();
    detail::clamp_to_box(x, settings);
    auto eval = [&](const Eigen::VectorXd& z) {
        const double v = f(z);
        if (!std::isfinite(v)) throw NumericError("objective is not finite");
        return v;
    };
    OptimizerResult result;
    double fx = eval(x);
    Eigen::VectorXd g = numerical_gradient(f, x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    bool fresh_H = true;

    for (int iter = 0; iter < settings.max_iterations; ++iter) {
        result.iterations = iter;
        const Eigen::VectorXd gfree = detail::free_gradient(g, x, settings);
        if (gfree.norm() < settings.gradient_tolerance && iter == 0) {
            result.converged = true;
            break;
        }
        Eigen::VectorXd dir = -(H * gfree);
        if (gfree.dot(dir) >= 0.0) {
            H.setIdentity();
            fresh_H = true;
            dir = -gfree;
        }
        const double longest = dir.cwiseAbs().maxCoeff();
        if (longest > settings.max_step) dir *= settings.max_step / longest;

        double step = 1.0;
        const double slope = gfree.dot(dir);
        Eigen::VectorXd x_new;
        double f_new = fx;
        bool accepted = false;
        for (int bt = 0; bt < 50; ++bt) {
            x_new = x + step * dir;
            detail::clamp_to_box(x_new, settings);
            f_new = eval(x_new);
            if (f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!fresh_H) {
                H.setIdentity();
                fresh_H = true;
                continue;
            }
            result.converged = gfree.norm() < settings.gradient_tolerance;
            break;
        }
        const Eigen::VectorXd g_new = numerical_gradient(f, x_new);
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g_new - g;
        const double sy = s.dot(y);
        const double delta_f = fx - f_new;
        x = x_new;
        fx = f_new;
        g = g_new;
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh_H) H *= sy / y.squaredNorm();
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
            fresh_H = false;
        }
        const double gnorm = detail::free_gradient(g, x, settings).norm();
        if (std::abs(delta_f) < settings.f_tolerance && gnorm < settings.gradient_tolerance) {
            result.converged = true;
            result.iterations = iter + 1;
            break;
        }
        result.iterations = iter + 1;
    }
    result.x = x;
    result.value = fx;
    result.gradient_norm = detail::free_gradient(g, x, settings).norm();
    if (!result.converged) result.converged = result.gradient_norm < settings.gradient_tolerance;
    return result;
}

// Maximizes a unimodal function on [a, b].
template <class F>
double golden_section_maximize(F&& f, double a, double b, double tolerance = 1e-10, int max_iterations = 200) {
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < max_iterations && (b - a) > tolerance; ++i) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? c : d;
}

// Euclidean projection onto the probability simplex {v >= 0, sum v = 1}.
inline std::vector<double> project_to_simplex(std::vector<double> v) {
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumulative = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cumulative += u[j];
        const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (auto& x : v) x = std::max(x - theta, 0.0);
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= sum;
    return v;
}

} // namespace linkmix
