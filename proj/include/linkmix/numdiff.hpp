#pragma once

#include <linkmix/errors.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace linkmix {

inline double difference_step(double x) { return std::max(1e-5, 1e-5 * std::abs(x)); }

namespace detail {
template <class F>
double checked_eval(F& f, const Eigen::VectorXd& x) {
    const double v = f(x);
    if (!std::isfinite(v)) throw NumericError("objective is not finite during numerical differentiation");
    return v;
}
} // namespace detail

// Central differences with step max(1e-5, 1e-5 |x_i|).
template <class F>
Eigen::VectorXd numerical_gradient(F&& f, const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = difference_step(x[i]);
        xp[i] = x[i] + h;
        const double fp = detail::checked_eval(f, xp);
        xp[i] = x[i] - h;
        const double fm = detail::checked_eval(f, xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central differences of the numerical gradient, symmetrized.
template <class F>
Eigen::MatrixXd numerical_hessian(F&& f, const Eigen::VectorXd& x) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double h = difference_step(x[i]);
        xp[i] = x[i] + h;
        const Eigen::VectorXd gp = numerical_gradient(f, xp);
        xp[i] = x[i] - h;
        const Eigen::VectorXd gm = numerical_gradient(f, xp);
        xp[i] = x[i];
        H.row(i) = ((gp - gm) / (2.0 * h)).transpose();
    }
    return 0.5 * (H + H.transpose());
}

} // namespace linkmix
