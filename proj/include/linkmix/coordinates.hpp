#pragma once

#include <linkmix/types.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace linkmix {

// Unconstrained coordinates used by the optimizers and the numerical
// derivatives:
//   q  <->  y in R^{K-1},  y_k = log(q_k / q_K)   (additive log-ratio, K is the reference)
//   r  <->  u in R,        u = logit(s), s = e^{-r}
// u -> -inf is r = infinity (Admixture); u -> +inf is r = 0.
namespace coords {

inline constexpr double kLogRatioBound = 40.0;
inline constexpr double kLogitLower = -1e4;
inline constexpr double kLogitUpper = 60.0;

inline std::vector<double> q_from_log_ratio(std::span<const double> y) {
    std::vector<double> q(y.size() + 1);
    double top = 0.0;
    for (double v : y) top = std::max(top, v);
    double sum = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) sum += (q[k] = std::exp(y[k] - top));
    sum += (q.back() = std::exp(-top));
    for (auto& v : q) v /= sum;
    return q;
}

inline std::vector<double> log_ratio_from_q(std::span<const double> q) {
    const double tiny = 1e-300;
    const double ref = std::log(std::max(q.back(), tiny));
    std::vector<double> y(q.size() - 1);
    for (std::size_t k = 0; k + 1 < q.size(); ++k)
        y[k] = std::clamp(std::log(std::max(q[k], tiny)) - ref, -kLogRatioBound, kLogRatioBound);
    return y;
}

// r = -log(sigmoid(u)) = log(1 + e^{-u}), evaluated without overflow.
inline double r_from_logit(double u) {
    if (u < -30.0) return -u + std::log1p(std::exp(u));
    return std::log1p(std::exp(-u));
}

// u = logit(e^{-r}) = -r - log(1 - e^{-r}).
inline double logit_from_r(double r) {
    if (std::isinf(r)) return kLogitLower;
    if (r <= 0.0) return kLogitUpper;
    return std::clamp(-r - std::log(-std::expm1(-r)), kLogitLower, kLogitUpper);
}

// dr/du = -(1 - s) with s = sigmoid(u).
inline double dr_dlogit(double u) { return -1.0 / (1.0 + std::exp(u)); }

inline Eigen::VectorXd to_free(const ParameterPoint& theta, bool with_r) {
    const auto y = log_ratio_from_q(theta.q);
    Eigen::VectorXd x(static_cast<Eigen::Index>(y.size() + (with_r ? 1 : 0)));
    for (std::size_t k = 0; k < y.size(); ++k) x[static_cast<Eigen::Index>(k)] = y[k];
    if (with_r) x[x.size() - 1] = logit_from_r(theta.r);
    return x;
}

inline ParameterPoint from_free(const Eigen::VectorXd& x, bool with_r) {
    const Eigen::Index ny = with_r ? x.size() - 1 : x.size();
    ParameterPoint theta;
    theta.q = q_from_log_ratio(std::span<const double>(x.data(), static_cast<std::size_t>(ny)));
    theta.r = with_r ? r_from_logit(x[ny]) : kInfinity;
    return theta;
}

// Jacobian of (q_1..q_K[, r]) with respect to (y_1..y_{K-1}[, u]).
inline Eigen::MatrixXd natural_jacobian(const Eigen::VectorXd& x, bool with_r) {
    const Eigen::Index ny = with_r ? x.size() - 1 : x.size();
    const Eigen::Index K = ny + 1;
    const auto q = q_from_log_ratio(std::span<const double>(x.data(), static_cast<std::size_t>(ny)));
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(K + (with_r ? 1 : 0), x.size());
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index j = 0; j < ny; ++j)
            G(k, j) = q[static_cast<std::size_t>(k)] * ((k == j ? 1.0 : 0.0) - q[static_cast<std::size_t>(j)]);
    if (with_r) G(K, ny) = dr_dlogit(x[ny]);
    return G;
}

} // namespace coords
} // namespace linkmix
