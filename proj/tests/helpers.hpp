#ifndef QFC_TEST_HELPERS_HPP
#define QFC_TEST_HELPERS_HPP

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "qfc/dynamics.hpp"
#include "qfc/gaussian.hpp"

// Shared oracles for the unit suites. These deliberately rebuild quantities
// through independent code paths (dense Eigen solves, explicit formulas) so
// the library implementations are checked against something they don't share
// arithmetic with.

namespace qfc_test {

inline bool close_abs(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

inline bool close_rel(double a, double b, double tol) {
    const double scale = std::max({1.0, std::fabs(a), std::fabs(b)});
    return std::fabs(a - b) <= tol * scale;
}

// Random physical covariance with det >= 1/4: thermal nu in [0.5+eps, nu_max],
// squeezing r in [0, r_max], rotation theta uniform.
inline qfc::CovarianceMatrix random_cov(std::mt19937_64& rng, double nu_max = 8.0,
                                        double r_max = 1.2) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double nu = 0.5 + 1e-3 + (nu_max - 0.5 - 1e-3) * unif(rng);
    const double r = r_max * unif(rng);
    const double th = 2.0 * M_PI * unif(rng);
    const double su = nu * std::exp(2.0 * r);
    const double sv = nu * std::exp(-2.0 * r);
    const double c = std::cos(th), s = std::sin(th);
    qfc::CovarianceMatrix cov;
    cov.sxx = c * c * su + s * s * sv;
    cov.spp = s * s * su + c * c * sv;
    cov.sxp = c * s * (su - sv);
    return cov;
}

// Random PSD matrix for estimator-covariance inputs.
inline qfc::CovarianceMatrix random_psd(std::mt19937_64& rng, double scale = 2.0) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double a = scale * unif(rng), b = scale * unif(rng);
    const double rho = 2.0 * unif(rng) - 1.0;
    qfc::CovarianceMatrix cov;
    cov.sxx = a * a + 1e-6;
    cov.spp = b * b + 1e-6;
    cov.sxp = rho * a * b;
    return cov;
}

inline Eigen::Matrix2d to_eigen(const qfc::CovarianceMatrix& c) {
    Eigen::Matrix2d m;
    m << c.sxx, c.sxp, c.sxp, c.spp;
    return m;
}

inline Eigen::Matrix2d to_eigen(const qfc::Sym2& s) {
    Eigen::Matrix2d m;
    m << s.xx, s.xp, s.xp, s.pp;
    return m;
}

// Dense unconditional steady state: A0 Sigma + Sigma A0^T + Q = 0 solved by
// full-pivot LU on the vectorized 3x3 system assembled here, independent of
// the library's own vectorization helper.
inline qfc::CovarianceMatrix lyapunov_oracle(const Eigen::Matrix2d& A0,
                                             const Eigen::Matrix2d& Q) {
    Eigen::Matrix3d M;
    const double a = A0(0, 0), b = A0(0, 1), c = A0(1, 0), d = A0(1, 1);
    // unknowns (sxx, spp, sxp)
    M << 2 * a, 0, 2 * b,
         0, 2 * d, 2 * c,
         c, b, a + d;
    Eigen::Vector3d q(Q(0, 0), Q(1, 1), Q(0, 1));
    Eigen::Vector3d s = M.fullPivLu().solve(-q);
    return {s(0), s(1), s(2)};
}

// gamma = 0, eta = 1 closed-form stationary conditional covariance (QND):
// sxx^2 = (sqrt(1+16 r^2) - 1) / (32 r^2), r = k/omega; sxp = 4 k sxx^2 / omega;
// spp from the stationary xp equation.
inline qfc::CovarianceMatrix quartic_oracle(double k, double omega) {
    const double r = k / omega;
    const double sxx2 = (std::sqrt(1.0 + 16.0 * r * r) - 1.0) / (32.0 * r * r);
    const double sxx = std::sqrt(sxx2);
    const double sxp = 4.0 * k * sxx2 / omega;
    const double spp = sxx + 8.0 * k * sxx * sxp / omega;
    return {sxx, spp, sxp};
}

}  // namespace qfc_test

#endif
