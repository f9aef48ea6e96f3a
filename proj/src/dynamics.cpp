#include "qfc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

namespace qfc {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Extra isotropic damping beyond gamma/2 in the drift.
double scheme_damping(const SystemParams& p, SchemeKind scheme) {
    return scheme == SchemeKind::AnnihilationHomodyne ? p.k : 0.0;
}

// A S + S A^T for A = [[a, b], [c, d]] acting on a symmetric S.
Sym2 drift_flow(double a, double b, double c, double d, const CovarianceMatrix& s) {
    Sym2 r;
    r.xx = 2.0 * (a * s.sxx + b * s.sxp);
    r.pp = 2.0 * (c * s.sxp + d * s.spp);
    r.xp = c * s.sxx + b * s.spp + (a + d) * s.sxp;
    return r;
}

// Conditioning source V = sum_i K_i K_i^T fed to the estimator covariance;
// the same quadratic terms are subtracted inside the sigma_c measurement stage.
Sym2 conditioning_source(const CovarianceMatrix& c, const SystemParams& p,
                         SchemeKind scheme) {
    Sym2 v;
    const double keta = p.k * p.eta;
    switch (scheme) {
        case SchemeKind::QndPosition:
        case SchemeKind::PureMeasurement:
            v.xx = 8.0 * keta * c.sxx * c.sxx;
            v.pp = 8.0 * keta * c.sxp * c.sxp;
            v.xp = 8.0 * keta * c.sxx * c.sxp;
            break;
        case SchemeKind::AnnihilationHomodyne: {
            const double ax = c.sxx - 0.5;
            v.xx = 4.0 * keta * ax * ax;
            v.pp = 4.0 * keta * c.sxp * c.sxp;
            v.xp = 4.0 * keta * ax * c.sxp;
            break;
        }
        case SchemeKind::DualNoDamp:
            v.xx = 4.0 * keta * (c.sxx * c.sxx + 0.25);
            v.pp = 4.0 * keta * c.sxp * c.sxp;
            v.xp = 4.0 * keta * c.sxx * c.sxp;
            break;
    }
    return v;
}

StageRates sigma_c_stages(const CovarianceMatrix& c, const SystemParams& p,
                          SchemeKind scheme) {
    StageRates r;
    if (scheme != SchemeKind::PureMeasurement) {
        const double src = p.gamma * (p.nbar + 0.5);
        r.bath.xx = -p.gamma * c.sxx + src;
        r.bath.pp = -p.gamma * c.spp + src;
        r.bath.xp = -p.gamma * c.sxp;
        r.hamiltonian.xx = 2.0 * p.omega * c.sxp;
        r.hamiltonian.pp = -2.0 * p.omega * c.sxp;
        r.hamiltonian.xp = p.omega * (c.spp - c.sxx);
    }
    const Sym2 v = conditioning_source(c, p, scheme);
    switch (scheme) {
        case SchemeKind::QndPosition:
        case SchemeKind::PureMeasurement:
            r.measurement.xx = -v.xx;
            r.measurement.pp = 2.0 * p.k - v.pp;
            r.measurement.xp = -v.xp;
            break;
        case SchemeKind::AnnihilationHomodyne:
            r.measurement.xx = p.k - 2.0 * p.k * c.sxx - v.xx;
            r.measurement.pp = p.k - 2.0 * p.k * c.spp - v.pp;
            r.measurement.xp = -2.0 * p.k * c.sxp - v.xp;
            break;
        case SchemeKind::DualNoDamp:
            r.measurement.xx = p.k - v.xx;
            r.measurement.pp = p.k - v.pp;
            r.measurement.xp = -v.xp;
            break;
    }
    return r;
}

Eigen::Matrix3d vectorized_drift(double a, double b, double c, double d) {
    Eigen::Matrix3d m;
    m << 2 * a, 0, 2 * b, 0, 2 * d, 2 * c, c, b, a + d;
    return m;
}

}  // namespace

FeedbackLaw kalman_xp(double g) {
    FeedbackLaw law;
    law.estimator = Estimator::KalmanXP;
    law.a_x = g;
    law.b_p = g;
    return law;
}

FeedbackLaw kalman_x_only(double g) {
    FeedbackLaw law;
    law.estimator = Estimator::KalmanXOnly;
    law.b_x = g;
    law.b_p = g;
    return law;
}

FeedbackLaw direct_law(double a_x, double b_x) {
    FeedbackLaw law;
    law.estimator = Estimator::Direct;
    law.a_x = a_x;
    law.b_x = b_x;
    return law;
}

StageRates sigma_c_rhs(const CovarianceMatrix& cov_c, const SystemParams& params,
                       SchemeKind scheme) {
    validate(cov_c);
    return sigma_c_stages(cov_c, params, scheme);
}

StageRates sigma_m_rhs(const CovarianceMatrix& cov_m, const CovarianceMatrix& cov_c,
                       const FeedbackLaw& law, const SystemParams& params,
                       SchemeKind scheme) {
    if (law.estimator == Estimator::Direct) {
        throw UnsupportedEstimator(
            "direct feedback has no innovation-driven estimator flow; "
            "use direct_moment_rhs");
    }
    validate(cov_m, true);
    validate(cov_c);

    StageRates r;
    r.bath.xx = -params.gamma * cov_m.sxx;
    r.bath.pp = -params.gamma * cov_m.spp;
    r.bath.xp = -params.gamma * cov_m.sxp;
    r.hamiltonian = drift_flow(0.0, params.omega, -params.omega, 0.0, cov_m);
    r.feedback = drift_flow(-law.a_x, -law.a_p, -law.b_x, -law.b_p, cov_m);
    const double kd = scheme_damping(params, scheme);
    r.measurement = conditioning_source(cov_c, params, scheme);
    if (kd != 0.0) {
        r.measurement.xx -= 2.0 * kd * cov_m.sxx;
        r.measurement.pp -= 2.0 * kd * cov_m.spp;
        r.measurement.xp -= 2.0 * kd * cov_m.sxp;
    }
    return r;
}

StageRates direct_moment_rhs(const CovarianceMatrix& cov_m, const CovarianceMatrix& cov_c,
                             const FeedbackLaw& law, const SystemParams& params) {
    const double keta = params.k * params.eta;
    if (!(keta > 0.0)) {
        throw EfficiencyZero("fed-back record noise diverges at k*eta = "
                             + num(keta));
    }
    validate(cov_m, true);
    validate(cov_c);

    StageRates r;
    r.bath.xx = -params.gamma * cov_m.sxx;
    r.bath.pp = -params.gamma * cov_m.spp;
    r.bath.xp = -params.gamma * cov_m.sxp;
    r.hamiltonian = drift_flow(0.0, params.omega, -params.omega, 0.0, cov_m);

    // conditioning source of the matched filter; the kick terms below are
    // what a raw-record feedback adds on top of it
    r.measurement = conditioning_source(cov_c, params, SchemeKind::QndPosition);

    r.feedback = drift_flow(-law.a_x, 0.0, -law.b_x, 0.0, cov_m);
    const double inv = 1.0 / (8.0 * keta);
    r.feedback.xx += -2.0 * cov_c.sxx * law.a_x + law.a_x * law.a_x * inv;
    r.feedback.pp += -2.0 * cov_c.sxp * law.b_x + law.b_x * law.b_x * inv;
    r.feedback.xp += -(cov_c.sxx * law.b_x + cov_c.sxp * law.a_x)
                     + law.a_x * law.b_x * inv;
    return r;
}

double sigma_c_residual(const CovarianceMatrix& cov_c, const SystemParams& params,
                        SchemeKind scheme) {
    const Sym2 t = sigma_c_rhs(cov_c, params, scheme).total();
    return std::max({std::fabs(t.xx), std::fabs(t.pp), std::fabs(t.xp)});
}

CovarianceMatrix steady_sigma_c(const SystemParams& params, SchemeKind scheme) {
    if (scheme == SchemeKind::PureMeasurement) {
        throw NoConvergence(
            "backaction heats p at rate 2k with nothing damping it; "
            "no stationary covariance");
    }
    if (params.k == 0.0) {
        if (params.gamma == 0.0) {
            throw NoConvergence("no contraction with k = 0 and gamma = 0");
        }
        const double v = params.nbar + 0.5;
        return {v, v, 0.0};
    }

    CovarianceMatrix s{params.nbar + 0.5, params.nbar + 0.5, 0.0};
    auto rhs = [&](const CovarianceMatrix& c) {
        return sigma_c_stages(c, params, scheme).total();
    };
    auto resid = [&](const CovarianceMatrix& c) {
        const Sym2 t = rhs(c);
        return std::max({std::fabs(t.xx), std::fabs(t.pp), std::fabs(t.xp)});
    };
    const double blow_up = 1e12 * (params.nbar + 1.0);

    double res = resid(s);
    for (int round = 0; round < 3 && res >= 1e-13; ++round) {
        // relax toward the attractor with a step bounded by the fastest rate
        const double march_tol = round == 0 ? 1e-6 : 1e-11;
        double res_window = res;
        for (long it = 0; it < 5000000; ++it) {
            // stiffness comes from the conditioning quadratics, which involve
            // sxx and sxp only; spp enters the flow linearly
            const double cond = std::max(std::fabs(s.sxx), std::fabs(s.sxp));
            const double rate = std::max({2.0 * params.omega, params.gamma,
                                          2.0 * params.k,
                                          16.0 * params.k * params.eta * cond});
            const double dt = 0.1 / rate;
            const Sym2 k1 = rhs(s);
            auto step = [&](double h, const Sym2& d) {
                return CovarianceMatrix{s.sxx + h * d.xx, s.spp + h * d.pp,
                                        s.sxp + h * d.xp};
            };
            const Sym2 k2 = rhs(step(dt / 2, k1));
            const Sym2 k3 = rhs(step(dt / 2, k2));
            const Sym2 k4 = rhs(step(dt, k3));
            s.sxx += dt / 6 * (k1.xx + 2 * k2.xx + 2 * k3.xx + k4.xx);
            s.spp += dt / 6 * (k1.pp + 2 * k2.pp + 2 * k3.pp + k4.pp);
            s.sxp += dt / 6 * (k1.xp + 2 * k2.xp + 2 * k3.xp + k4.xp);
            if (std::max(s.sxx, s.spp) > blow_up) {
                throw NoConvergence("covariance march diverged, residual "
                                    + num(resid(s)));
            }
            res = resid(s);
            if (res < march_tol) break;
            if ((it & 63) == 63) {
                // near the root with a weakly contracting tail: the Newton
                // polish below finishes faster than the march
                if (res < 1e-2 && res > 0.5 * res_window) break;
                res_window = res;
            }
        }

        // Newton polish with a central-difference Jacobian
        for (int it = 0; it < 30 && res >= 1e-13; ++it) {
            Eigen::Matrix3d J;
            Eigen::Vector3d F;
            const Sym2 f0 = rhs(s);
            F << f0.xx, f0.pp, f0.xp;
            double* entries[3] = {&s.sxx, &s.spp, &s.sxp};
            for (int j = 0; j < 3; ++j) {
                const double h = 1e-6 * std::max(1.0, std::fabs(*entries[j]));
                const double saved = *entries[j];
                *entries[j] = saved + h;
                const Sym2 fp = rhs(s);
                *entries[j] = saved - h;
                const Sym2 fm = rhs(s);
                *entries[j] = saved;
                J(0, j) = (fp.xx - fm.xx) / (2 * h);
                J(1, j) = (fp.pp - fm.pp) / (2 * h);
                J(2, j) = (fp.xp - fm.xp) / (2 * h);
            }
            const Eigen::Vector3d d = J.partialPivLu().solve(-F);
            if (!d.allFinite()) break;
            s.sxx += d(0);
            s.spp += d(1);
            s.sxp += d(2);
            res = resid(s);
        }
    }
    if (res >= 1e-12) {
        throw NoConvergence("stationary covariance residual stalled at " + num(res));
    }
    return s;
}

CovarianceMatrix steady_sigma_m(const CovarianceMatrix& cov_c, const FeedbackLaw& law,
                                const SystemParams& params, SchemeKind scheme) {
    validate(cov_c);
    double a, b, c, d;
    Sym2 v;
    if (law.estimator == Estimator::Direct) {
        if (scheme != SchemeKind::QndPosition) {
            throw UnsupportedScheme(
                "direct feedback is defined on the position record only");
        }
        const double keta = params.k * params.eta;
        if (!(keta > 0.0)) {
            throw EfficiencyZero("fed-back record noise diverges at k*eta = "
                                 + num(keta));
        }
        a = -params.gamma / 2 - law.a_x;
        b = params.omega;
        c = -params.omega - law.b_x;
        d = -params.gamma / 2;
        // injected-noise covariance B B^T with B = K - (a_x, b_x)/sqrt(8 k eta)
        const double sq = std::sqrt(8.0 * keta);
        const double bx = sq * cov_c.sxx - law.a_x / sq;
        const double bp = sq * cov_c.sxp - law.b_x / sq;
        v.xx = bx * bx;
        v.pp = bp * bp;
        v.xp = bx * bp;
    } else {
        const double kd = scheme_damping(params, scheme);
        a = -params.gamma / 2 - kd - law.a_x;
        b = params.omega - law.a_p;
        c = -params.omega - law.b_x;
        d = -params.gamma / 2 - kd - law.b_p;
        v = conditioning_source(cov_c, params, scheme);
    }

    // Hurwitz check on the vectorized drift: eigenvalues are {2 mu, mu1+mu2}
    // for the 2x2 eigenvalues mu
    const double tr = a + d;
    const double disc = (a - d) * (a - d) + 4.0 * b * c;
    const double max_re =
        disc >= 0.0 ? (tr + std::sqrt(disc)) / 2.0 : tr / 2.0;
    if (2.0 * max_re >= -1e-12) {
        throw NotHurwitz("drift eigenvalue real part " + num(2.0 * max_re)
                         + " is not negative");
    }

    const Eigen::Matrix3d A3 = vectorized_drift(a, b, c, d);
    Eigen::Vector3d q;
    q << v.xx, v.pp, v.xp;
    const Eigen::Vector3d x = A3.partialPivLu().solve(-q);
    return {x(0), x(1), x(2)};
}

std::array<std::complex<double>, 3> stability_eigenvalues(const FeedbackLaw& law,
                                                          const SystemParams& params) {
    const double s = law.a_x + law.b_p + params.gamma;
    const double disc = (law.a_x - law.b_p) * (law.a_x - law.b_p)
                        - 4.0 * (params.omega - law.a_p) * (params.omega + law.b_x);
    const std::complex<double> sq = std::sqrt(std::complex<double>(disc, 0.0));
    return {std::complex<double>(-s, 0.0), -s + sq, -s - sq};
}

std::array<double, 4> mean_drift(const FeedbackLaw& law, const SystemParams& params,
                                 SchemeKind scheme) {
    const bool pure = scheme == SchemeKind::PureMeasurement;
    const double gd = pure ? 0.0 : params.gamma / 2 + scheme_damping(params, scheme);
    const double w = pure ? 0.0 : params.omega;
    return {-gd - law.a_x, w - law.a_p, -w - law.b_x, -gd - law.b_p};
}

}  // namespace qfc
