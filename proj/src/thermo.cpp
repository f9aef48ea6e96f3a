#include "qfc/thermo.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace qfc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// dS/dt through sigma under the symmetric rate matrix M:
// d(det) = tr[adj(sigma) M], dS = f'(nu)/(2 nu) d(det).
double phi_flow(const CovarianceMatrix& s, const Sym2& m) {
    const double nu = std::sqrt(s.det());
    const double slope = entropy_slope(nu);
    if (slope == 0.0) return 0.0;
    return slope / (2.0 * nu)
           * (s.spp * m.xx + s.sxx * m.pp - 2.0 * s.sxp * m.xp);
}

// Raw backaction of the unobserved channel on a covariance sigma; this is the
// measurement stage of the averaged (unconditional) flow.
Sym2 backaction_matrix(const SystemParams& p, SchemeKind scheme,
                       const CovarianceMatrix& sigma) {
    Sym2 d;
    switch (scheme) {
        case SchemeKind::QndPosition:
        case SchemeKind::PureMeasurement:
            d.pp = 2.0 * p.k;
            break;
        case SchemeKind::AnnihilationHomodyne:
            d.xx = p.k - 2.0 * p.k * sigma.sxx;
            d.pp = p.k - 2.0 * p.k * sigma.spp;
            d.xp = -2.0 * p.k * sigma.sxp;
            break;
        case SchemeKind::DualNoDamp:
            d.xx = p.k;
            d.pp = p.k;
            break;
    }
    return d;
}

double inf_norm(const Sym2& s) {
    return std::max({std::fabs(s.xx), std::fabs(s.pp), std::fabs(s.xp)});
}

// Quadratic form e^T M e for a unit vector e.
double quad(const double e[2], const Sym2& m) {
    return e[0] * e[0] * m.xx + e[1] * e[1] * m.pp + 2.0 * e[0] * e[1] * m.xp;
}

bool qnd_type(SchemeKind scheme) {
    return scheme == SchemeKind::QndPosition || scheme == SchemeKind::PureMeasurement;
}

}  // namespace

double heat_rate(const GaussianMoments& moments, const SystemParams& params) {
    return params.omega * params.gamma * (params.nbar - occupation(moments));
}

double qct_rate(const CovarianceMatrix& cov_c, const SystemParams& params,
                SchemeKind scheme) {
    const Sym2 meas = sigma_c_rhs(cov_c, params, scheme).measurement;
    return -phi_flow(cov_c, meas);
}

double s_ba_rate(const CovarianceMatrix& cov_c, const SystemParams& params,
                 SchemeKind scheme) {
    if (!qnd_type(scheme)) {
        throw UnsupportedScheme(
            "backaction does not separate from conditioning for this scheme");
    }
    validate(cov_c);
    const double nu = std::sqrt(cov_c.det());
    return entropy_slope(nu) * params.k * cov_c.sxx / nu;
}

double qci_flow_rate(const CovarianceMatrix& Sigma, const CovarianceMatrix& cov_c,
                     const FeedbackLaw& law, const SystemParams& params,
                     SchemeKind scheme) {
    if (law.estimator == Estimator::Direct) {
        throw UnsupportedEstimator(
            "direct feedback keeps no estimate to hold fixed");
    }
    if (scheme != SchemeKind::QndPosition) {
        throw UnsupportedScheme(
            "estimate-referred information flow needs the position record");
    }
    const CovarianceMatrix m{Sigma.sxx - cov_c.sxx, Sigma.spp - cov_c.spp,
                             Sigma.sxp - cov_c.sxp};
    const StageRates rc = sigma_c_rhs(cov_c, params, scheme);
    const StageRates rm = sigma_m_rhs(m, cov_c, law, params, scheme);
    const Sym2 full = rc.total() + rm.total();
    const Sym2 unobserved =
        rc.bath + rc.hamiltonian + backaction_matrix(params, scheme, cov_c);
    return phi_flow(Sigma, full) - phi_flow(cov_c, unobserved);
}

WorkRates work_rates(const CovarianceMatrix& Sigma, const CovarianceMatrix& sigma_m,
                     const FeedbackLaw& law, const SystemParams& params,
                     SchemeKind scheme) {
    Sym2 m;
    if (law.estimator == Estimator::Direct) {
        const CovarianceMatrix cov_c{Sigma.sxx - sigma_m.sxx, Sigma.spp - sigma_m.spp,
                                     Sigma.sxp - sigma_m.sxp};
        m = direct_moment_rhs(sigma_m, cov_c, law, params).feedback;
    } else {
        // feedback stage of the estimator-covariance flow, A_fb s + s A_fb^T
        m.xx = -2.0 * (law.a_x * sigma_m.sxx + law.a_p * sigma_m.sxp);
        m.pp = -2.0 * (law.b_x * sigma_m.sxp + law.b_p * sigma_m.spp);
        m.xp = -law.b_x * sigma_m.sxx - law.a_p * sigma_m.spp
               - (law.a_x + law.b_p) * sigma_m.sxp;
    }
    m += backaction_matrix(params, scheme, Sigma);

    const ThermalDecomposition d = decompose(Sigma, params);
    WorkRates w;
    w.w_u = -params.omega / 2.0 * quad(d.u_vec, m);
    w.w_v = -params.omega / 2.0 * quad(d.v_vec, m);
    w.w_ext = -params.omega / 2.0 * (m.xx + m.pp);
    return w;
}

double cooling_limit(const CovarianceMatrix& cov_c) {
    return (cov_c.sxx + cov_c.spp) / 2.0 - 0.5;
}

RateReport inequality_report(const CovarianceMatrix& Sigma, const CovarianceMatrix& cov_c,
                             const CovarianceMatrix& sigma_m, const FeedbackLaw& law,
                             const SystemParams& params, SchemeKind scheme) {
    validate(Sigma);
    validate(cov_c);
    validate(sigma_m, true);

    // both flows must actually be stationary before steady identities apply
    const StageRates rc = sigma_c_rhs(cov_c, params, scheme);
    const double c_scale = inf_norm(rc.bath) + inf_norm(rc.hamiltonian)
                           + inf_norm(rc.measurement);
    const double c_res = inf_norm(rc.total());
    if (c_res > 1e-10 * std::max(1.0, c_scale)) {
        throw NotSteady("conditional covariance flow residual " + num(c_res));
    }
    const StageRates rm = law.estimator == Estimator::Direct
                              ? direct_moment_rhs(sigma_m, cov_c, law, params)
                              : sigma_m_rhs(sigma_m, cov_c, law, params, scheme);
    const double m_scale = inf_norm(rm.bath) + inf_norm(rm.hamiltonian)
                           + inf_norm(rm.feedback) + inf_norm(rm.measurement);
    const double m_res = inf_norm(rm.total());
    if (m_res > 1e-10 * std::max(1.0, m_scale)) {
        throw NotSteady("estimator covariance flow residual " + num(m_res));
    }

    RateReport r;
    GaussianMoments avg;
    avg.cov = Sigma;
    r.q_dot = heat_rate(avg, params);

    const WorkRates w = work_rates(Sigma, sigma_m, law, params, scheme);
    r.w_ext = w.w_ext;
    r.w_u = w.w_u;
    r.w_v = w.w_v;

    const ThermalDecomposition d = decompose(Sigma, params);
    r.Tu = d.Tu;
    r.Tv = d.Tv;
    r.TG = d.TG;
    r.T = params.T;

    r.i_qct = qct_rate(cov_c, params, scheme);
    r.n_occ = occupation(avg);
    r.n_min = cooling_limit(cov_c);

    const bool kalman = law.estimator != Estimator::Direct;
    r.s_ba = qnd_type(scheme) ? s_ba_rate(cov_c, params, scheme) : kNaN;
    r.i_qci_s = kalman && scheme == SchemeKind::QndPosition
                    ? qci_flow_rate(Sigma, cov_c, law, params, scheme)
                    : kNaN;

    const double info_sum = r.w_u / r.Tu + r.w_v / r.Tv;
    r.margin_eq10 = r.i_qct - info_sum;
    r.margin_eq11 = r.i_qct - r.w_ext / r.T;
    r.margin_eq12 = info_sum - r.w_ext / r.T;
    if (!std::isnan(r.i_qci_s) && !std::isnan(r.s_ba)) {
        r.margin_eq13 = (-r.i_qci_s - r.s_ba) - info_sum;
        r.margin_eq16 = r.i_qct - (-r.i_qci_s - r.s_ba);
    } else {
        r.margin_eq13 = kNaN;
        r.margin_eq16 = kNaN;
    }
    r.margin_eq17 = r.n_occ - r.n_min;
    return r;
}

RateReport steady_report(const FeedbackLaw& law, const SystemParams& params,
                         SchemeKind scheme) {
    const CovarianceMatrix c = steady_sigma_c(params, scheme);
    const CovarianceMatrix m = steady_sigma_m(c, law, params, scheme);
    const CovarianceMatrix sig{c.sxx + m.sxx, c.spp + m.spp, c.sxp + m.sxp};
    return inequality_report(sig, c, m, law, params, scheme);
}

}  // namespace qfc
