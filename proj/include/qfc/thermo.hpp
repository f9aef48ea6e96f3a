#ifndef QFC_THERMO_HPP
#define QFC_THERMO_HPP

#include "qfc/dynamics.hpp"
#include "qfc/gaussian.hpp"

// Thermodynamic and information rates at an operating point, and the signed
// inequality margins. Margins are RHS - LHS, so a satisfied bound is >= 0.
// Rates are evaluated analytically from stage matrices via the determinant
// flow d(det) = tr[adj(sigma) dsigma]; no finite-dt differencing.

namespace qfc {

struct WorkRates {
    double w_u = 0.0;    // extracted along the hotter principal axis
    double w_v = 0.0;
    double w_ext = 0.0;  // w_u + w_v
};

struct RateReport {
    double q_dot = 0.0;   // heat into the system from the bath
    double w_ext = 0.0;
    double w_u = 0.0;
    double w_v = 0.0;
    double Tu = 0.0;
    double Tv = 0.0;
    double TG = 0.0;
    double T = 0.0;       // bath temperature
    double i_qct = 0.0;   // transfer-entropy rate of the record
    double i_qci_s = 0.0; // information flow vs the frozen estimate; NaN when absent
    double s_ba = 0.0;    // backaction entropy rate; NaN when absent
    double n_occ = 0.0;
    double n_min = 0.0;
    // Signed slack of the bounds; NaN where the bound does not apply.
    double margin_eq10 = 0.0;  // i_qct - (w_u/Tu + w_v/Tv)
    double margin_eq11 = 0.0;  // i_qct - w_ext/T
    double margin_eq12 = 0.0;  // (w_u/Tu + w_v/Tv) - w_ext/T
    double margin_eq13 = 0.0;  // (-i_qci_s - s_ba) - (w_u/Tu + w_v/Tv)
    double margin_eq16 = 0.0;  // i_qct - (-i_qci_s - s_ba)
    double margin_eq17 = 0.0;  // n_occ - n_min
};

// Q_dot = omega * gamma * (nbar - <n>).
double heat_rate(const GaussianMoments& moments, const SystemParams& params);

// Work extracted along the principal axes of Sigma at a zero-mean operating
// point: M = feedback stage of the Sigma flow + D_BA(scheme, Sigma),
// w_u = -(omega/2) u^T M u, w_v likewise, w_ext = -(omega/2) tr M.
// For direct feedback sigma_c = Sigma - sigma_m supplies the injected-noise terms.
WorkRates work_rates(const CovarianceMatrix& Sigma, const CovarianceMatrix& sigma_m,
                     const FeedbackLaw& law, const SystemParams& params,
                     SchemeKind scheme);

// Transfer-entropy rate: -f'(nu_c)/(2 nu_c) tr[adj(sigma_c) M_meas] with
// M_meas the measurement stage (backaction + conditioning) of sigma_c_rhs.
double qct_rate(const CovarianceMatrix& cov_c, const SystemParams& params,
                SchemeKind scheme);

// Backaction entropy rate f'(nu_c) k sxx_c / nu_c. QND position scheme only;
// the homodyne schemes do not split backaction from conditioning.
double s_ba_rate(const CovarianceMatrix& cov_c, const SystemParams& params,
                 SchemeKind scheme);

// Information flow vs the frozen estimate:
// dS(Sigma)/dt over all stages minus dS(sigma_c)/dt over bath + Hamiltonian +
// backaction. Kalman estimators and the QND scheme only.
double qci_flow_rate(const CovarianceMatrix& Sigma, const CovarianceMatrix& cov_c,
                     const FeedbackLaw& law, const SystemParams& params,
                     SchemeKind scheme);

// <n>_min = (sxx_c + spp_c)/2 - 1/2.
double cooling_limit(const CovarianceMatrix& cov_c);

// Full report at a steady operating point (residuals checked, NotSteady
// otherwise). i_qci_s, s_ba and margins 13/16 are NaN unless the estimator is
// Kalman and the scheme is QND (s_ba needs QND only).
RateReport inequality_report(const CovarianceMatrix& Sigma, const CovarianceMatrix& cov_c,
                             const CovarianceMatrix& sigma_m, const FeedbackLaw& law,
                             const SystemParams& params, SchemeKind scheme);

// Convenience: solve sigma_c and sigma_m, form Sigma, and report.
RateReport steady_report(const FeedbackLaw& law, const SystemParams& params,
                         SchemeKind scheme);

}  // namespace qfc

#endif
