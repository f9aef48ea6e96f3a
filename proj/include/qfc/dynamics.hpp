#ifndef QFC_DYNAMICS_HPP
#define QFC_DYNAMICS_HPP

#include <array>
#include <complex>

#include "qfc/gaussian.hpp"

// Deterministic moment flows: conditional covariance sigma_c (Riccati),
// estimator covariance sigma_m (Lyapunov with source), stage-split right-hand
// sides, steady-state solvers, and feedback stability eigenvalues.

namespace qfc {

enum class SchemeKind {
    QndPosition,          // continuous position monitoring, backaction on p only
    AnnihilationHomodyne, // homodyne on the annihilation operator, adds damping 2k D[a]
    DualNoDamp,           // simultaneous a and a^dag detection, damping cancels
    PureMeasurement,      // position monitoring alone, no bath, no Hamiltonian
};

enum class Estimator {
    KalmanXP,   // a_x = b_p = g, a_p = b_x = 0
    KalmanXOnly,// b_x = b_p = g, a_x = a_p = 0
    Direct,     // raw-record kick, (a_x, b_x) only
};

struct FeedbackLaw {
    Estimator estimator = Estimator::KalmanXP;
    double a_x = 0.0;
    double a_p = 0.0;
    double b_x = 0.0;
    double b_p = 0.0;
};

FeedbackLaw kalman_xp(double g);
FeedbackLaw kalman_x_only(double g);
FeedbackLaw direct_law(double a_x, double b_x);

// Symmetric 2x2 rate matrix (variance/time); entries may be negative.
struct Sym2 {
    double xx = 0.0;
    double pp = 0.0;
    double xp = 0.0;
    Sym2& operator+=(const Sym2& o) { xx += o.xx; pp += o.pp; xp += o.xp; return *this; }
};

inline Sym2 operator+(Sym2 a, const Sym2& b) { a += b; return a; }

// Stage split of a covariance flow. The sum of the four stages is the full RHS.
// Heat integrates the bath stage only; extracted work integrates feedback +
// the backaction part of measurement; conditioning cancels in sigma_c + sigma_m.
struct StageRates {
    Sym2 bath;
    Sym2 hamiltonian;
    Sym2 feedback;
    Sym2 measurement;  // backaction + conditioning where applicable
    Sym2 total() const { return bath + hamiltonian + feedback + measurement; }
};

// d(sigma_c)/dt split by stage. Feedback stage is identically zero (feedback
// displaces means only). Throws HeisenbergViolation on an unphysical input.
StageRates sigma_c_rhs(const CovarianceMatrix& cov_c, const SystemParams& params,
                       SchemeKind scheme);

// d(sigma_m)/dt for Kalman estimators: A sigma_m + sigma_m A^T + V(sigma_c)
// with A = A_ham + A_damp + A_fb. Throws UnsupportedEstimator for Direct.
StageRates sigma_m_rhs(const CovarianceMatrix& cov_m, const CovarianceMatrix& cov_c,
                       const FeedbackLaw& law, const SystemParams& params,
                       SchemeKind scheme);

// Closed sigma_m flow for direct (Markovian) feedback on the position record,
// QND scheme. Constant gains make the Stratonovich and Ito updates identical.
// The feedback stage carries the injected-noise cross and square terms.
// Throws EfficiencyZero when eta = 0.
StageRates direct_moment_rhs(const CovarianceMatrix& cov_m, const CovarianceMatrix& cov_c,
                             const FeedbackLaw& law, const SystemParams& params);

// Stationary sigma_c: time-march from (nbar+1/2) I until ||RHS||_inf < 1e-10,
// then Newton-polish to < 1e-12. Independent of the feedback law by
// construction (not an argument). Throws NoConvergence with the last residual.
CovarianceMatrix steady_sigma_c(const SystemParams& params, SchemeKind scheme);

// Residual ||total RHS||_inf of the sigma_c flow at cov_c.
double sigma_c_residual(const CovarianceMatrix& cov_c, const SystemParams& params,
                        SchemeKind scheme);

// Stationary sigma_m: direct 3x3 linear solve of the vectorized flow.
// Handles Kalman laws (any scheme) and Direct (QND only). Throws NotHurwitz
// when the drift has an eigenvalue real part >= -1e-12.
CovarianceMatrix steady_sigma_m(const CovarianceMatrix& cov_c, const FeedbackLaw& law,
                                const SystemParams& params, SchemeKind scheme);

// Eigenvalues of the vectorized sigma_m drift for a Kalman law (QND damping):
// lambda_1 = -(a_x+b_p+gamma), lambda_23 = lambda_1 +- sqrt(disc) with
// disc = (a_x-b_p)^2 - 4(omega-a_p)(omega+b_x).
std::array<std::complex<double>, 3> stability_eigenvalues(const FeedbackLaw& law,
                                                          const SystemParams& params);

// 2x2 mean drift matrix row-major [[axx, axp], [apx, app]]: Hamiltonian
// rotation + scheme damping + feedback. Used by trajectory stepping as well.
std::array<double, 4> mean_drift(const FeedbackLaw& law, const SystemParams& params,
                                 SchemeKind scheme);

}  // namespace qfc

#endif
