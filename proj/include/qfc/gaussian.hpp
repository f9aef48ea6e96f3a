#ifndef QFC_GAUSSIAN_HPP
#define QFC_GAUSSIAN_HPP

#include <stdexcept>
#include <string>

// Single-mode Gaussian states in natural units (hbar = kB = 1, omega typically 1).
// Covariances are dimensionless: vacuum is diag(1/2, 1/2).

namespace qfc {

struct SimError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Covariance diagonal not positive (or not PSD in the sub-Heisenberg case).
struct NonPositive : SimError { using SimError::SimError; };
// det(sigma) < 1/4 where a physical state is required.
struct HeisenbergViolation : SimError { using SimError::SimError; };
// Iterative solver failed; message carries the last residual.
struct NoConvergence : SimError { using SimError::SimError; };
// Drift matrix has an eigenvalue with real part >= -1e-12; no steady estimator covariance.
struct NotHurwitz : SimError { using SimError::SimError; };
// eta = 0 makes the fed-back measurement noise divergent in direct feedback.
struct EfficiencyZero : SimError { using SimError::SimError; };
struct UnsupportedScheme : SimError { using SimError::SimError; };
struct UnsupportedEstimator : SimError { using SimError::SimError; };
// Operating point handed to a steady-state-only identity has too large a residual.
struct NotSteady : SimError { using SimError::SimError; };
// dt too large for the fastest rate in the problem.
struct StiffnessGuard : SimError { using SimError::SimError; };
// Config parsing.
struct UnknownKey : SimError { using SimError::SimError; };
struct MissingKey : SimError { using SimError::SimError; };
struct RangeError : SimError { using SimError::SimError; };

struct SystemParams {
    double omega = 1.0;  // angular frequency (rad/time)
    double gamma = 0.0;  // bath dissipation rate
    double nbar  = 0.0;  // bath occupation
    double k     = 0.0;  // measurement rate
    double eta   = 1.0;  // detection efficiency, (0, 1]
    double T     = 0.0;  // bath temperature from detailed balance, filled by system_params()
};

// Builds params and derives T = omega / ln((nbar+1)/nbar); nbar = 0 maps to T = 0.
// Throws RangeError on out-of-range inputs.
SystemParams system_params(double omega, double gamma, double nbar, double k, double eta);

// Occupation <-> temperature helpers (detailed balance).
double nbar_from_kelvin(double T_kelvin, double omega_hz);
double temperature_natural(double omega, double nbar);

struct CovarianceMatrix {
    double sxx = 0.5;
    double spp = 0.5;
    double sxp = 0.0;
    double det() const { return sxx * spp - sxp * sxp; }
};

struct MeanVector {
    double mx = 0.0;
    double mp = 0.0;
};

struct GaussianMoments {
    MeanVector mean;
    CovarianceMatrix cov;
};

struct ThermalDecomposition {
    double nu = 0.5;        // symplectic eigenvalue sqrt(det)
    double TG = 0.0;        // Gibbs temperature
    double r = 0.0;         // squeezing magnitude, sigma_uu = nu * exp(2r)
    double theta = 0.0;     // rotation angle of the u-axis from x
    double sigma_uu = 0.5;  // larger covariance eigenvalue
    double sigma_vv = 0.5;
    double Tu = 0.0;        // kinetic temperatures, Tu >= Tv
    double Tv = 0.0;
    double u_vec[2] = {1.0, 0.0};
    double v_vec[2] = {0.0, 1.0};
};

// Heisenberg slack: states are accepted down to det = 1/4 - kHeisenbergTol.
inline constexpr double kHeisenbergTol = 1e-12;
// nu within this of 1/2 is treated as pure (entropy 0, temperatures 0).
inline constexpr double kPureTol = 1e-12;

// Throws NonPositive / HeisenbergViolation on failure, returns normally otherwise.
// allow_sub_heisenberg relaxes to positive semidefiniteness (estimator covariances).
void validate(const CovarianceMatrix& cov, bool allow_sub_heisenberg = false);

// Gaussian entropy f(nu) = (nu+1/2)ln(nu+1/2) - (nu-1/2)ln(nu-1/2) in nats.
double entropy(const CovarianceMatrix& cov);

// f and f' on the symplectic eigenvalue; f'(nu) = ln((nu+1/2)/(nu-1/2)) = omega/TG.
double entropy_of_nu(double nu);
double entropy_slope(double nu);

// Squeezed-thermal decomposition; params supplies omega for the temperatures.
ThermalDecomposition decompose(const CovarianceMatrix& cov, const SystemParams& params);

// <n> = (sxx + spp + mx^2 + mp^2)/2 - 1/2.
double occupation(const GaussianMoments& moments);

}  // namespace qfc

#endif
