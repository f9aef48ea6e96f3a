#include "qfc/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace qfc {

namespace {

// CODATA 2018 exact values.
constexpr double kHbar = 1.054571817e-34;
constexpr double kBoltzmann = 1.380649e-23;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

SystemParams system_params(double omega, double gamma, double nbar, double k,
                           double eta) {
    if (!(omega > 0.0)) throw RangeError("omega must be positive, got " + num(omega));
    if (!(gamma >= 0.0)) throw RangeError("gamma must be >= 0, got " + num(gamma));
    if (!(nbar >= 0.0)) throw RangeError("nbar must be >= 0, got " + num(nbar));
    if (!(k >= 0.0)) throw RangeError("k must be >= 0, got " + num(k));
    if (!(eta > 0.0 && eta <= 1.0)) {
        throw RangeError("eta must be in (0, 1], got " + num(eta));
    }
    SystemParams p;
    p.omega = omega;
    p.gamma = gamma;
    p.nbar = nbar;
    p.k = k;
    p.eta = eta;
    p.T = temperature_natural(omega, nbar);
    return p;
}

double nbar_from_kelvin(double T_kelvin, double omega_hz) {
    if (!(T_kelvin > 0.0)) {
        throw RangeError("T_kelvin must be positive, got " + num(T_kelvin));
    }
    if (!(omega_hz > 0.0)) {
        throw RangeError("omega_hz must be positive, got " + num(omega_hz));
    }
    const double x = kHbar * 2.0 * M_PI * omega_hz / (kBoltzmann * T_kelvin);
    return 1.0 / std::expm1(x);
}

double temperature_natural(double omega, double nbar) {
    if (nbar <= 0.0) return 0.0;
    return omega / std::log1p(1.0 / nbar);
}

void validate(const CovarianceMatrix& cov, bool allow_sub_heisenberg) {
    if (!std::isfinite(cov.sxx) || !std::isfinite(cov.spp) || !std::isfinite(cov.sxp)) {
        throw NonPositive("covariance has non-finite entries");
    }
    if (allow_sub_heisenberg) {
        // PSD up to roundoff; the zero matrix is a valid estimator covariance
        const double scale = std::max(1.0, std::max(cov.sxx, cov.spp));
        if (cov.sxx < -kHeisenbergTol * scale || cov.spp < -kHeisenbergTol * scale) {
            throw NonPositive("estimator covariance diagonal negative: sxx="
                              + num(cov.sxx) + " spp=" + num(cov.spp));
        }
        if (cov.det() < -kHeisenbergTol * scale * scale) {
            throw NonPositive("estimator covariance not PSD, det=" + num(cov.det()));
        }
        return;
    }
    if (!(cov.sxx > 0.0) || !(cov.spp > 0.0)) {
        throw NonPositive("covariance diagonal must be positive: sxx=" + num(cov.sxx)
                          + " spp=" + num(cov.spp));
    }
    if (cov.det() < 0.25 - kHeisenbergTol) {
        throw HeisenbergViolation("det(sigma) = " + num(cov.det()) + " < 1/4");
    }
}

double entropy_of_nu(double nu) {
    if (nu <= 0.5 + kPureTol) return 0.0;
    const double a = nu + 0.5;
    const double b = nu - 0.5;
    return a * std::log(a) - b * std::log(b);
}

double entropy_slope(double nu) {
    if (nu <= 0.5 + kPureTol) return 0.0;
    return std::log((nu + 0.5) / (nu - 0.5));
}

double entropy(const CovarianceMatrix& cov) {
    validate(cov);
    return entropy_of_nu(std::sqrt(cov.det()));
}

ThermalDecomposition decompose(const CovarianceMatrix& cov, const SystemParams& params) {
    validate(cov);
    ThermalDecomposition d;

    const double mean = 0.5 * (cov.sxx + cov.spp);
    const double diff = 0.5 * (cov.sxx - cov.spp);
    const double rad = std::hypot(diff, cov.sxp);
    d.sigma_uu = mean + rad;
    d.sigma_vv = mean - rad;
    d.theta = rad > 0.0 ? 0.5 * std::atan2(2.0 * cov.sxp, cov.sxx - cov.spp) : 0.0;
    d.u_vec[0] = std::cos(d.theta);
    d.u_vec[1] = std::sin(d.theta);
    d.v_vec[0] = -d.u_vec[1];
    d.v_vec[1] = d.u_vec[0];

    d.nu = std::sqrt(cov.det());
    d.r = 0.25 * std::log(d.sigma_uu / d.sigma_vv);
    if (d.nu > 0.5 + kPureTol) {
        d.TG = params.omega / entropy_slope(d.nu);
        d.Tu = d.sigma_uu / d.nu * d.TG;
        d.Tv = d.sigma_vv / d.nu * d.TG;
    } else {
        d.TG = 0.0;
        d.Tu = 0.0;
        d.Tv = 0.0;
    }
    return d;
}

double occupation(const GaussianMoments& moments) {
    const MeanVector& m = moments.mean;
    const CovarianceMatrix& c = moments.cov;
    return (c.sxx + c.spp + m.mx * m.mx + m.mp * m.mp) / 2.0 - 0.5;
}

}  // namespace qfc
