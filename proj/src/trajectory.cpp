#include "qfc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>
#include <vector>

#include "qfc/rng.hpp"

namespace qfc {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string f17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CovarianceMatrix rk4_cov(const CovarianceMatrix& c, double dt,
                         const SystemParams& p, SchemeKind scheme) {
    auto f = [&](const CovarianceMatrix& s) {
        return sigma_c_rhs(s, p, scheme).total();
    };
    auto at = [&](const CovarianceMatrix& s, double h, const Sym2& d) {
        return CovarianceMatrix{s.sxx + h * d.xx, s.spp + h * d.pp,
                                s.sxp + h * d.xp};
    };
    const Sym2 k1 = f(c);
    const Sym2 k2 = f(at(c, dt / 2, k1));
    const Sym2 k3 = f(at(c, dt / 2, k2));
    const Sym2 k4 = f(at(c, dt, k3));
    CovarianceMatrix out = c;
    out.sxx += dt / 6 * (k1.xx + 2 * k2.xx + 2 * k3.xx + k4.xx);
    out.spp += dt / 6 * (k1.pp + 2 * k2.pp + 2 * k3.pp + k4.pp);
    out.sxp += dt / 6 * (k1.xp + 2 * k2.xp + 2 * k3.xp + k4.xp);
    return out;
}

// Innovation-gain coefficients on the N(0, dt) increments for one step,
// evaluated at the start-of-step conditional covariance.
struct GainCoeffs {
    double kx = 0.0, kp = 0.0;   // single record, or first dual channel
    double kx2 = 0.0;            // second dual channel (kp is shared)
};

GainCoeffs gain_coeffs(const CovarianceMatrix& c, const SystemParams& p,
                       SchemeKind scheme) {
    GainCoeffs g;
    switch (scheme) {
        case SchemeKind::QndPosition:
        case SchemeKind::PureMeasurement: {
            const double root = std::sqrt(8.0 * p.k * p.eta);
            g.kx = root * c.sxx;
            g.kp = root * c.sxp;
            break;
        }
        case SchemeKind::AnnihilationHomodyne: {
            const double rr = 2.0 * std::sqrt(p.k * p.eta);
            g.kx = rr * (c.sxx - 0.5);
            g.kp = rr * c.sxp;
            break;
        }
        case SchemeKind::DualNoDamp: {
            const double r2 = std::sqrt(2.0 * p.k * p.eta);
            g.kx = r2 * (c.sxx - 0.5);
            g.kx2 = r2 * (c.sxx + 0.5);
            g.kp = r2 * c.sxp;
            break;
        }
    }
    return g;
}

// Record noise scale: dy = <x> dt + dW / record_scale per channel.
double record_scale(const SystemParams& p, SchemeKind scheme) {
    switch (scheme) {
        case SchemeKind::QndPosition:
        case SchemeKind::PureMeasurement:
            return std::sqrt(8.0 * p.k * p.eta);
        default:
            return 2.0 * std::sqrt(p.k * p.eta);
    }
}

// Largest real part of the 2x2 mean drift.
double mean_drift_max_re(const std::array<double, 4>& A) {
    const double tr = A[0] + A[3];
    const double disc = (A[0] - A[3]) * (A[0] - A[3]) + 4.0 * A[1] * A[2];
    return disc >= 0.0 ? (tr + std::sqrt(disc)) / 2.0 : tr / 2.0;
}

struct TrajSlot {
    double axx = 0.0, app = 0.0, axp = 0.0, an = 0.0;
    std::string error;
};

}  // namespace

TrajectoryState kalman_step(const TrajectoryState& state, double dt,
                            const double* dw, const FeedbackLaw& law,
                            const SystemParams& params, SchemeKind scheme,
                            double* record_out) {
    if (record_out != nullptr && !(params.k * params.eta > 0.0)) {
        throw EfficiencyZero("record requested with k * eta = "
                             + num(params.k * params.eta));
    }
    const auto A = mean_drift(law, params, scheme);
    const GainCoeffs g = gain_coeffs(state.cov_c, params, scheme);
    const double mx = state.mean_c.mx;
    const double mp = state.mean_c.mp;

    TrajectoryState out;
    if (scheme == SchemeKind::DualNoDamp) {
        out.mean_c.mx = mx + dt * (A[0] * mx + A[1] * mp) + g.kx * dw[0]
                        + g.kx2 * dw[1];
        out.mean_c.mp = mp + dt * (A[2] * mx + A[3] * mp) + g.kp * (dw[0] + dw[1]);
        if (record_out != nullptr) {
            const double scale = record_scale(params, scheme);
            const double dy1 = mx * dt + dw[0] / scale;
            const double dy2 = mx * dt + dw[1] / scale;
            *record_out = 0.5 * (dy1 + dy2);
        }
    } else {
        out.mean_c.mx = mx + dt * (A[0] * mx + A[1] * mp) + g.kx * dw[0];
        out.mean_c.mp = mp + dt * (A[2] * mx + A[3] * mp) + g.kp * dw[0];
        if (record_out != nullptr) {
            *record_out = mx * dt + dw[0] / record_scale(params, scheme);
        }
    }
    out.cov_c = rk4_cov(state.cov_c, dt, params, scheme);
    out.t = state.t + dt;
    return out;
}

TrajectoryState direct_step(const TrajectoryState& state, double dt, double dw,
                            const FeedbackLaw& law, const SystemParams& params,
                            double* record_out) {
    const double keta = params.k * params.eta;
    if (!(keta > 0.0)) {
        throw EfficiencyZero("fed-back record noise diverges at k*eta = "
                             + num(keta));
    }
    const double root = std::sqrt(8.0 * keta);
    const auto A = mean_drift(law, params, SchemeKind::QndPosition);
    const double mx = state.mean_c.mx;
    const double mp = state.mean_c.mp;
    const double bx = root * state.cov_c.sxx - law.a_x / root;
    const double bp = root * state.cov_c.sxp - law.b_x / root;

    TrajectoryState out;
    out.mean_c.mx = mx + dt * (A[0] * mx + A[1] * mp) + bx * dw;
    out.mean_c.mp = mp + dt * (A[2] * mx + A[3] * mp) + bp * dw;
    if (record_out != nullptr) {
        *record_out = mx * dt + dw / root;
    }
    out.cov_c = rk4_cov(state.cov_c, dt, params, SchemeKind::QndPosition);
    out.t = state.t + dt;
    return out;
}

void check_stiffness(const SimConfig& config, const FeedbackLaw& law,
                     const SystemParams& params, SchemeKind scheme,
                     const CovarianceMatrix& cov_c0) {
    (void)scheme;
    const auto ev = stability_eigenvalues(law, params);
    double rate = 8.0 * params.k * params.eta * cov_c0.sxx;
    for (const auto& z : ev) rate = std::max(rate, std::abs(z));
    const double product = config.dt * rate;
    if (product > 0.1) {
        throw StiffnessGuard("dt * fastest rate = " + num(product)
                             + " exceeds 0.1; shrink dt");
    }
}

EnsembleStats run_ensemble(const SimConfig& config, const FeedbackLaw& law,
                           const SystemParams& params, SchemeKind scheme,
                           int n_workers, std::int64_t dump_first,
                           const std::string& dump_prefix) {
    if (config.n_steps <= 0 || config.n_traj <= 0 || !(config.dt > 0.0)) {
        throw RangeError("ensemble needs positive dt, n_steps and n_traj");
    }
    const bool direct = law.estimator == Estimator::Direct;
    if (direct && scheme != SchemeKind::QndPosition) {
        throw UnsupportedScheme(
            "direct feedback is defined on the position record only");
    }
    if (direct && !(params.k * params.eta > 0.0)) {
        throw EfficiencyZero("fed-back record noise diverges at k*eta = "
                             + num(params.k * params.eta));
    }

    const auto A = mean_drift(law, params, scheme);
    const double max_re = mean_drift_max_re(A);
    if (2.0 * max_re >= -1e-12) {
        throw NotHurwitz("mean drift eigenvalue real part " + num(max_re)
                         + " is not negative; means never equilibrate");
    }

    std::int64_t burn = config.burn_in;
    if (burn < 0) {
        const double decay_time = 1.0 / (-max_re);
        burn = std::min<std::int64_t>(
            static_cast<std::int64_t>(std::ceil(10.0 * decay_time / config.dt)),
            config.n_steps / 2);
    }
    if (burn >= config.n_steps) {
        throw RangeError("burn_in " + std::to_string(burn)
                         + " leaves no samples in " + std::to_string(config.n_steps)
                         + " steps");
    }

    const CovarianceMatrix cov0 = steady_sigma_c(params, scheme);
    check_stiffness(config, law, params, scheme, cov0);

    const std::int64_t n_steps = config.n_steps;
    const std::int64_t n_traj = config.n_traj;
    const std::int64_t n_samp = n_steps - burn;
    const bool dual = scheme == SchemeKind::DualNoDamp;

    // The conditional covariance path is deterministic and shared; precompute
    // it with the per-step gain coefficients once.
    std::vector<CovarianceMatrix> path(static_cast<size_t>(n_steps) + 1);
    std::vector<GainCoeffs> gains(static_cast<size_t>(n_steps));
    path[0] = cov0;
    for (std::int64_t i = 0; i < n_steps; ++i) {
        gains[i] = gain_coeffs(path[i], params, scheme);
        path[i + 1] = rk4_cov(path[i], config.dt, params, scheme);
    }
    std::vector<double> g_bx, g_bp;  // direct-feedback noise coefficients
    if (direct) {
        const double root = std::sqrt(8.0 * params.k * params.eta);
        g_bx.resize(static_cast<size_t>(n_steps));
        g_bp.resize(static_cast<size_t>(n_steps));
        for (std::int64_t i = 0; i < n_steps; ++i) {
            g_bx[i] = root * path[i].sxx - law.a_x / root;
            g_bp[i] = root * path[i].sxp - law.b_x / root;
        }
    }

    const double dt = config.dt;
    const double sq_dt = std::sqrt(dt);
    const double rscale = record_scale(params, scheme);
    const double blow_up = 1e9 * (params.nbar + 1.0);

    std::vector<TrajSlot> slots(static_cast<size_t>(n_traj));

    auto run_block = [&](std::int64_t j_begin, std::int64_t j_end) {
        for (std::int64_t j = j_begin; j < j_end; ++j) {
            NormalStream rng(config.seed, static_cast<std::uint64_t>(j));
            const bool dumping = j < dump_first;
            std::string dump;
            if (dumping) dump = "t,mx,mp,sxx_c,spp_c,sxp_c,dy\n";

            double mx = 0.0, mp = 0.0;
            double sxx = 0.0, spp = 0.0, sxp = 0.0;
            bool bad = false;
            for (std::int64_t i = 0; i < n_steps; ++i) {
                const double dw0 = sq_dt * rng.next();
                const double dw1 = dual ? sq_dt * rng.next() : 0.0;
                double dy = 0.0;
                if (dumping) {
                    if (dual) {
                        const double dy1 = mx * dt + dw0 / rscale;
                        const double dy2 = mx * dt + dw1 / rscale;
                        dy = 0.5 * (dy1 + dy2);
                    } else {
                        dy = mx * dt + dw0 / rscale;
                    }
                }
                double nmx, nmp;
                if (direct) {
                    nmx = mx + dt * (A[0] * mx + A[1] * mp) + g_bx[i] * dw0;
                    nmp = mp + dt * (A[2] * mx + A[3] * mp) + g_bp[i] * dw0;
                } else if (dual) {
                    nmx = mx + dt * (A[0] * mx + A[1] * mp) + gains[i].kx * dw0
                          + gains[i].kx2 * dw1;
                    nmp = mp + dt * (A[2] * mx + A[3] * mp)
                          + gains[i].kp * (dw0 + dw1);
                } else {
                    nmx = mx + dt * (A[0] * mx + A[1] * mp) + gains[i].kx * dw0;
                    nmp = mp + dt * (A[2] * mx + A[3] * mp) + gains[i].kp * dw0;
                }
                mx = nmx;
                mp = nmp;
                if (!(std::fabs(mx) < blow_up) || !(std::fabs(mp) < blow_up)) {
                    slots[j].error = "trajectory " + std::to_string(j)
                                     + " diverged at step " + std::to_string(i);
                    bad = true;
                    break;
                }
                if (i >= burn) {
                    sxx += mx * mx;
                    spp += mp * mp;
                    sxp += mx * mp;
                }
                if (dumping) {
                    const CovarianceMatrix& c = path[i + 1];
                    dump += f17((i + 1) * dt) + "," + f17(mx) + "," + f17(mp)
                            + "," + f17(c.sxx) + "," + f17(c.spp) + ","
                            + f17(c.sxp) + "," + f17(dy) + "\n";
                }
            }
            if (bad) continue;
            slots[j].axx = sxx / n_samp;
            slots[j].app = spp / n_samp;
            slots[j].axp = sxp / n_samp;
            slots[j].an = 0.5 * (slots[j].axx + slots[j].app);
            if (dumping) {
                const std::string fname = dump_prefix + std::to_string(j) + ".csv";
                std::ofstream out(fname, std::ios::binary);
                out << dump;
                if (!out) {
                    slots[j].error = "cannot write " + fname;
                }
            }
        }
    };

    int workers = n_workers > 0 ? n_workers
                                : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    workers = static_cast<int>(std::min<std::int64_t>(workers, n_traj));
    if (workers == 1) {
        run_block(0, n_traj);
    } else {
        std::vector<std::thread> pool;
        const std::int64_t chunk = (n_traj + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::int64_t b = w * chunk;
            const std::int64_t e = std::min<std::int64_t>(b + chunk, n_traj);
            if (b >= e) break;
            pool.emplace_back(run_block, b, e);
        }
        for (auto& t : pool) t.join();
    }
    for (const TrajSlot& s : slots) {
        if (!s.error.empty()) throw NoConvergence(s.error);
    }

    // sequential reduction in index order keeps the result worker-independent
    EnsembleStats st;
    st.n_traj = n_traj;
    st.n_samples = n_samp;
    double mxx = 0.0, mpp = 0.0, mxp = 0.0, man = 0.0;
    for (const TrajSlot& s : slots) {
        mxx += s.axx;
        mpp += s.app;
        mxp += s.axp;
        man += s.an;
    }
    mxx /= n_traj;
    mpp /= n_traj;
    mxp /= n_traj;
    man /= n_traj;
    st.sxx_m = mxx;
    st.spp_m = mpp;
    st.sxp_m = mxp;
    if (n_traj > 1) {
        double vxx = 0.0, vpp = 0.0, vxp = 0.0, van = 0.0;
        for (const TrajSlot& s : slots) {
            vxx += (s.axx - mxx) * (s.axx - mxx);
            vpp += (s.app - mpp) * (s.app - mpp);
            vxp += (s.axp - mxp) * (s.axp - mxp);
            van += (s.an - man) * (s.an - man);
        }
        const double denom = static_cast<double>(n_traj)
                             * static_cast<double>(n_traj - 1);
        st.se_sxx_m = std::sqrt(vxx / denom);
        st.se_spp_m = std::sqrt(vpp / denom);
        st.se_sxp_m = std::sqrt(vxp / denom);
        st.se_n_occ = std::sqrt(van / denom);
    }

    double cxx = 0.0, cpp = 0.0;
    for (std::int64_t i = burn; i < n_steps; ++i) {
        cxx += path[i + 1].sxx;
        cpp += path[i + 1].spp;
    }
    cxx /= n_samp;
    cpp /= n_samp;
    st.n_occ = (cxx + st.sxx_m + cpp + st.spp_m) / 2.0 - 0.5;
    return st;
}

}  // namespace qfc
