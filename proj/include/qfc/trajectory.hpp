#ifndef QFC_TRAJECTORY_HPP
#define QFC_TRAJECTORY_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "qfc/dynamics.hpp"
#include "qfc/gaussian.hpp"

// Stochastic integration of the conditional means under Kalman-filtered or
// direct feedback. The conditional covariance is deterministic and shared by
// every trajectory; means follow an Euler-Maruyama update driven by the
// measurement record.

namespace qfc {

struct SimConfig {
    double dt = 2.5e-4;        // step, units of 1/omega
    std::int64_t n_steps = 60000;
    std::int64_t n_traj = 10000;
    // Steps discarded before statistics. Negative means automatic: ten times
    // the slowest closed-loop decay time, capped at n_steps / 2.
    std::int64_t burn_in = -1;
    std::uint64_t seed = 12345;
};

struct TrajectoryState {
    MeanVector mean_c;
    CovarianceMatrix cov_c;
    double t = 0.0;
};

struct EnsembleStats {
    // Sample second moments of the conditional means (sigma_m estimate),
    // averaged over post-burn-in steps, with standard errors over trajectories.
    double sxx_m = 0.0, spp_m = 0.0, sxp_m = 0.0;
    double se_sxx_m = 0.0, se_spp_m = 0.0, se_sxp_m = 0.0;
    double n_occ = 0.0;            // sample occupation including cov_c
    double se_n_occ = 0.0;
    std::int64_t n_traj = 0;       // trajectories accumulated
    std::int64_t n_samples = 0;    // post-burn-in steps per trajectory
};

// One Euler-Maruyama step of size dt for the conditional means under a
// Kalman law. dw holds N(0, dt) increments: dw[0] for single-record schemes,
// dw[0] and dw[1] for DualNoDamp. Advances cov_c by one RK4 step of the
// deterministic flow. record_out (optional) receives the record increment dy
// of this step; requesting it with k = 0 throws EfficiencyZero.
TrajectoryState kalman_step(const TrajectoryState& state, double dt,
                            const double* dw, const FeedbackLaw& law,
                            const SystemParams& params, SchemeKind scheme,
                            double* record_out = nullptr);

// Direct feedback on the QND record: conditioned mean update plus the kick
// (-a_x, -b_x) dy with the same step's dy.
TrajectoryState direct_step(const TrajectoryState& state, double dt, double dw,
                            const FeedbackLaw& law, const SystemParams& params,
                            double* record_out = nullptr);

// Checks dt * max(|stability eigenvalue|, 8 k eta sxx_c) <= 0.1.
// Throws StiffnessGuard with the offending product.
void check_stiffness(const SimConfig& config, const FeedbackLaw& law,
                     const SystemParams& params, SchemeKind scheme,
                     const CovarianceMatrix& cov_c0);

// Runs n_traj independent trajectories from zero means and cov_c0 equal to
// the steady conditional covariance. Each trajectory draws from its own
// counter-based stream (seed, index); per-trajectory results land in
// index-ordered slots and are reduced sequentially, so the result is
// bit-identical for any n_workers (0 = hardware concurrency).
// dump_first (optional) writes per-trajectory CSV files
// "<dump_prefix><index>.csv" with columns t,mx,mp,sxx_c,spp_c,sxp_c,dy for
// trajectory indices < dump_first.
EnsembleStats run_ensemble(const SimConfig& config, const FeedbackLaw& law,
                           const SystemParams& params, SchemeKind scheme,
                           int n_workers = 0, std::int64_t dump_first = 0,
                           const std::string& dump_prefix = "");

}  // namespace qfc

#endif
