#include <cmath>
#include <complex>
#include <random>

#include <doctest.h>
#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "qfc/dynamics.hpp"

using namespace qfc;
using namespace qfc_test;

namespace {

const SchemeKind kSchemes[] = {SchemeKind::QndPosition, SchemeKind::AnnihilationHomodyne,
                               SchemeKind::DualNoDamp};

SystemParams paper_params() {
    const double nbar = nbar_from_kelvin(292.0, 1e5);
    return system_params(1.0, 0.0058 / nbar, nbar, 0.18, 0.34);
}

// Reference RK4 integrator over the sigma_m flow, independent of the solver.
CovarianceMatrix march_sigma_m(const CovarianceMatrix& cov_c, const FeedbackLaw& law,
                               const SystemParams& p, SchemeKind scheme, double t_end,
                               double dt) {
    CovarianceMatrix s{0.0, 0.0, 0.0};
    auto f = [&](const CovarianceMatrix& m) { return sigma_m_rhs(m, cov_c, law, p, scheme).total(); };
    auto add = [](const CovarianceMatrix& m, const Sym2& r, double h) {
        return CovarianceMatrix{m.sxx + h * r.xx, m.spp + h * r.pp, m.sxp + h * r.xp};
    };
    for (double t = 0.0; t < t_end; t += dt) {
        const Sym2 k1 = f(s);
        const Sym2 k2 = f(add(s, k1, dt / 2));
        const Sym2 k3 = f(add(s, k2, dt / 2));
        const Sym2 k4 = f(add(s, k3, dt));
        s.sxx += dt / 6 * (k1.xx + 2 * k2.xx + 2 * k3.xx + k4.xx);
        s.spp += dt / 6 * (k1.pp + 2 * k2.pp + 2 * k3.pp + k4.pp);
        s.sxp += dt / 6 * (k1.xp + 2 * k2.xp + 2 * k3.xp + k4.xp);
    }
    return s;
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("thermal state is the bath fixed point when k = 0") {
    const SystemParams p = system_params(1.0, 0.2, 3.0, 0.0, 0.5);
    const Sym2 r = sigma_c_rhs({3.5, 3.5, 0.0}, p, SchemeKind::QndPosition).total();
    CHECK(close_abs(r.xx, 0.0, 1e-14));
    CHECK(close_abs(r.pp, 0.0, 1e-14));
    CHECK(close_abs(r.xp, 0.0, 1e-14));
}

TEST_CASE("pure-measurement flow matches the direct term") {
    // d sxx/dt = -8 k eta sxx^2 with sxx = 1, k = 1, eta = 0.5
    const SystemParams p = system_params(1.0, 0.0, 0.0, 1.0, 0.5);
    const StageRates r = sigma_c_rhs({1.0, 1.0, 0.0}, p, SchemeKind::PureMeasurement);
    CHECK(close_abs(r.total().xx, -4.0, 1e-14));
    CHECK(close_abs(r.bath.xx, 0.0, 1e-15));
    CHECK(close_abs(r.hamiltonian.xx, 0.0, 1e-15));
    // backaction feeds pp only
    CHECK(close_abs(r.measurement.pp, 2.0 * p.k - 0.0, 1e-14));
}

TEST_CASE("stage sums equal totals and the feedback stage of sigma_c is zero") {
    std::mt19937_64 rng(101);
    const SystemParams p = system_params(1.0, 0.13, 2.2, 0.31, 0.7);
    for (SchemeKind scheme : kSchemes) {
        for (int i = 0; i < 100; ++i) {
            const CovarianceMatrix cov = random_cov(rng);
            const StageRates r = sigma_c_rhs(cov, p, scheme);
            CHECK(r.feedback.xx == 0.0);
            CHECK(r.feedback.pp == 0.0);
            CHECK(r.feedback.xp == 0.0);
            const Sym2 manual = r.bath + r.hamiltonian + r.feedback + r.measurement;
            const Sym2 total = r.total();
            CHECK(close_rel(manual.xx, total.xx, 1e-12));
            CHECK(close_rel(manual.pp, total.pp, 1e-12));
            CHECK(close_rel(manual.xp, total.xp, 1e-12));
        }
    }
}

TEST_CASE("Hamiltonian stage preserves the determinant to first order") {
    std::mt19937_64 rng(102);
    const SystemParams p = system_params(1.0, 0.1, 1.0, 0.4, 0.6);
    for (int i = 0; i < 200; ++i) {
        const CovarianceMatrix cov = random_cov(rng);
        const Sym2 h = sigma_c_rhs(cov, p, SchemeKind::QndPosition).hamiltonian;
        const double dd = cov.spp * h.xx + cov.sxx * h.pp - 2.0 * cov.sxp * h.xp;
        CHECK(close_abs(dd, 0.0, 1e-12 * std::max(1.0, cov.det())));
    }
}

TEST_CASE("conditioning cancels between sigma_c and sigma_m") {
    // Sigma = sigma_c + sigma_m must evolve by bath + Hamiltonian + feedback +
    // backaction alone; assemble that flow explicitly and compare.
    std::mt19937_64 rng(103);
    const SystemParams p = system_params(1.0, 0.09, 1.7, 0.27, 0.55);
    const FeedbackLaw law = kalman_xp(0.8);
    for (SchemeKind scheme : kSchemes) {
        for (int i = 0; i < 100; ++i) {
            const CovarianceMatrix c = random_cov(rng);
            const CovarianceMatrix m = random_psd(rng);
            const Sym2 rc = sigma_c_rhs(c, p, scheme).total();
            const Sym2 rm = sigma_m_rhs(m, c, law, p, scheme).total();
            const Sym2 got{rc.xx + rm.xx, rc.pp + rm.pp, rc.xp + rm.xp};

            // explicit averaged flow on Sigma
            const double Sxx = c.sxx + m.sxx, Spp = c.spp + m.spp, Sxp = c.sxp + m.sxp;
            const double kd = scheme == SchemeKind::AnnihilationHomodyne ? p.k : 0.0;
            Sym2 want;
            want.xx = 2 * p.omega * Sxp - (p.gamma + 2 * kd) * Sxx + p.gamma * (p.nbar + 0.5)
                      - 2 * (law.a_x * m.sxx + law.a_p * m.sxp);
            want.pp = -2 * p.omega * Sxp - (p.gamma + 2 * kd) * Spp + p.gamma * (p.nbar + 0.5)
                      - 2 * (law.b_x * m.sxp + law.b_p * m.spp);
            want.xp = p.omega * (Spp - Sxx) - (p.gamma + 2 * kd) * Sxp
                      - law.b_x * m.sxx - law.a_p * m.spp - (law.a_x + law.b_p) * m.sxp;
            if (scheme == SchemeKind::QndPosition) {
                want.pp += 2 * p.k;
            } else if (scheme == SchemeKind::AnnihilationHomodyne) {
                want.xx += p.k;
                want.pp += p.k;
            } else {
                want.xx += p.k;
                want.pp += p.k;
            }
            CHECK(close_rel(got.xx, want.xx, 1e-12));
            CHECK(close_rel(got.pp, want.pp, 1e-12));
            CHECK(close_rel(got.xp, want.xp, 1e-12));
        }
    }
}

TEST_CASE("sigma_m flow basics") {
    const SystemParams p0 = system_params(1.0, 0.0, 0.0, 0.0, 1.0);
    const Sym2 r0 = sigma_m_rhs({0, 0, 0}, {0.5, 0.5, 0.0}, kalman_xp(0.0), p0,
                                SchemeKind::QndPosition).total();
    CHECK(r0.xx == 0.0);
    CHECK(r0.pp == 0.0);
    CHECK(r0.xp == 0.0);

    // feedback stage of d sxx_m/dt is -2 g sxx_m for the XP law
    const SystemParams p = system_params(1.0, 0.1, 1.0, 0.3, 0.5);
    const double g = 1.7;
    const CovarianceMatrix m{0.9, 1.4, 0.2};
    const StageRates r = sigma_m_rhs(m, {0.8, 1.0, 0.1}, kalman_xp(g), p,
                                     SchemeKind::QndPosition);
    CHECK(close_rel(r.feedback.xx, -2.0 * g * m.sxx, 1e-12));

    CHECK_THROWS_AS(sigma_m_rhs(m, {0.8, 1.0, 0.1}, direct_law(1.0, 0.0), p,
                                SchemeKind::QndPosition),
                    UnsupportedEstimator);
}

TEST_CASE("direct flow reduces to zero-gain Kalman and cancels at the magic gains") {
    const SystemParams p = system_params(1.0, 0.08, 2.0, 0.25, 0.6);
    const CovarianceMatrix c = steady_sigma_c(p, SchemeKind::QndPosition);
    const CovarianceMatrix m{0.4, 0.7, 0.1};

    const Sym2 a = direct_moment_rhs(m, c, direct_law(0.0, 0.0), p).total();
    const Sym2 b = sigma_m_rhs(m, c, kalman_xp(0.0), p, SchemeKind::QndPosition).total();
    CHECK(close_rel(a.xx, b.xx, 1e-12));
    CHECK(close_rel(a.pp, b.pp, 1e-12));
    CHECK(close_rel(a.xp, b.xp, 1e-12));

    // kick exactly cancels the innovation gain: no injected noise, so the
    // flow at sigma_m = 0 vanishes entirely
    const double q = 8.0 * p.k * p.eta;
    const FeedbackLaw magic = direct_law(q * c.sxx, q * c.sxp);
    const Sym2 z = direct_moment_rhs({0, 0, 0}, c, magic, p).total();
    CHECK(close_abs(z.xx, 0.0, 1e-12));
    CHECK(close_abs(z.pp, 0.0, 1e-12));
    CHECK(close_abs(z.xp, 0.0, 1e-12));

    SystemParams bad = p;
    bad.eta = 0.0;  // bypasses system_params validation on purpose
    CHECK_THROWS_AS(direct_moment_rhs(m, c, direct_law(1.0, 0.0), bad), EfficiencyZero);
}

TEST_CASE("steady_sigma_c anchors") {
    SUBCASE("k -> 0 thermal fixed point") {
        const SystemParams p = system_params(1.0, 0.2, 2.5, 0.0, 0.5);
        const CovarianceMatrix s = steady_sigma_c(p, SchemeKind::QndPosition);
        CHECK(close_rel(s.sxx, 3.0, 1e-10));
        CHECK(close_rel(s.spp, 3.0, 1e-10));
        CHECK(close_abs(s.sxp, 0.0, 1e-10));
    }
    SUBCASE("gamma = 0, eta = 1 quartic") {
        for (double k : {0.05, 0.18, 1.0, 4.0}) {
            const SystemParams p = system_params(1.0, 0.0, 0.0, k, 1.0);
            const CovarianceMatrix got = steady_sigma_c(p, SchemeKind::QndPosition);
            const CovarianceMatrix want = quartic_oracle(k, 1.0);
            CHECK(close_abs(got.sxx, want.sxx, 1e-10));
            CHECK(close_abs(got.spp, want.spp, 1e-10));
            CHECK(close_abs(got.sxp, want.sxp, 1e-10));
        }
    }
    SUBCASE("residual below 1e-12 across schemes") {
        const SystemParams p = paper_params();
        for (SchemeKind scheme : kSchemes) {
            const CovarianceMatrix s = steady_sigma_c(p, scheme);
            CHECK(sigma_c_residual(s, p, scheme) < 1e-12);
            CHECK(s.det() >= 0.25 - 1e-12);
        }
    }
    SUBCASE("no stationary point reports NoConvergence") {
        CHECK_THROWS_AS(steady_sigma_c(system_params(1.0, 0.0, 0.0, 0.5, 0.8),
                                       SchemeKind::PureMeasurement),
                        NoConvergence);
        CHECK_THROWS_AS(steady_sigma_c(system_params(1.0, 0.0, 0.0, 0.0, 0.5),
                                       SchemeKind::QndPosition),
                        NoConvergence);
    }
}

TEST_CASE("steady_sigma_m against oracles") {
    const SystemParams p = paper_params();

    SUBCASE("zero gains reproduce the unconditional Lyapunov state") {
        for (SchemeKind scheme : kSchemes) {
            const CovarianceMatrix c = steady_sigma_c(p, scheme);
            const CovarianceMatrix m = steady_sigma_m(c, kalman_xp(0.0), p, scheme);
            const double kd = scheme == SchemeKind::AnnihilationHomodyne ? p.k : 0.0;
            Eigen::Matrix2d A0;
            A0 << -p.gamma / 2 - kd, p.omega, -p.omega, -p.gamma / 2 - kd;
            Eigen::Matrix2d Q = p.gamma * (p.nbar + 0.5) * Eigen::Matrix2d::Identity();
            if (scheme == SchemeKind::QndPosition) {
                Q(1, 1) += 2 * p.k;
            } else {
                Q += p.k * Eigen::Matrix2d::Identity();
            }
            const CovarianceMatrix want = lyapunov_oracle(A0, Q);
            CHECK(close_rel(c.sxx + m.sxx, want.sxx, 1e-9));
            CHECK(close_rel(c.spp + m.spp, want.spp, 1e-9));
            CHECK(close_rel(c.sxp + m.sxp, want.sxp, 1e-9));
        }
    }
    SUBCASE("generic gains match a long time march") {
        const SystemParams q = system_params(1.0, 0.15, 1.2, 0.3, 0.5);
        const CovarianceMatrix c = steady_sigma_c(q, SchemeKind::QndPosition);
        FeedbackLaw law;
        law.a_x = 0.9;
        law.a_p = 0.2;
        law.b_x = 0.4;
        law.b_p = 1.1;
        const CovarianceMatrix direct = steady_sigma_m(c, law, q, SchemeKind::QndPosition);
        const CovarianceMatrix marched =
            march_sigma_m(c, law, q, SchemeKind::QndPosition, 60.0, 1e-3);
        CHECK(close_abs(direct.sxx, marched.sxx, 1e-8));
        CHECK(close_abs(direct.spp, marched.spp, 1e-8));
        CHECK(close_abs(direct.sxp, marched.sxp, 1e-8));
    }
    SUBCASE("entries shrink as 1/g") {
        const CovarianceMatrix c = steady_sigma_c(p, SchemeKind::QndPosition);
        const CovarianceMatrix m1 = steady_sigma_m(c, kalman_xp(2e3), p, SchemeKind::QndPosition);
        const CovarianceMatrix m2 = steady_sigma_m(c, kalman_xp(4e3), p, SchemeKind::QndPosition);
        CHECK(close_rel(2e3 * m1.sxx, 4e3 * m2.sxx, 0.02));
        CHECK(m1.sxx < 1e-3);
    }
    SUBCASE("positive semidefinite whenever Hurwitz") {
        std::mt19937_64 rng(104);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const CovarianceMatrix c = steady_sigma_c(p, SchemeKind::QndPosition);
        for (int i = 0; i < 100; ++i) {
            const double g = std::pow(10.0, -2.0 + 6.0 * unif(rng));
            const FeedbackLaw law = unif(rng) < 0.5 ? kalman_xp(g) : kalman_x_only(g);
            const CovarianceMatrix m = steady_sigma_m(c, law, p, SchemeKind::QndPosition);
            CHECK(m.sxx >= -1e-12);
            CHECK(m.spp >= -1e-12);
            CHECK(m.det() >= -1e-10 * std::max(1.0, m.sxx * m.spp));
        }
    }
    SUBCASE("marginal drift is an error") {
        const SystemParams q = system_params(1.0, 0.0, 0.0, 0.3, 0.8);
        const CovarianceMatrix c = steady_sigma_c(q, SchemeKind::QndPosition);
        CHECK_THROWS_AS(steady_sigma_m(c, kalman_xp(0.0), q, SchemeKind::QndPosition),
                        NotHurwitz);
    }
    SUBCASE("direct feedback with a non-QND scheme is rejected") {
        const CovarianceMatrix c = steady_sigma_c(p, SchemeKind::DualNoDamp);
        CHECK_THROWS_AS(steady_sigma_m(c, direct_law(1.0, 0.0), p, SchemeKind::DualNoDamp),
                        UnsupportedScheme);
    }
}

TEST_CASE("stability eigenvalues") {
    const SystemParams p = system_params(1.0, 0.07, 1.0, 0.2, 0.5);

    SUBCASE("XP law") {
        const double g = 3.0;
        const auto ev = stability_eigenvalues(kalman_xp(g), p);
        CHECK(close_rel(ev[0].real(), -(2 * g + p.gamma), 1e-14));
        CHECK(close_abs(ev[0].imag(), 0.0, 1e-14));
        CHECK(close_rel(ev[1].real(), -(2 * g + p.gamma), 1e-14));
        CHECK(close_abs(std::fabs(ev[1].imag()), 2.0 * p.omega, 1e-12));
    }
    SUBCASE("zero gains") {
        const auto ev = stability_eigenvalues(FeedbackLaw{}, p);
        CHECK(close_rel(ev[0].real(), -p.gamma, 1e-14));
        CHECK(close_abs(std::fabs(ev[1].imag()), 2.0 * p.omega, 1e-12));
    }
    SUBCASE("agrees with a dense eigensolver for generic gains") {
        std::mt19937_64 rng(105);
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        for (int i = 0; i < 50; ++i) {
            FeedbackLaw law;
            law.a_x = unif(rng) + 2.5;
            law.a_p = unif(rng);
            law.b_x = unif(rng);
            law.b_p = unif(rng) + 2.5;
            const auto ev = stability_eigenvalues(law, p);

            Eigen::Matrix2d A2;
            A2 << -law.a_x - p.gamma / 2, p.omega - law.a_p,
                  -p.omega - law.b_x, -law.b_p - p.gamma / 2;
            Eigen::Matrix3d A3;
            const double a = A2(0, 0), b = A2(0, 1), c = A2(1, 0), d = A2(1, 1);
            A3 << 2 * a, 0, 2 * b, 0, 2 * d, 2 * c, c, b, a + d;
            Eigen::EigenSolver<Eigen::Matrix3d> es(A3);

            // match as multisets: nearest-neighbour pairing, since sorting by
            // (real, imag) is unstable when real parts tie up to roundoff
            std::vector<std::complex<double>> want(3), got(ev.begin(), ev.end());
            for (int j = 0; j < 3; ++j) want[j] = es.eigenvalues()(j);
            std::array<bool, 3> used{};
            for (int j = 0; j < 3; ++j) {
                int best = -1;
                double dist = 0.0;
                for (int l = 0; l < 3; ++l) {
                    if (used[l]) continue;
                    const double d = std::abs(got[j] - want[l]);
                    if (best < 0 || d < dist) {
                        best = l;
                        dist = d;
                    }
                }
                used[best] = true;
                CHECK(close_abs(dist, 0.0, 1e-10));
            }
        }
    }
}

}  // TEST_SUITE
