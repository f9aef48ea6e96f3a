#ifndef QFC_CONFIG_HPP
#define QFC_CONFIG_HPP

#include <optional>
#include <string>

#include "qfc/dynamics.hpp"
#include "qfc/trajectory.hpp"

// Flat dotted-key config: one "key = value" per line, # comments. Absent keys
// fall back to the reproduction defaults (k/omega = 0.18, eta = 0.34,
// nbar*gamma/omega = 0.0058 from T = 292 K at omega/2pi = 1e5 Hz, QND scheme,
// Kalman XP at g = 1e4, 60-point log sweep over g in [1e-2, 1e4]).

namespace qfc {

struct SweepSpec {
    std::string param = "g";
    double from = 1e-2;
    double to = 1e4;
    int points = 60;
    bool log = true;
};

struct RunConfig {
    double k_over_omega = 0.18;
    double eta = 0.34;
    // Exactly one bath parameterization; defaults use the second.
    std::optional<double> gamma_over_omega;
    std::optional<double> nbar;
    std::optional<double> nbar_gamma_over_omega;
    std::optional<double> T_kelvin;
    std::optional<double> omega_hz;

    SchemeKind scheme = SchemeKind::QndPosition;
    Estimator estimator = Estimator::KalmanXP;
    double g = 1e4;
    // Explicit gains override the estimator convention when set (steady runs).
    std::optional<double> a_x, a_p, b_x, b_p;

    SweepSpec sweep;
    SimConfig sim;
    int threads = 0;              // worker hint for ensembles, 0 = hardware
    std::int64_t dump_trajectories = 0;

    std::string out_path;
    std::string format = "csv";

    SystemParams make_params() const;       // omega = 1 internally
    FeedbackLaw make_law(double gval) const;
    FeedbackLaw make_law() const { return make_law(g); }
};

// Parses config text. Throws UnknownKey / MissingKey / RangeError naming the
// offending key. Empty text yields the reproduction defaults.
RunConfig parse_config(const std::string& text);

RunConfig load_config_file(const std::string& path);

// Name <-> enum helpers shared by config and CLI.
SchemeKind scheme_from_name(const std::string& name);
std::string scheme_name(SchemeKind scheme);
Estimator estimator_from_name(const std::string& name);
std::string estimator_name(Estimator estimator);

}  // namespace qfc

#endif
