#include "qfc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qfc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size()) {
        throw RangeError(key + ": cannot parse '" + value + "' as a number");
    }
    return out;
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    char* end = nullptr;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) {
        throw RangeError(key + ": cannot parse '" + value + "' as an integer");
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (!v.empty() && v[0] == '-') {
        throw RangeError(key + ": must be non-negative, got " + v);
    }
    char* end = nullptr;
    const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
    if (v.empty() || end != v.c_str() + v.size()) {
        throw RangeError(key + ": cannot parse '" + value + "' as an integer");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw RangeError(key + ": expected true or false, got '" + value + "'");
}

void require_nonneg(const std::string& key, double v) {
    if (!(v >= 0.0)) throw RangeError(key + ": must be >= 0, got " + std::to_string(v));
}

}  // namespace

SchemeKind scheme_from_name(const std::string& name) {
    if (name == "qnd") return SchemeKind::QndPosition;
    if (name == "annihilation_homodyne") return SchemeKind::AnnihilationHomodyne;
    if (name == "dual_no_damp") return SchemeKind::DualNoDamp;
    if (name == "pure_measurement") return SchemeKind::PureMeasurement;
    throw RangeError("unknown scheme name '" + name + "'");
}

std::string scheme_name(SchemeKind scheme) {
    switch (scheme) {
        case SchemeKind::QndPosition: return "qnd";
        case SchemeKind::AnnihilationHomodyne: return "annihilation_homodyne";
        case SchemeKind::DualNoDamp: return "dual_no_damp";
        case SchemeKind::PureMeasurement: return "pure_measurement";
    }
    throw RangeError("bad scheme enum value");
}

Estimator estimator_from_name(const std::string& name) {
    if (name == "kalman_xp") return Estimator::KalmanXP;
    if (name == "kalman_x_only") return Estimator::KalmanXOnly;
    if (name == "direct") return Estimator::Direct;
    throw RangeError("unknown estimator name '" + name + "'");
}

std::string estimator_name(Estimator estimator) {
    switch (estimator) {
        case Estimator::KalmanXP: return "kalman_xp";
        case Estimator::KalmanXOnly: return "kalman_x_only";
        case Estimator::Direct: return "direct";
    }
    throw RangeError("bad estimator enum value");
}

SystemParams RunConfig::make_params() const {
    double nb, gam;
    if (gamma_over_omega.has_value()) {
        nb = *nbar;
        gam = *gamma_over_omega;
    } else {
        nb = nbar_from_kelvin(T_kelvin.value_or(292.0), omega_hz.value_or(1e5));
        const double ng = nbar_gamma_over_omega.value_or(0.0058);
        gam = nb > 0.0 ? ng / nb : 0.0;
    }
    return system_params(1.0, gam, nb, k_over_omega, eta);
}

FeedbackLaw RunConfig::make_law(double gval) const {
    FeedbackLaw law;
    switch (estimator) {
        case Estimator::KalmanXP: law = kalman_xp(gval); break;
        case Estimator::KalmanXOnly: law = kalman_x_only(gval); break;
        case Estimator::Direct: law = direct_law(gval, 0.0); break;
    }
    // Explicit gains pin the configured operating point; a swept gain keeps
    // the plain estimator convention.
    if (gval == g) {
        if (a_x) law.a_x = *a_x;
        if (a_p) law.a_p = *a_p;
        if (b_x) law.b_x = *b_x;
        if (b_p) law.b_p = *b_p;
    }
    return law;
}

RunConfig parse_config(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string raw;
    while (std::getline(in, raw)) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw RangeError("config line '" + line + "' has no '='");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "params.k_over_omega") {
            c.k_over_omega = parse_double(key, value);
            require_nonneg(key, c.k_over_omega);
        } else if (key == "params.eta") {
            c.eta = parse_double(key, value);
            if (!(c.eta > 0.0) || c.eta > 1.0) {
                throw RangeError("params.eta must lie in (0, 1], got " + value);
            }
        } else if (key == "params.gamma_over_omega") {
            c.gamma_over_omega = parse_double(key, value);
            require_nonneg(key, *c.gamma_over_omega);
        } else if (key == "params.nbar") {
            c.nbar = parse_double(key, value);
            require_nonneg(key, *c.nbar);
        } else if (key == "params.nbar_gamma_over_omega") {
            c.nbar_gamma_over_omega = parse_double(key, value);
            require_nonneg(key, *c.nbar_gamma_over_omega);
        } else if (key == "params.T_kelvin") {
            c.T_kelvin = parse_double(key, value);
            if (!(*c.T_kelvin > 0.0)) {
                throw RangeError("params.T_kelvin must be > 0, got " + value);
            }
        } else if (key == "params.omega_hz") {
            c.omega_hz = parse_double(key, value);
            if (!(*c.omega_hz > 0.0)) {
                throw RangeError("params.omega_hz must be > 0, got " + value);
            }
        } else if (key == "scheme") {
            try {
                c.scheme = scheme_from_name(value);
            } catch (const RangeError& e) {
                throw RangeError("scheme: " + std::string(e.what()));
            }
        } else if (key == "feedback.estimator") {
            try {
                c.estimator = estimator_from_name(value);
            } catch (const RangeError& e) {
                throw RangeError("feedback.estimator: " + std::string(e.what()));
            }
        } else if (key == "feedback.g") {
            c.g = parse_double(key, value);
        } else if (key == "feedback.a_x") {
            c.a_x = parse_double(key, value);
        } else if (key == "feedback.a_p") {
            c.a_p = parse_double(key, value);
        } else if (key == "feedback.b_x") {
            c.b_x = parse_double(key, value);
        } else if (key == "feedback.b_p") {
            c.b_p = parse_double(key, value);
        } else if (key == "sweep.param") {
            if (value != "g") {
                throw RangeError("sweep.param only supports 'g', got '" + value + "'");
            }
            c.sweep.param = value;
        } else if (key == "sweep.min") {
            c.sweep.from = parse_double(key, value);
        } else if (key == "sweep.max") {
            c.sweep.to = parse_double(key, value);
        } else if (key == "sweep.points") {
            const std::int64_t n = parse_int(key, value);
            if (n < 1) throw RangeError("sweep.points must be >= 1, got " + value);
            c.sweep.points = static_cast<int>(n);
        } else if (key == "sweep.log") {
            c.sweep.log = parse_bool(key, value);
        } else if (key == "sim.dt") {
            c.sim.dt = parse_double(key, value);
            if (!(c.sim.dt > 0.0)) {
                throw RangeError("sim.dt must be > 0, got " + value);
            }
        } else if (key == "sim.n_steps") {
            c.sim.n_steps = parse_int(key, value);
            if (c.sim.n_steps < 1) {
                throw RangeError("sim.n_steps must be >= 1, got " + value);
            }
        } else if (key == "sim.n_traj") {
            c.sim.n_traj = parse_int(key, value);
            if (c.sim.n_traj < 1) {
                throw RangeError("sim.n_traj must be >= 1, got " + value);
            }
        } else if (key == "sim.burn_in") {
            c.sim.burn_in = parse_int(key, value);
        } else if (key == "sim.seed") {
            c.sim.seed = parse_uint(key, value);
        } else if (key == "sim.threads") {
            const std::int64_t n = parse_int(key, value);
            if (n < 0) throw RangeError("sim.threads must be >= 0, got " + value);
            c.threads = static_cast<int>(n);
        } else if (key == "sim.dump_trajectories") {
            c.dump_trajectories = parse_int(key, value);
            if (c.dump_trajectories < 0) {
                throw RangeError("sim.dump_trajectories must be >= 0, got " + value);
            }
        } else if (key == "output.path") {
            c.out_path = value;
        } else if (key == "output.format") {
            if (value != "csv") {
                throw RangeError("output.format only supports 'csv', got '" + value + "'");
            }
            c.format = value;
        } else {
            throw UnknownKey("unknown config key '" + key + "'");
        }
    }

    const bool direct_bath = c.gamma_over_omega.has_value() || c.nbar.has_value();
    const bool thermal_bath = c.nbar_gamma_over_omega.has_value()
                              || c.T_kelvin.has_value() || c.omega_hz.has_value();
    if (direct_bath && thermal_bath) {
        const std::string a = c.gamma_over_omega ? "params.gamma_over_omega"
                                                 : "params.nbar";
        const std::string b = c.nbar_gamma_over_omega
                                  ? "params.nbar_gamma_over_omega"
                                  : (c.T_kelvin ? "params.T_kelvin" : "params.omega_hz");
        throw RangeError("bath given twice: " + a + " conflicts with " + b);
    }
    if (direct_bath && !(c.gamma_over_omega.has_value() && c.nbar.has_value())) {
        throw MissingKey(c.gamma_over_omega
                             ? "params.gamma_over_omega needs params.nbar"
                             : "params.nbar needs params.gamma_over_omega");
    }
    if (c.sweep.log && (!(c.sweep.from > 0.0) || !(c.sweep.to > 0.0))) {
        throw RangeError("sweep.min and sweep.max must be > 0 for a log sweep");
    }
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw MissingKey("cannot open config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace qfc
