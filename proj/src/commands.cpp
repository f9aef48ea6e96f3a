#include "qfc/commands.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

namespace qfc {

namespace {

struct NamedError {
    std::string name;
    std::string what;
};

// Maps the thrown type to its name for flagged rows; SimError last.
template <typename Fn>
bool run_named(Fn&& fn, NamedError& err) {
    try {
        fn();
        return true;
    } catch (const NonPositive& e)          { err = {"NonPositive", e.what()}; }
      catch (const HeisenbergViolation& e)  { err = {"HeisenbergViolation", e.what()}; }
      catch (const NoConvergence& e)        { err = {"NoConvergence", e.what()}; }
      catch (const NotHurwitz& e)           { err = {"NotHurwitz", e.what()}; }
      catch (const EfficiencyZero& e)       { err = {"EfficiencyZero", e.what()}; }
      catch (const UnsupportedScheme& e)    { err = {"UnsupportedScheme", e.what()}; }
      catch (const UnsupportedEstimator& e) { err = {"UnsupportedEstimator", e.what()}; }
      catch (const NotSteady& e)            { err = {"NotSteady", e.what()}; }
      catch (const StiffnessGuard& e)       { err = {"StiffnessGuard", e.what()}; }
      catch (const UnknownKey& e)           { err = {"UnknownKey", e.what()}; }
      catch (const MissingKey& e)           { err = {"MissingKey", e.what()}; }
      catch (const RangeError& e)           { err = {"RangeError", e.what()}; }
      catch (const SimError& e)             { err = {"SimError", e.what()}; }
    return false;
}

double grid_g(const SweepSpec& s, int i) {
    if (s.points == 1) return s.from;
    const double t = static_cast<double>(i) / (s.points - 1);
    return s.log ? s.from * std::pow(s.to / s.from, t)
                 : s.from + (s.to - s.from) * t;
}

void report_text(std::ostream& out, const RunConfig& config, const RateReport& r) {
    char buf[64];
    auto line = [&](const char* name, double v) {
        std::snprintf(buf, sizeof buf, "%-22s %.10g\n", name, v);
        out << buf;
    };
    out << "scheme                 " << scheme_name(config.scheme) << "\n";
    out << "estimator              " << estimator_name(config.estimator) << "\n";
    line("g", config.g);
    line("n_occ", r.n_occ);
    line("n_min", r.n_min);
    line("q_dot", r.q_dot);
    line("w_ext", r.w_ext);
    line("i_qct", r.i_qct);
    line("i_qci_s", r.i_qci_s);
    line("s_ba", r.s_ba);
    line("Tu", r.Tu);
    line("Tv", r.Tv);
    line("TG", r.TG);
    line("T_bath", r.T);
}

std::string dump_prefix_for(const std::string& out_path) {
    if (out_path.empty()) return "traj_dump_";
    std::string base = out_path;
    const std::string ext = ".csv";
    if (base.size() > ext.size()
        && base.compare(base.size() - ext.size(), ext.size(), ext) == 0) {
        base.resize(base.size() - ext.size());
    }
    return base + "_traj_";
}

}  // namespace

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

const char* const kSweepHeader =
    "g,n_occ,n_min,w_u_over_Tu_plus_w_v_over_Tv,i_qct,w_ext_over_T,ratio,"
    "margin_eq10,margin_eq11,margin_eq12,margin_eq13,margin_eq16,margin_eq17";

std::string sweep_row(double gval, const RunConfig& config,
                      const CovarianceMatrix& cov_c, const SystemParams& params) {
    const FeedbackLaw law = config.make_law(gval);
    const CovarianceMatrix m = steady_sigma_m(cov_c, law, params, config.scheme);
    const CovarianceMatrix sigma{cov_c.sxx + m.sxx, cov_c.spp + m.spp,
                                 cov_c.sxp + m.sxp};
    const RateReport r = inequality_report(sigma, cov_c, m, law, params, config.scheme);
    const double info_sum = r.w_u / r.Tu + r.w_v / r.Tv;
    const double ratio = info_sum / r.i_qct;
    std::string row = fmt17(gval);
    row += "," + fmt17(r.n_occ);
    row += "," + fmt17(r.n_min);
    row += "," + fmt17(info_sum);
    row += "," + fmt17(r.i_qct);
    row += "," + fmt17(r.w_ext / r.T);
    row += "," + fmt17(ratio);
    row += "," + fmt17(r.margin_eq10);
    row += "," + fmt17(r.margin_eq11);
    row += "," + fmt17(r.margin_eq12);
    row += "," + fmt17(r.margin_eq13);
    row += "," + fmt17(r.margin_eq16);
    row += "," + fmt17(r.margin_eq17);
    return row;
}

CommandResult cmd_steady(const RunConfig& config, std::ostream& text_out,
                         std::ostream* csv_out) {
    NamedError err;
    std::string row;
    RateReport r;
    const bool ok = run_named(
        [&] {
            const SystemParams p = config.make_params();
            const CovarianceMatrix c = steady_sigma_c(p, config.scheme);
            row = sweep_row(config.g, config, c, p);
            r = steady_report(config.make_law(), p, config.scheme);
        },
        err);
    if (!ok) {
        text_out << "error: " << err.name << ": " << err.what << "\n";
        return {1, 0};
    }
    report_text(text_out, config, r);
    if (csv_out != nullptr) {
        *csv_out << kSweepHeader << "\n" << row << "\n";
    }
    return {0, 0};
}

CommandResult cmd_sweep(const RunConfig& config, std::ostream& out) {
    NamedError err;
    SystemParams p;
    CovarianceMatrix c;
    const bool ok = run_named(
        [&] {
            p = config.make_params();
            c = steady_sigma_c(p, config.scheme);
        },
        err);
    out << kSweepHeader << "\n";
    if (!ok) {
        out << "# FAILED setup " << err.name << ": " << err.what << "\n";
        return {1, 0};
    }
    int flagged = 0;
    for (int i = 0; i < config.sweep.points; ++i) {
        const double gval = grid_g(config.sweep, i);
        std::string row;
        if (run_named([&] { row = sweep_row(gval, config, c, p); }, err)) {
            out << row << "\n";
        } else {
            out << "# FAILED g=" << fmt17(gval) << " " << err.name << ": "
                << err.what << "\n";
            ++flagged;
        }
    }
    return {flagged > 0 ? 1 : 0, flagged};
}

CommandResult cmd_compare(const RunConfig& config,
                          const std::vector<SchemeKind>& schemes, std::ostream& out) {
    if (schemes.size() == 1) {
        RunConfig single = config;
        single.scheme = schemes[0];
        return cmd_sweep(single, out);
    }
    out << "scheme," << kSweepHeader << "\n";
    int flagged = 0;
    for (const SchemeKind scheme : schemes) {
        RunConfig sub = config;
        sub.scheme = scheme;
        const std::string name = scheme_name(scheme);
        NamedError err;
        SystemParams p;
        CovarianceMatrix c;
        const bool ok = run_named(
            [&] {
                p = sub.make_params();
                c = steady_sigma_c(p, sub.scheme);
            },
            err);
        if (!ok) {
            out << "# FAILED scheme=" << name << " setup " << err.name << ": "
                << err.what << "\n";
            ++flagged;
            continue;
        }
        for (int i = 0; i < sub.sweep.points; ++i) {
            const double gval = grid_g(sub.sweep, i);
            std::string row;
            if (run_named([&] { row = sweep_row(gval, sub, c, p); }, err)) {
                out << name << "," << row << "\n";
            } else {
                out << "# FAILED scheme=" << name << " g=" << fmt17(gval) << " "
                    << err.name << ": " << err.what << "\n";
                ++flagged;
            }
        }
    }
    return {flagged > 0 ? 1 : 0, flagged};
}

CommandResult cmd_trajectories(const RunConfig& config, std::ostream& out) {
    NamedError err;
    EnsembleStats st;
    CovarianceMatrix c, m;
    const bool ok = run_named(
        [&] {
            const SystemParams p = config.make_params();
            const FeedbackLaw law = config.make_law();
            c = steady_sigma_c(p, config.scheme);
            m = steady_sigma_m(c, law, p, config.scheme);
            st = run_ensemble(config.sim, law, p, config.scheme, config.threads,
                              config.dump_trajectories,
                              dump_prefix_for(config.out_path));
        },
        err);
    if (!ok) {
        out << "error: " << err.name << ": " << err.what << "\n";
        return {1, 0};
    }
    auto row = [&](const char* name, double value, double se, double predicted) {
        const double z = (value - predicted) / se;
        out << name << "," << fmt17(value) << "," << fmt17(se) << ","
            << fmt17(predicted) << "," << fmt17(z) << "\n";
    };
    out << "stat,value,se,predicted,z\n";
    row("sxx_m", st.sxx_m, st.se_sxx_m, m.sxx);
    row("spp_m", st.spp_m, st.se_spp_m, m.spp);
    row("sxp_m", st.sxp_m, st.se_sxp_m, m.sxp);
    const double pred_n = (c.sxx + m.sxx + c.spp + m.spp) / 2.0 - 0.5;
    row("n_occ", st.n_occ, st.se_n_occ, pred_n);
    return {0, 0};
}

}  // namespace qfc
