#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qfc/commands.hpp"
#include "qfc/config.hpp"
#include "qfc/thermo.hpp"

namespace {

// CLI options are collected as config lines so one parser validates
// everything and names the offending key.
struct Cli {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> sets;
    std::string schemes_csv;
};

qfc::RunConfig build_config(const Cli& cli) {
    std::string text;
    if (!cli.config_path.empty()) {
        std::ifstream in(cli.config_path);
        if (!in) {
            throw qfc::MissingKey("cannot open config file '" + cli.config_path + "'");
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        text = ss.str();
    }
    for (const std::string& s : cli.sets) {
        text += "\n" + s;
    }
    qfc::RunConfig cfg = qfc::parse_config(text);
    if (!cli.out_path.empty()) cfg.out_path = cli.out_path;
    return cfg;
}

std::vector<qfc::SchemeKind> parse_schemes(const std::string& csv) {
    std::vector<qfc::SchemeKind> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(qfc::scheme_from_name(item));
    }
    if (out.empty()) {
        throw qfc::RangeError("no scheme named in '" + csv + "'");
    }
    return out;
}

// Stream for CSV output: the --out file when set, else stdout.
class CsvSink {
  public:
    explicit CsvSink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) {
                throw qfc::RangeError("cannot write output file '" + path + "'");
            }
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

  private:
    std::ofstream file_;
};

void print_full_report(const qfc::RunConfig& cfg) {
    const qfc::SystemParams p = cfg.make_params();
    const qfc::RateReport r = qfc::steady_report(cfg.make_law(), p, cfg.scheme);
    auto line = [](const char* name, double v) {
        std::printf("%-22s %s\n", name, qfc::fmt17(v).c_str());
    };
    std::printf("%-22s %s\n", "scheme", qfc::scheme_name(cfg.scheme).c_str());
    std::printf("%-22s %s\n", "estimator", qfc::estimator_name(cfg.estimator).c_str());
    line("g", cfg.g);
    line("gamma", p.gamma);
    line("nbar", p.nbar);
    line("k", p.k);
    line("eta", p.eta);
    line("T_bath", r.T);
    line("n_occ", r.n_occ);
    line("n_min", r.n_min);
    line("q_dot", r.q_dot);
    line("w_ext", r.w_ext);
    line("w_u", r.w_u);
    line("w_v", r.w_v);
    line("Tu", r.Tu);
    line("Tv", r.Tv);
    line("TG", r.TG);
    line("i_qct", r.i_qct);
    line("i_qci_s", r.i_qci_s);
    line("s_ba", r.s_ba);
    line("margin_eq10", r.margin_eq10);
    line("margin_eq11", r.margin_eq11);
    line("margin_eq12", r.margin_eq12);
    line("margin_eq13", r.margin_eq13);
    line("margin_eq16", r.margin_eq16);
    line("margin_eq17", r.margin_eq17);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Continuous-measurement feedback cooling of a Gaussian oscillator"};
    app.require_subcommand(1);
    app.fallthrough();

    Cli cli;
    app.add_option("--config", cli.config_path, "config file (key = value lines)");
    app.add_option("--out", cli.out_path, "write CSV here instead of stdout");
    app.add_option("--set", cli.sets, "override any config key, e.g. --set params.eta=0.5");

    // shorthands mapped onto config keys
    std::string opt_scheme, opt_g, opt_from, opt_to, opt_points, opt_seed,
        opt_traj, opt_steps, opt_dt, opt_burn, opt_threads, opt_dump;
    bool opt_linear = false;
    app.add_option("--scheme", opt_scheme, "qnd | annihilation_homodyne | dual_no_damp");
    app.add_option("-g,--gain", opt_g, "feedback gain");
    app.add_option("--from", opt_from, "sweep start gain");
    app.add_option("--to", opt_to, "sweep end gain");
    app.add_option("--points", opt_points, "sweep point count");
    app.add_flag("--linear", opt_linear, "linear sweep grid instead of log");
    app.add_option("--seed", opt_seed, "ensemble RNG seed");
    app.add_option("--traj", opt_traj, "trajectory count");
    app.add_option("--steps", opt_steps, "steps per trajectory");
    app.add_option("--dt", opt_dt, "integrator step");
    app.add_option("--burn-in", opt_burn, "discarded steps (negative = auto)");
    app.add_option("--threads", opt_threads, "worker threads (0 = hardware)");
    app.add_option("--dump", opt_dump, "dump the first N trajectories to CSV");

    auto* sc_steady = app.add_subcommand("steady", "solve one operating point");
    auto* sc_report = app.add_subcommand("report", "full rate report at one operating point");
    auto* sc_sweep = app.add_subcommand("sweep", "sweep the feedback gain");
    auto* sc_compare = app.add_subcommand("compare", "sweep several schemes side by side");
    sc_compare->add_option("--schemes", cli.schemes_csv, "comma-separated scheme names");
    auto* sc_traj = app.add_subcommand("trajectories", "stochastic ensemble vs prediction");

    CLI11_PARSE(app, argc, argv);

    try {
        auto set = [&](const char* key, const std::string& v) {
            if (!v.empty()) cli.sets.push_back(std::string(key) + " = " + v);
        };
        set("scheme", opt_scheme);
        set("feedback.g", opt_g);
        set("sweep.min", opt_from);
        set("sweep.max", opt_to);
        set("sweep.points", opt_points);
        if (opt_linear) cli.sets.push_back("sweep.log = false");
        set("sim.seed", opt_seed);
        set("sim.n_traj", opt_traj);
        set("sim.n_steps", opt_steps);
        set("sim.dt", opt_dt);
        set("sim.burn_in", opt_burn);
        set("sim.threads", opt_threads);
        set("sim.dump_trajectories", opt_dump);

        const qfc::RunConfig cfg = build_config(cli);
        qfc::CommandResult res;
        if (sc_steady->parsed()) {
            if (cfg.out_path.empty()) {
                res = qfc::cmd_steady(cfg, std::cout, nullptr);
            } else {
                CsvSink sink(cfg.out_path);
                res = qfc::cmd_steady(cfg, std::cout, &sink.stream());
            }
        } else if (sc_report->parsed()) {
            print_full_report(cfg);
        } else if (sc_sweep->parsed()) {
            CsvSink sink(cfg.out_path);
            res = qfc::cmd_sweep(cfg, sink.stream());
        } else if (sc_compare->parsed()) {
            const std::vector<qfc::SchemeKind> schemes =
                cli.schemes_csv.empty()
                    ? std::vector<qfc::SchemeKind>{qfc::SchemeKind::QndPosition,
                                                   qfc::SchemeKind::AnnihilationHomodyne,
                                                   qfc::SchemeKind::DualNoDamp}
                    : parse_schemes(cli.schemes_csv);
            CsvSink sink(cfg.out_path);
            res = qfc::cmd_compare(cfg, schemes, sink.stream());
        } else if (sc_traj->parsed()) {
            CsvSink sink(cfg.out_path);
            res = qfc::cmd_trajectories(cfg, sink.stream());
        }
        return res.exit_code;
    } catch (const qfc::SimError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
