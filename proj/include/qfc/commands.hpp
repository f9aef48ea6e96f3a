#ifndef QFC_COMMANDS_HPP
#define QFC_COMMANDS_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "qfc/config.hpp"
#include "qfc/thermo.hpp"

// Batch orchestration and deterministic CSV emission. All floats are printed
// with 17 significant digits so every CSV parses back to identical doubles.

namespace qfc {

// "%.17g" formatting used for every CSV float.
std::string fmt17(double v);

// Exit status contract: 0 iff no row was flagged and no solver failed.
struct CommandResult {
    int exit_code = 0;
    int flagged_rows = 0;
};

// Sweep CSV header, exact column order.
extern const char* const kSweepHeader;

// One sweep row (no scheme column) for a given gain; throws solver errors.
std::string sweep_row(double gval, const RunConfig& config, const CovarianceMatrix& cov_c,
                      const SystemParams& params);

// Human-readable report plus (when out is non-null) the machine CSV row
// matching cmd_sweep's schema byte-for-byte at the same g.
CommandResult cmd_steady(const RunConfig& config, std::ostream& text_out,
                         std::ostream* csv_out);

// One row per sweep point; a failed point becomes a "# FAILED g=... " comment
// line and the run continues.
CommandResult cmd_sweep(const RunConfig& config, std::ostream& out);

// cmd_sweep per scheme, merged. The scheme column is emitted only when more
// than one scheme is listed, which keeps the single-scheme output
// byte-identical to cmd_sweep.
CommandResult cmd_compare(const RunConfig& config, const std::vector<SchemeKind>& schemes,
                          std::ostream& out);

// Ensemble run: summary CSV (sample vs Lyapunov prediction with standard
// errors) plus optional per-trajectory dumps next to the output path.
CommandResult cmd_trajectories(const RunConfig& config, std::ostream& out);

}  // namespace qfc

#endif
