#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drumhead::cli {

enum ExitCode : int {
  ok = 0,
  usage = 1,          // bad arguments or invalid input content
  io_failure = 2,
  not_converged = 3,  // crystal minimizer ran out of budget, or an unconverged lattice was supplied
  not_planar = 4,
  fit_not_converged = 5,
  insufficient_span = 6,
  fit_at_boundary = 7,  // result still written
  unphysical_background = 8,
};

/// Runs the command line `args` (without the program name). Human-readable
/// output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drumhead::cli
