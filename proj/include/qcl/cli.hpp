#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qcl::cli {

/// Runs one command line (without the program name). Returns the exit status:
/// run: 0 converged, 2 horizon reached without convergence, 1 error;
/// bound: 0 or 1; sweep: 0, or 2 when any cell failed; check: 0 iff all
/// suites pass.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

} // namespace qcl::cli
