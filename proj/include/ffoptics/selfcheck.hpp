#pragma once

#include <ostream>

namespace ffo {

struct SelfcheckOptions {
    int modes = 45;
    int grid = 64;
    double dz = 1e-3;
};

// Runs the conservation, linear-limit, and grid-convergence suites against
// the default medium; prints one line per suite. Returns 0 when all pass.
int fiber_selfcheck(const SelfcheckOptions& opt, std::ostream& out);

}  // namespace ffo
