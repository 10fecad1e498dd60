#pragma once

namespace semsparse {

// Execution policy for the data-parallel kernels. Both policies run the same
// loop body; every kernel is written so that the result does not depend on the
// policy (no order-dependent reductions inside parallel regions).
enum class Exec { serial, parallel };

inline bool run_parallel(Exec exec) { return exec == Exec::parallel; }

}  // namespace semsparse
