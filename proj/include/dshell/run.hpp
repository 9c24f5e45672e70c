#pragma once

#include <iosfwd>

#include "dshell/config.hpp"
#include "dshell/surface.hpp"

namespace dshell {

// Exit status for a validated config: 0 on success, 1 when a verification run
// finds a residual above tolerance. Module errors propagate as dshell::Error.
int run(const RunConfig& cfg, std::ostream& out);

SurfaceMesh build_mesh(const RunConfig& cfg, double a_max);

} // namespace dshell
