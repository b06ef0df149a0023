#pragma once

#include <iosfwd>

namespace sketchedit::app {

/// Entry point of the sketchedit command. Returns 0 on success, 1 on a
/// runtime failure (message on `err`) and 2 on a usage error.
int cli_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sketchedit::app
