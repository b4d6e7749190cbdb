#pragma once

// Command-line front end. Exit codes: 0 pass, 1 fail, 2 usage or configuration
// error (reported as a JSON object on the error stream).

#include <ostream>

namespace maplab::cli {

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace maplab::cli
