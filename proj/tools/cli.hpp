#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tailorsum::cli {

// Runs one command. `args` excludes the program name. Errors are reported on
// `err` as a single line
//
//   error: <kind>: <field>: <message>
//
// where kind is usage, config, io or runtime. Exit status is 0 on success,
// 1 on a runtime failure (including a failed gradient check) and 2 on a
// usage or config error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Environment variable that overrides the output directory of a config file.
inline constexpr const char* kOutEnv = "TAILORSUM_OUT";

}  // namespace tailorsum::cli
