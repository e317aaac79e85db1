#ifndef CDL_TOOLS_CLI_HPP
#define CDL_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace cdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Runs one command. `args` excludes the program name. Machine-readable
/// results go to `out`, progress and diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Flat key=value config text (one pair per line, `#` starts a comment) turned
/// into `--key=value` arguments. Throws ConfigError on malformed lines.
std::vector<std::string> config_arguments(const std::string& text);

/// "2:64:2,80" style lists: single values or inclusive start:stop:step ranges.
std::vector<long> parse_int_list(const std::string& text);

}  // namespace cdl::cli

#endif  // CDL_TOOLS_CLI_HPP
