#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace probekit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Entry point of the `probekit` tool. Subcommands: prepare-data, embed,
/// run, sweep, report. Returns 0 on success, 1 on user error and 2 on
/// provider or I/O failure.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version_string();

}  // namespace probekit
