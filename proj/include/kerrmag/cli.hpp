#pragma once

// Command-line front end: kerr, spectrum, sweep, simulate, fit.
//
// Exit codes: 0 ok, 2 config/usage, 3 I/O, 4 numerical failure.

#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace kerrmag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

/// Invalid or incomplete run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Applies `key.path=value` overrides, converts annotated dBm powers to mW,
/// fills defaults and rejects unknown keys. `command` selects the task block.
[[nodiscard]] nlohmann::json resolve_config(const nlohmann::json& raw, const std::string& command,
                                            const std::vector<std::string>& overrides = {});

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kerrmag::cli
