#pragma once

// Command layer of the linewalk front-end. main.cpp only parses flags; every
// command lives here so that tests can drive it without a process boundary.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace linewalk::app {

enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2, exit_io = 3 };

/// Names accepted by run(); dump-env and overscaling are extras beside the six studies.
const std::vector<std::string>& command_names();

/// Flat key=value text: one pair per line, '#' starts a comment, blank lines ignored.
/// ConfigError (with the key) for malformed lines, unknown keys or repeated keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

struct Options {
  std::string command;
  std::optional<std::filesystem::path> config_path;
  /// key=value overrides from the command line, applied after the config file.
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  /// Value of LINEWALK_SEED, if set; --seed wins over it.
  std::optional<std::string> seed_env;
  unsigned workers = 0;
  std::filesystem::path out_dir = "out";
  /// Subset of {csv, json, svg}; empty means every format the command produces.
  std::set<std::string> formats;
};

/// Runs one command and writes its artifacts. Progress and the pass/fail
/// summary go to `log`, errors to `err`. Returns an ExitCode.
int run(const Options& opts, std::ostream& log, std::ostream& err);

}  // namespace linewalk::app
