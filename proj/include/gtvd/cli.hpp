#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gtvd/solver.hpp"

namespace gtvd::cli {

enum ExitCode : int {
  kOk = 0,
  kModelFailed = 1,  // bench: at least one model failed; also unexpected errors
  kUsage = 2,
  kIo = 3,
  kParse = 4,
  kConvergence = 5,
  kDegenerate = 6,
};

// Flat "key = value" settings; '#' starts a comment. Keys are the
// DenoiseParams field names.
using Settings = std::map<std::string, std::string>;

// Throws ParseError (with line number) on a malformed line or duplicate key.
Settings parse_settings(std::string_view text);
Settings load_settings(const std::string& path);

struct RunConfig {
  DenoiseParams params;
  bool gamma_explicit = false;  // set by a flag or the config file
};

// Applies settings over `config` in place. Unknown keys and unparsable values
// throw InvalidArgument naming the key.
void apply_settings(RunConfig& config, const Settings& settings);

// Every tunable key with its current value, one per line, in a form
// parse_settings accepts.
std::string format_settings(const DenoiseParams& params);

std::vector<std::string> setting_keys();

// Entry point shared by the binary and the tests; args exclude argv[0].
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gtvd::cli
