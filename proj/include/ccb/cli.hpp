#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ccb::cli {

inline constexpr std::string_view kToolVersion = "ccb 0.1.0";
inline constexpr std::string_view kManifestFormat = "ccb-manifest/1";

/// Entry point shared by the ccb binary and the test suite. `args` holds
/// the command line without the program name. Returns the process exit
/// code: 0 success, 1 runtime failure, 2 usage error.
///
/// Commands:
///   gen     synthesize a benchmark instance file
///   run     evaluate paradigms over an instance, writing records + manifest
///   score   stratify a records file into every report format
///   report  stratify a records file into selected formats
///   oracle  print exact indicator values for a statement file
///
/// `run` reads LLM credentials from CCB_LLM_ENDPOINT / CCB_LLM_MODEL /
/// CCB_LLM_API_KEY when no --transcript or --sim backend is chosen; there
/// are no secret-bearing flags. Every file the tool writes has its sha256
/// printed, and identical flags with scripted backends reproduce identical
/// primary outputs byte for byte.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ccb::cli
