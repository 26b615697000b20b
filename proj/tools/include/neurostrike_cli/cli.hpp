#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace neurostrike::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Parses and runs one invocation. args excludes the program name.
/// Returns 0 on success, 1 on a domain error, 2 on a usage error.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a digest of a file, as 16 hex digits; used in manifests.
std::string file_digest(const std::string& path);

}  // namespace neurostrike::cli
