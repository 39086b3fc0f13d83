#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace epibound::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable that, when set, replaces the output directory.
inline constexpr const char* kOutDirEnv = "EPIBOUND_OUT_DIR";

/// Runs the tool on arguments excluding the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

/// "1:50", "1,2,5" and mixtures such as "1,2,5:10".
std::vector<std::size_t> parse_index_list(const std::string& text);
std::vector<double> parse_number_list(const std::string& text);

}  // namespace epibound::cli
