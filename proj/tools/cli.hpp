#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ccgm::cli {

inline constexpr int kOk = 0;
inline constexpr int kDataError = 1;
inline constexpr int kUsageError = 2;

struct CommandInfo {
  std::string name;
  std::string summary;
  /// Library operations the command reaches.
  std::vector<std::string> operations;
};

const std::vector<CommandInfo>& command_registry();

/// Runs one command line (without the program name). Input is read from
/// `--input`, or from `in` when the path is "-".
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace ccgm::cli
