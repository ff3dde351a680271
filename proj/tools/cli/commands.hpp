#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "config.hpp"
#include "vmpfc/records.hpp"

namespace vmpfc::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,         ///< bad command line
  kExitConfig = 2,        ///< invalid configuration or scheme constants
  kExitNumerical = 3,     ///< a run failed numerically
  kExitIo = 4,            ///< file-system or format failure
  kExitVerification = 5,  ///< a check ran and did not pass
};

/// Exit code and short label ("config error", ...) for a caught exception.
std::pair<int, std::string> classify(const std::exception_ptr& e);

struct CommandContext {
  std::filesystem::path out_dir = "out";
  int threads = 1;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

/// Exclusive ownership of an output directory for the lifetime of the object.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& dir);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

int cmd_run(const RunConfig& cfg, const CommandContext& ctx);
int cmd_converge(const RunConfig& cfg, const CommandContext& ctx);
int cmd_adapt_compare(const RunConfig& cfg, const CommandContext& ctx);
int cmd_info(const RunConfig& cfg, const CommandContext& ctx);
int cmd_verify_series(const std::filesystem::path& csv, const SeriesCheckOptions& opts, const CommandContext& ctx);

}  // namespace vmpfc::cli
