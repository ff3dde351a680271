#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vmpfc/adaptive.hpp"
#include "vmpfc/model.hpp"
#include "vmpfc/schemes.hpp"
#include "vmpfc/sim.hpp"

namespace vmpfc::cli {

// Config files are a flat TOML subset:
//
//   # comment
//   [section]
//   key = 1.5            numbers
//   key = true           booleans
//   key = "text"         strings
//   key = [1, 2, 3]      single-line arrays of numbers or strings
//
// Keys are addressed as "section.key". Unknown keys are errors.

using ConfigValue = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

struct ConfigEntry {
  ConfigValue value;
  std::string origin;  ///< "file:line" or "--set"
};

/// Ordered key/value store produced by the parser.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text, const std::string& origin);

  /// Applies "section.key=value". Unquoted values that are not numbers,
  /// booleans or arrays are taken as strings.
  void set(const std::string& assignment);

  const std::vector<std::pair<std::string, ConfigEntry>>& entries() const noexcept { return entries_; }
  const ConfigEntry* find(const std::string& key) const;

 private:
  void put(const std::string& key, ConfigEntry entry);
  std::vector<std::pair<std::string, ConfigEntry>> entries_;
};

enum class TimeMode { kFixed, kAdaptive };

struct RunConfig {
  int dim = 2;
  std::vector<int> n{64, 64};
  std::vector<double> length{128.0, 128.0};

  ModelParams model;
  SchemeKind scheme = SchemeKind::kSav;
  SchemeParams scheme_params;
  InitialCondition initial = RandomPerturbation{};
  bool manufactured_forcing = false;

  double T = 1.0;
  TimeMode mode = TimeMode::kFixed;
  int record_every = 10;
  std::vector<double> snapshot_times;
  bool check_residual = false;
  bool assert_energy = false;

  AdaptiveParams adaptive;
  ControllerKind controller = ControllerKind::kEvma;
  MonitoredEnergy monitored = MonitoredEnergy::kScheme;

  std::vector<double> dt_list;
  double converge_T = 1.0;
  double rate_min = 1.8;
  double rate_max = 2.2;
  bool first_order = false;

  std::vector<ControllerKind> controllers{ControllerKind::kEvma, ControllerKind::kLegacy};
  std::optional<double> fixed_dt;

  std::vector<std::string> warnings;

  GridPtr make_grid() const;
};

/// Builds and validates a RunConfig. Throws ConfigError naming the key.
RunConfig resolve(const ConfigDocument& doc);

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

/// Human-readable dump of every resolved parameter.
std::string describe(const RunConfig& cfg);

}  // namespace vmpfc::cli
