#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vmpfc/records.hpp"
#include "vmpfc/spectral.hpp"

namespace vmpfc {

/// Shortest form of %.17g; parses back to the same double.
std::string format_double(double v);

inline constexpr std::string_view kSeriesHeader = "t,dt,mass,e_original,e_pseudo,e_modified,e_discrete,aux,s_active";

void write_series_csv(const std::filesystem::path& path, const std::vector<TimeSeriesRecord>& rows);
/// Throws IoError on a missing file, a header mismatch or a malformed row.
std::vector<TimeSeriesRecord> read_series_csv(const std::filesystem::path& path);

struct SnapshotMeta {
  int dim = 0;
  std::vector<int> n;
  std::vector<double> length;
  double t = 0.0;
  std::string scheme;
  std::string field = "phi";
};

struct Snapshot {
  SnapshotMeta meta;
  std::vector<double> values;
};

/// File-name tag for a snapshot time, e.g. 12.5 -> "12.5".
std::string snapshot_tag(double t);

/// Writes <dir>/<field>_t<tag>.f64 (little-endian float64, row-major) and the
/// matching .json sidecar. Returns the .f64 path.
std::filesystem::path write_snapshot(const std::filesystem::path& dir, const RealField& f, double t,
                                     std::string_view scheme, std::string_view field = "phi");

/// Reads a .f64 file and its sidecar (same stem, .json).
Snapshot read_snapshot(const std::filesystem::path& f64_path);

/// Grid described by a sidecar.
GridPtr snapshot_grid(const SnapshotMeta& meta);

}  // namespace vmpfc
