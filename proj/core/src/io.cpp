#include "vmpfc/io.hpp"

#include <bit>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "vmpfc/error.hpp"

namespace vmpfc {

namespace fs = std::filesystem;

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

namespace {

double parse_double(const std::string& cell, std::size_t line) {
  // strtod flags subnormals with ERANGE but still returns them exactly, so
  // only the consumed length is checked
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size()) {
    throw IoError("series line " + std::to_string(line) + ": cannot parse '" + cell + "'");
  }
  return v;
}

std::uint64_t to_little_endian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t y = 0;
    for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return y;
  }
  return x;
}

}  // namespace

void write_series_csv(const fs::path& path, const std::vector<TimeSeriesRecord>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << kSeriesHeader << '\n';
  for (const TimeSeriesRecord& r : rows) {
    out << format_double(r.t) << ',' << format_double(r.dt) << ',' << format_double(r.mass) << ','
        << format_double(r.e_original) << ',' << format_double(r.e_pseudo) << ',' << format_double(r.e_modified)
        << ',' << format_double(r.e_discrete) << ',' << format_double(r.aux) << ',' << format_double(r.s_active)
        << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<TimeSeriesRecord> read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kSeriesHeader) {
    throw IoError("'" + path.string() + "': header does not match '" + std::string(kSeriesHeader) + "'");
  }
  std::vector<TimeSeriesRecord> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(parse_double(cell, line_no));
    if (v.size() != 9) throw IoError("series line " + std::to_string(line_no) + ": expected 9 columns");
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]});
  }
  return rows;
}

std::string snapshot_tag(double t) {
  std::ostringstream os;
  os << std::setprecision(10) << t;
  return os.str();
}

fs::path write_snapshot(const fs::path& dir, const RealField& f, double t, std::string_view scheme,
                        std::string_view field) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  const std::string stem = std::string(field) + "_t" + snapshot_tag(t);
  const fs::path bin = dir / (stem + ".f64");
  const fs::path side = dir / (stem + ".json");

  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + bin.string() + "' for writing");
    for (double v : f.values()) {
      const std::uint64_t le = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&le), sizeof le);
    }
    if (!out) throw IoError("write failed for '" + bin.string() + "'");
  }

  const Grid& g = *f.grid();
  nlohmann::json j;
  j["dim"] = g.dim();
  j["n"] = g.n();
  j["L"] = g.length();
  j["t"] = t;
  j["scheme"] = std::string(scheme);
  j["field"] = std::string(field);
  std::ofstream out(side, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + side.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + side.string() + "'");
  return bin;
}

Snapshot read_snapshot(const fs::path& f64_path) {
  fs::path side = f64_path;
  side.replace_extension(".json");
  std::ifstream js(side);
  if (!js) throw IoError("missing sidecar '" + side.string() + "'");

  Snapshot snap;
  try {
    const nlohmann::json j = nlohmann::json::parse(js);
    snap.meta.dim = j.at("dim").get<int>();
    snap.meta.n = j.at("n").get<std::vector<int>>();
    snap.meta.length = j.at("L").get<std::vector<double>>();
    snap.meta.t = j.at("t").get<double>();
    snap.meta.scheme = j.at("scheme").get<std::string>();
    snap.meta.field = j.at("field").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sidecar '" + side.string() + "': " + e.what());
  }
  if (snap.meta.dim < 1 || static_cast<std::size_t>(snap.meta.dim) != snap.meta.n.size() ||
      snap.meta.n.size() != snap.meta.length.size()) {
    throw IoError("bad sidecar '" + side.string() + "': dim, n and L disagree");
  }

  std::size_t count = 1;
  for (int n : snap.meta.n) count *= static_cast<std::size_t>(n);
  std::ifstream in(f64_path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + f64_path.string() + "'");
  snap.values.resize(count);
  for (double& v : snap.values) {
    std::uint64_t le = 0;
    if (!in.read(reinterpret_cast<char*>(&le), sizeof le)) {
      throw IoError("'" + f64_path.string() + "' is shorter than the sidecar implies");
    }
    v = std::bit_cast<double>(to_little_endian(le));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("'" + f64_path.string() + "' is longer than the sidecar implies");
  }
  return snap;
}

GridPtr snapshot_grid(const SnapshotMeta& meta) { return Grid::make(meta.n, meta.length); }

}  // namespace vmpfc
