#include "vmpfc/records.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vmpfc {

TimeSeriesRecord make_record(SchemeKind kind, const SchemeState& s, const ModelParams& p, const SchemeParams& sp,
                             double dt) {
  const Energies e = evaluate_energies(kind, s, p, sp);
  TimeSeriesRecord r;
  r.t = s.t;
  r.dt = dt;
  r.mass = mean(s.phi_n) * s.phi_n.grid()->volume();
  r.e_original = e.original;
  r.e_pseudo = e.pseudo;
  r.e_modified = e.modified;
  r.e_discrete = e.discrete;
  r.aux = s.aux;
  r.s_active = s.current_s;
  return r;
}

namespace {

std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace

SeriesCheck verify_series(const std::vector<TimeSeriesRecord>& rows, const SeriesCheckOptions& opts) {
  SeriesCheck out;
  auto fail = [&](std::size_t row, const std::string& what) {
    out.ok = false;
    std::ostringstream os;
    os << "row " << row << ": " << what;
    out.problems.push_back(os.str());
  };
  if (rows.empty()) return out;

  const double mass0 = rows.front().mass;
  const double mass_tol = opts.mass_tolerance * std::max(1.0, std::abs(mass0));
  const bool use_discrete = std::isfinite(rows.front().e_discrete);
  auto energy = [&](const TimeSeriesRecord& r) { return use_discrete ? r.e_discrete : r.e_modified; };

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TimeSeriesRecord& r = rows[i];
    if (std::abs(r.mass - mass0) > mass_tol) fail(i, "mass drift " + sci(r.mass - mass0));
    if (i == 0) continue;
    const TimeSeriesRecord& q = rows[i - 1];
    if (!(r.t > q.t)) fail(i, "t not strictly increasing");
    if (opts.check_energy) {
      const double e0 = energy(q);
      const double e1 = energy(r);
      if (e1 - e0 > opts.energy_slack * std::max(1.0, std::abs(e0))) {
        fail(i, "energy increased by " + sci(e1 - e0));
      }
    }
    // the initial row carries dt = 0 and the last row may be truncated
    if (opts.ratio_max > 0.0 && i >= 2 && i + 1 < rows.size() && q.dt > 0.0) {
      const double rho = r.dt / q.dt;
      const double slack = 1e-12;
      if (rho > opts.ratio_max * (1 + slack) || rho < (1 - slack) / opts.ratio_max) {
        fail(i, "step ratio " + sci(rho) + " outside the clamp");
      }
    }
  }
  return out;
}

}  // namespace vmpfc
