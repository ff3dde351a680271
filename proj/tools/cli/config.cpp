#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "vmpfc/error.hpp"
#include "vmpfc/io.hpp"

namespace vmpfc::cli {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::string t;
  for (char c : s) {
    if (c != '_') t += c;  // TOML digit separators
  }
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return std::nullopt;
  return v;
}

std::optional<std::string> parse_string(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return std::nullopt;
}

std::vector<std::string> split_array(const std::string& inner) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char c : inner) {
    if (c == '"') in_string = !in_string;
    if (c == ',' && !in_string) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

std::optional<ConfigValue> parse_value(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true") return ConfigValue{true};
  if (s == "false") return ConfigValue{false};
  if (auto str = parse_string(s)) return ConfigValue{*str};
  if (auto num = parse_number(s)) return ConfigValue{*num};
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    const auto items = split_array(s.substr(1, s.size() - 2));
    if (items.empty()) return ConfigValue{std::vector<double>{}};
    if (parse_string(items.front())) {
      std::vector<std::string> out;
      for (const auto& it : items) {
        auto v = parse_string(it);
        if (!v) return std::nullopt;
        out.push_back(*v);
      }
      return ConfigValue{out};
    }
    std::vector<double> out;
    for (const auto& it : items) {
      auto v = parse_number(it);
      if (!v) return std::nullopt;
      out.push_back(*v);
    }
    return ConfigValue{out};
  }
  return std::nullopt;
}

const char* type_name(const ConfigValue& v) {
  switch (v.index()) {
    case 0:
      return "number";
    case 1:
      return "boolean";
    case 2:
      return "string";
    case 3:
      return "number array";
    default:
      return "string array";
  }
}

// Typed access that remembers which keys were read.
class Reader {
 public:
  explicit Reader(const ConfigDocument& doc) : doc_(doc) {}

  template <class T>
  std::optional<T> get(const std::string& key) {
    used_.insert(key);
    const ConfigEntry* e = doc_.find(key);
    if (!e) return std::nullopt;
    if (const T* v = std::get_if<T>(&e->value)) return *v;
    throw ConfigError(key, std::string("expected ") + type_name(ConfigValue{T{}}) + ", got " + type_name(e->value) +
                               " (" + e->origin + ")");
  }

  double number(const std::string& key, double fallback) { return get<double>(key).value_or(fallback); }

  int integer(const std::string& key, int fallback) {
    const auto v = get<double>(key);
    if (!v) return fallback;
    if (*v != std::floor(*v) || std::abs(*v) > 1e9) throw ConfigError(key, "expected an integer");
    return static_cast<int>(*v);
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    used_.insert(key);
    const ConfigEntry* e = doc_.find(key);
    if (!e) return fallback;
    if (const double* d = std::get_if<double>(&e->value)) return {*d};
    if (const auto* v = std::get_if<std::vector<double>>(&e->value)) return *v;
    throw ConfigError(key, std::string("expected a number or number array, got ") + type_name(e->value));
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) {
    used_.insert(key);
    const ConfigEntry* e = doc_.find(key);
    if (!e) return fallback;
    if (const auto* s = std::get_if<std::string>(&e->value)) return {*s};
    if (const auto* v = std::get_if<std::vector<std::string>>(&e->value)) return *v;
    if (const auto* v = std::get_if<std::vector<double>>(&e->value); v && v->empty()) return {};
    throw ConfigError(key, std::string("expected a string or string array, got ") + type_name(e->value));
  }

  void reject_unused() const {
    for (const auto& [key, entry] : doc_.entries()) {
      if (!used_.count(key)) throw ConfigError(key, "unknown key (" + entry.origin + ")");
    }
  }

  // Section names of the form prefix.<name>, in order of appearance.
  std::vector<std::string> subsections(const std::string& prefix) const {
    std::vector<std::string> names;
    for (const auto& [key, entry] : doc_.entries()) {
      if (key.rfind(prefix + ".", 0) != 0) continue;
      const std::string rest = key.substr(prefix.size() + 1);
      const auto dot = rest.find('.');
      if (dot == std::string::npos) continue;
      const std::string name = rest.substr(0, dot);
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    return names;
  }

 private:
  const ConfigDocument& doc_;
  std::set<std::string> used_;
};

template <class Fn>
void as_config_error(const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key, e.what());
  }
}

std::vector<double> default_ladder() {
  std::vector<double> out;
  for (int k = 2; k <= 6; ++k) out.push_back(std::ldexp(1.0, -k) / 10.0);
  return out;
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text, const std::string& origin) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError(where, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(where, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    auto value = parse_value(s.substr(eq + 1));
    if (!value) throw ConfigError(full, "cannot parse value '" + trim(s.substr(eq + 1)) + "' (" + where + ")");
    if (doc.find(full)) throw ConfigError(full, "duplicate key (" + where + ")");
    doc.put(full, {std::move(*value), where});
  }
  return doc;
}

void ConfigDocument::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError(assignment, "--set expects key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string raw = trim(assignment.substr(eq + 1));
  if (key.empty()) throw ConfigError(assignment, "--set expects key=value");
  auto value = parse_value(raw);
  put(key, {value ? std::move(*value) : ConfigValue{raw}, "--set"});
}

const ConfigEntry* ConfigDocument::find(const std::string& key) const {
  for (const auto& [k, e] : entries_) {
    if (k == key) return &e;
  }
  return nullptr;
}

void ConfigDocument::put(const std::string& key, ConfigEntry entry) {
  for (auto& [k, e] : entries_) {
    if (k == key) {
      e = std::move(entry);
      return;
    }
  }
  entries_.emplace_back(key, std::move(entry));
}

GridPtr RunConfig::make_grid() const { return Grid::make(n, length); }

RunConfig resolve(const ConfigDocument& doc) {
  Reader r(doc);
  RunConfig c;

  // grid
  c.dim = r.integer("grid.dim", 2);
  if (c.dim < 1 || c.dim > 3) throw ConfigError("grid.dim", "must be 1, 2 or 3");
  {
    const auto n = r.numbers("grid.n", {64});
    const auto L = r.numbers("grid.L", {128});
    auto expand = [&](const std::vector<double>& v, const std::string& key) {
      if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(c.dim), v[0]);
      if (v.size() != static_cast<std::size_t>(c.dim)) throw ConfigError(key, "needs 1 or grid.dim entries");
      return v;
    };
    c.n.clear();
    for (double v : expand(n, "grid.n")) {
      if (v != std::floor(v)) throw ConfigError("grid.n", "expected integers");
      c.n.push_back(static_cast<int>(v));
    }
    c.length = expand(L, "grid.L");
    as_config_error("grid", [&] { (void)c.make_grid(); });
  }

  // model
  c.model.alpha = r.number("model.alpha", c.model.alpha);
  c.model.beta = r.number("model.beta", c.model.beta);
  c.model.mobility = r.number("model.mobility", c.model.mobility);
  c.model.epsilon = r.number("model.epsilon", c.model.epsilon);
  c.model.h_vac = r.number("model.h_vac", c.model.h_vac);
  as_config_error("model", [&] { c.warnings = c.model.validate(); });

  // scheme
  if (auto kind = r.get<std::string>("scheme.kind")) {
    as_config_error("scheme.kind", [&] { c.scheme = parse_scheme_kind(*kind); });
  }
  c.scheme_params.stab_s = r.number("scheme.S", c.scheme_params.stab_s);
  c.scheme_params.sav_b = r.number("scheme.b", c.scheme_params.sav_b);
  c.scheme_params.gpav_c0 = r.number("scheme.c0", c.scheme_params.gpav_c0);
  c.scheme_params.esav_c = r.number("scheme.C", c.scheme_params.esav_c);
  c.scheme_params.dt = r.number("scheme.dt", c.scheme_params.dt);
  as_config_error("scheme", [&] { c.scheme_params.validate(); });

  // initial condition
  const std::string ic = r.get<std::string>("initial.type").value_or("random");
  if (ic == "random") {
    RandomPerturbation rp;
    rp.mean = r.number("initial.mean", rp.mean);
    rp.amplitude = r.number("initial.amplitude", rp.amplitude);
    const double seed = r.number("initial.seed", static_cast<double>(rp.seed));
    if (seed < 0 || seed != std::floor(seed) || seed > 9007199254740992.0) {
      throw ConfigError("initial.seed", "expected a nonnegative integer");
    }
    rp.seed = static_cast<std::uint64_t>(seed);
    c.initial = rp;
  } else if (ic == "crystallites") {
    Crystallites cr;
    cr.mean = r.number("initial.mean", cr.mean);
    cr.amplitude = r.number("initial.amplitude", cr.amplitude);
    cr.q = r.number("initial.q", cr.q);
    for (const std::string& name : r.subsections("patch")) {
      const std::string base = "patch." + name;
      CrystalPatch patch;
      patch.center = r.numbers(base + ".center", {});
      patch.half_width = r.number(base + ".half_width", 0.0);
      patch.theta = r.number(base + ".theta_deg", 0.0) * std::numbers::pi / 180.0;
      if (auto th = r.get<double>(base + ".theta")) patch.theta = *th;
      cr.patches.push_back(patch);
    }
    if (cr.patches.empty()) throw ConfigError("patch", "crystallites need at least one [patch.<name>] section");
    c.initial = cr;
  } else if (ic == "manufactured") {
    c.initial = Manufactured{};
  } else if (ic == "file") {
    const auto path = r.get<std::string>("initial.path");
    if (!path) throw ConfigError("initial.path", "required for initial.type = \"file\"");
    c.initial = FromFile{*path};
  } else {
    throw ConfigError("initial.type", "expected random, crystallites, manufactured or file");
  }

  // run
  c.T = r.number("run.T", c.T);
  if (!(c.T >= 0.0)) throw ConfigError("run.T", "must be >= 0");
  const std::string mode = r.get<std::string>("run.mode").value_or("fixed");
  if (mode == "fixed") {
    c.mode = TimeMode::kFixed;
  } else if (mode == "adaptive") {
    c.mode = TimeMode::kAdaptive;
  } else {
    throw ConfigError("run.mode", "expected fixed or adaptive");
  }
  c.record_every = r.integer("run.record_every", c.record_every);
  if (c.record_every < 1) throw ConfigError("run.record_every", "must be >= 1");
  c.snapshot_times = r.numbers("run.snapshot_times", {});
  for (double t : c.snapshot_times) {
    if (!(t >= 0.0)) throw ConfigError("run.snapshot_times", "times must be >= 0");
  }
  std::sort(c.snapshot_times.begin(), c.snapshot_times.end());
  c.check_residual = r.get<bool>("run.check_residual").value_or(false);
  c.assert_energy = r.get<bool>("run.assert_energy").value_or(false);
  const std::string forcing = r.get<std::string>("run.forcing").value_or("none");
  if (forcing == "manufactured") {
    c.manufactured_forcing = true;
  } else if (forcing != "none") {
    throw ConfigError("run.forcing", "expected none or manufactured");
  }

  // adaptive
  AdaptiveParams& a = c.adaptive;
  a.w_size = r.integer("adaptive.w_size", a.w_size);
  a.ratio_max = r.number("adaptive.ratio_max", a.ratio_max);
  a.dt_min = r.number("adaptive.dt_min", a.dt_min);
  a.dt_max = r.number("adaptive.dt_max", a.dt_max);
  a.dt_cr = r.number("adaptive.dt_cr", a.dt_cr);
  a.alpha1 = r.number("adaptive.alpha1", a.alpha1);
  a.s_cr = r.number("adaptive.s_cr", a.s_cr);
  a.validate();
  if (auto ctl = r.get<std::string>("adaptive.controller")) {
    as_config_error("adaptive.controller", [&] { c.controller = parse_controller_kind(*ctl); });
  }
  const std::string mon = r.get<std::string>("adaptive.monitored").value_or("scheme");
  if (mon == "scheme") {
    c.monitored = MonitoredEnergy::kScheme;
  } else if (mon == "pseudo") {
    c.monitored = MonitoredEnergy::kPseudo;
  } else {
    throw ConfigError("adaptive.monitored", "expected scheme or pseudo");
  }

  // converge
  c.dt_list = r.numbers("converge.dt_list", default_ladder());
  c.converge_T = r.number("converge.T", c.converge_T);
  c.rate_min = r.number("converge.rate_min", c.rate_min);
  c.rate_max = r.number("converge.rate_max", c.rate_max);
  c.first_order = r.get<bool>("converge.first_order").value_or(false);
  if (c.dt_list.size() < 3) throw ConfigError("converge.dt_list", "needs at least three entries");
  for (std::size_t i = 1; i < c.dt_list.size(); ++i) {
    if (!(c.dt_list[i] < c.dt_list[i - 1])) throw ConfigError("converge.dt_list", "must be strictly descending");
  }
  if (!(c.rate_min <= c.rate_max)) throw ConfigError("converge.rate_min/converge.rate_max", "rate_min > rate_max");

  // compare
  const auto ctls = r.strings("compare.controllers", {"evma", "legacy"});
  c.controllers.clear();
  for (const auto& s : ctls) {
    as_config_error("compare.controllers", [&] { c.controllers.push_back(parse_controller_kind(s)); });
  }
  c.fixed_dt = r.get<double>("compare.fixed_dt");
  if (c.fixed_dt && !(*c.fixed_dt > 0.0)) throw ConfigError("compare.fixed_dt", "must be > 0");

  r.reject_unused();
  return c;
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  ConfigDocument doc;
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config '" + path->string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    doc = ConfigDocument::parse(ss.str(), path->string());
  }
  for (const auto& o : overrides) doc.set(o);
  return resolve(doc);
}

std::string describe(const RunConfig& c) {
  std::ostringstream os;
  auto list = [&](const auto& v) {
    std::ostringstream l;
    l << '[';
    for (std::size_t i = 0; i < v.size(); ++i) l << (i ? ", " : "") << v[i];
    l << ']';
    return l.str();
  };
  os << "[grid]\n  dim = " << c.dim << "\n  n = " << list(c.n) << "\n  L = " << list(c.length) << '\n';
  os << "[model]\n  alpha = " << c.model.alpha << "\n  beta = " << c.model.beta << "\n  mobility = " << c.model.mobility
     << "\n  epsilon = " << c.model.epsilon << "\n  h_vac = " << c.model.h_vac << '\n';
  os << "[scheme]\n  kind = " << to_string(c.scheme) << "\n  S = " << c.scheme_params.stab_s
     << "\n  b = " << c.scheme_params.sav_b << "\n  c0 = " << c.scheme_params.gpav_c0
     << "\n  C = " << c.scheme_params.esav_c << "\n  dt = " << c.scheme_params.dt << '\n';
  os << "[initial]\n";
  if (const auto* rp = std::get_if<RandomPerturbation>(&c.initial)) {
    os << "  type = random\n  mean = " << rp->mean << "\n  amplitude = " << rp->amplitude << "\n  seed = " << rp->seed
       << '\n';
  } else if (const auto* cr = std::get_if<Crystallites>(&c.initial)) {
    os << "  type = crystallites\n  mean = " << cr->mean << "\n  amplitude = " << cr->amplitude << "\n  q = " << cr->q
       << '\n';
    for (std::size_t i = 0; i < cr->patches.size(); ++i) {
      const auto& p = cr->patches[i];
      os << "  patch " << i << ": center = " << list(p.center) << ", half_width = " << p.half_width
         << ", theta = " << p.theta * 180.0 / std::numbers::pi << " deg\n";
    }
  } else if (std::holds_alternative<Manufactured>(c.initial)) {
    os << "  type = manufactured\n";
  } else {
    os << "  type = file\n  path = " << std::get<FromFile>(c.initial).path << '\n';
  }
  os << "[run]\n  T = " << c.T << "\n  mode = " << (c.mode == TimeMode::kFixed ? "fixed" : "adaptive")
     << "\n  record_every = " << c.record_every << "\n  snapshot_times = " << list(c.snapshot_times)
     << "\n  forcing = " << (c.manufactured_forcing ? "manufactured" : "none") << '\n';
  os << "[adaptive]\n  controller = " << to_string(c.controller) << "\n  w_size = " << c.adaptive.w_size
     << "\n  ratio_max = " << c.adaptive.ratio_max << "\n  dt_min = " << c.adaptive.dt_min
     << "\n  dt_max = " << c.adaptive.dt_max << "\n  dt_cr = " << c.adaptive.dt_cr
     << "\n  alpha1 = " << c.adaptive.alpha1 << "\n  s_cr = " << c.adaptive.s_cr
     << "\n  monitored = " << (c.monitored == MonitoredEnergy::kScheme ? "scheme" : "pseudo") << '\n';
  return os.str();
}

}  // namespace vmpfc::cli
