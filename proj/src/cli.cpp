#include "csq/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "csq/gates.hpp"
#include "csq/hilbert.hpp"

namespace csq {

using ordered_json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------- formatting

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<double>& vs) {
  std::string out;
  for (size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ",";
    out += fmt(vs[i]);
  }
  return out;
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::Ideal: return "ideal";
    case Backend::Unitary: return "unitary";
    case Backend::Lindblad: return "lindblad";
  }
  return "?";
}

Backend parse_backend(const std::string& s, const std::string& where) {
  if (s == "ideal") return Backend::Ideal;
  if (s == "unitary") return Backend::Unitary;
  if (s == "lindblad") return Backend::Lindblad;
  throw Error(ErrorCode::ConfigError,
              where + ": backend must be ideal, unitary or lindblad, got '" + s + "'");
}

// ------------------------------------------------------------- value parsing

double parse_double(const std::string& v, const std::string& where) {
  const char* s = v.c_str();
  char* end = nullptr;
  double x = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(x))
    throw Error(ErrorCode::ConfigError, where + ": expected a finite number, got '" + v + "'");
  return x;
}

int parse_int(const std::string& v, const std::string& where) {
  const char* s = v.c_str();
  char* end = nullptr;
  long x = std::strtol(s, &end, 10);
  if (end == s || *end != '\0')
    throw Error(ErrorCode::ConfigError, where + ": expected an integer, got '" + v + "'");
  return int(x);
}

std::vector<double> parse_double_list(const std::string& v, const std::string& where) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t a = item.find_first_not_of(" \t");
    size_t b = item.find_last_not_of(" \t");
    if (a == std::string::npos)
      throw Error(ErrorCode::ConfigError, where + ": empty element in list '" + v + "'");
    out.push_back(parse_double(item.substr(a, b - a + 1), where));
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, where + ": empty list");
  return out;
}

std::vector<double> parse_linspace(const std::string& v, const std::string& where) {
  std::vector<double> f = parse_double_list(v, where);
  if (f.size() != 3)
    throw Error(ErrorCode::ConfigError, where + ": linspace needs 'lo,hi,count', got '" + v + "'");
  int n = int(f[2]);
  if (f[2] != double(n) || n < 1)
    throw Error(ErrorCode::ConfigError, where + ": linspace count must be a positive integer");
  std::vector<double> out;
  if (n == 1) {
    out.push_back(f[0]);
  } else {
    for (int i = 0; i < n; ++i) out.push_back(f[0] + (f[1] - f[0]) * double(i) / double(n - 1));
  }
  return out;
}

// --------------------------------------------------------------- INI parsing

struct ParseState {
  ScenarioConfig cfg;
  std::string file;
  // tracks which spelling claimed a unit-suffixed quantity, for conflicts
  std::map<std::string, std::string> claimed;
  std::set<std::string> seen;  // "section/key" duplicates
  bool geometry_touched = false;
  SquidResonatorGeometry geom{};
  std::optional<double> phi_star_rad;
  bool phi_star_analytic = false;
  std::vector<double> theta_list, phi_list;
  bool theta_from_linspace = false, phi_from_linspace = false;
};

using Handler = std::function<void(ParseState&, const std::string& value, const std::string& where)>;

// A frequency-like scalar that must be spelled with an explicit unit suffix.
// GHz_times_2pi means the value is the ordinary frequency nu in GHz and the
// stored angular rate is 2*pi*nu rad/ns; rad_per_ns is stored verbatim.
void add_frequency_key(std::map<std::string, Handler>& h, const std::string& base,
                       std::function<void(ScenarioConfig&, double)> set) {
  auto claim = [base](ParseState& st, const std::string& spelled, const std::string& where) {
    auto it = st.claimed.find(base);
    if (it != st.claimed.end())
      throw Error(ErrorCode::ConfigError, where + ": '" + spelled + "' conflicts with earlier '" +
                                              it->second + "' (one unit spelling per quantity)");
    st.claimed[base] = spelled;
  };
  h[base + "_rad_per_ns"] = [set, claim, base](ParseState& st, const std::string& v,
                                               const std::string& w) {
    claim(st, base + "_rad_per_ns", w);
    set(st.cfg, parse_double(v, w));
  };
  h[base + "_GHz_times_2pi"] = [set, claim, base](ParseState& st, const std::string& v,
                                                  const std::string& w) {
    claim(st, base + "_GHz_times_2pi", w);
    set(st.cfg, 2.0 * M_PI * parse_double(v, w));
  };
}

const std::map<std::string, std::map<std::string, Handler>>& handlers() {
  static const auto* table = [] {
    auto* t = new std::map<std::string, std::map<std::string, Handler>>;

    auto& g = (*t)[""];  // keys before any section header
    g["scenario"] = [](ParseState& st, const std::string& v, const std::string& w) {
      static const std::set<std::string> known{"simulate", "sweep", "optimize-phi", "modes",
                                               "wigner"};
      if (!known.count(v))
        throw Error(ErrorCode::ConfigError, w + ": unknown scenario '" + v + "'");
      st.cfg.scenario = v;
    };

    auto& p = (*t)["params"];
    add_frequency_key(p, "omega", [](ScenarioConfig& c, double x) { c.params.omega = x; });
    add_frequency_key(p, "omega_q", [](ScenarioConfig& c, double x) { c.params.omega_q = x; });
    add_frequency_key(p, "chi", [](ScenarioConfig& c, double x) { c.params.chi = x; });
    add_frequency_key(p, "omega_d", [](ScenarioConfig& c, double x) { c.params.omega_d = x; });
    add_frequency_key(p, "g_d", [](ScenarioConfig& c, double x) { c.params.g_d = x; });
    add_frequency_key(p, "kerr_k", [](ScenarioConfig& c, double x) { c.params.kerr_k = x; });
    p["epsilon"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.epsilon = parse_double(v, w);
    };
    p["theta_rad"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.theta = parse_double(v, w);
    };
    p["gate_time_ns"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.gate_time = parse_double(v, w);
    };
    p["temperature_K"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.temperature = parse_double(v, w);
    };
    p["tau_r_ns"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.tau_r = parse_double(v, w);
    };
    p["tau_q_ns"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.tau_q = parse_double(v, w);
    };
    p["tau_phi_ns"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.tau_phi = parse_double(v, w);
    };
    p["resonator_dim"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.params.resonator_dim = parse_int(v, w);
    };
    auto geom_key = [](double SquidResonatorGeometry::*field) {
      return [field](ParseState& st, const std::string& v, const std::string& w) {
        st.geom.*field = parse_double(v, w);
        st.geometry_touched = true;
      };
    };
    p["squid_l0"] = geom_key(&SquidResonatorGeometry::l0);
    p["squid_c0"] = geom_key(&SquidResonatorGeometry::c0);
    p["squid_d"] = geom_key(&SquidResonatorGeometry::d);
    p["squid_cj"] = geom_key(&SquidResonatorGeometry::cj);
    p["squid_ej"] = geom_key(&SquidResonatorGeometry::ej);
    p["squid_flux_bias"] = geom_key(&SquidResonatorGeometry::flux_bias);
    p["mode_count"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.mode_count = parse_int(v, w);
    };

    auto& s = (*t)["sweep"];
    s["backend"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.backend = parse_backend(v, w);
    };
    s["phi_star_rad"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (st.phi_star_analytic)
        throw Error(ErrorCode::ConfigError, w + ": phi_star_rad conflicts with phi_star=analytic");
      st.phi_star_rad = parse_double(v, w);
    };
    s["phi_star"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (v != "analytic")
        throw Error(ErrorCode::ConfigError,
                    w + ": phi_star only accepts 'analytic' (use phi_star_rad for a number)");
      if (st.phi_star_rad)
        throw Error(ErrorCode::ConfigError, w + ": phi_star=analytic conflicts with phi_star_rad");
      st.phi_star_analytic = true;
    };
    s["theta_b_rad"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.input.theta_b = parse_double(v, w);
      st.cfg.input_set = true;
    };
    s["phi_b_rad"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.input.phi_b = parse_double(v, w);
      st.cfg.input_set = true;
    };
    s["theta_b_list"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (!st.theta_list.empty())
        throw Error(ErrorCode::ConfigError, w + ": theta_b grid given twice");
      st.theta_list = parse_double_list(v, w);
    };
    s["theta_b_linspace"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (!st.theta_list.empty())
        throw Error(ErrorCode::ConfigError, w + ": theta_b grid given twice");
      st.theta_list = parse_linspace(v, w);
      st.theta_from_linspace = true;
    };
    s["phi_b_list"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (!st.phi_list.empty()) throw Error(ErrorCode::ConfigError, w + ": phi_b grid given twice");
      st.phi_list = parse_double_list(v, w);
    };
    s["phi_b_linspace"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (!st.phi_list.empty()) throw Error(ErrorCode::ConfigError, w + ": phi_b grid given twice");
      st.phi_list = parse_linspace(v, w);
      st.phi_from_linspace = true;
    };

    auto& o = (*t)["output"];
    o["path"] = [](ParseState& st, const std::string& v, const std::string&) {
      st.cfg.out_path = v;
    };
    o["format"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (v != "csv" && v != "json")
        throw Error(ErrorCode::ConfigError, w + ": format must be csv or json, got '" + v + "'");
      st.cfg.format = v;
    };
    o["manifest_path"] = [](ParseState& st, const std::string& v, const std::string&) {
      st.cfg.manifest_path = v;
    };
    o["wigner_min"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.wigner_min = parse_double(v, w);
    };
    o["wigner_max"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.wigner_max = parse_double(v, w);
    };
    o["wigner_points"] = [](ParseState& st, const std::string& v, const std::string& w) {
      st.cfg.wigner_points = parse_int(v, w);
    };
    o["wigner_source"] = [](ParseState& st, const std::string& v, const std::string& w) {
      if (v != "vacuum" && v != "encode_plus" && v != "encode_minus")
        throw Error(ErrorCode::ConfigError,
                    w + ": wigner_source must be vacuum, encode_plus or encode_minus");
      st.cfg.wigner_source = v;
    };
    return t;
  }();
  return *table;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text, const std::string& filename) {
  ParseState st;
  st.file = filename;
  std::string section;  // "" until the first header
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    std::string where = filename + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error(ErrorCode::ConfigError, where + ": malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty() || !handlers().count(section))
        throw Error(ErrorCode::ConfigError, where + ": unknown section '[" + section + "]'");
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ConfigError, where + ": expected 'key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::ConfigError, where + ": empty key");
    if (value.empty()) throw Error(ErrorCode::ConfigError, where + ": empty value for '" + key + "'");
    const auto& sect = handlers().at(section);
    auto it = sect.find(key);
    if (it == sect.end()) {
      std::string in = section.empty() ? "the preamble" : "[" + section + "]";
      throw Error(ErrorCode::ConfigError, where + ": unknown key '" + key + "' in " + in);
    }
    std::string id = section + "/" + key;
    if (!st.seen.insert(id).second)
      throw Error(ErrorCode::ConfigError, where + ": duplicate key '" + key + "'");
    it->second(st, value, where + ": " + key);
  }

  if (st.geometry_touched) st.cfg.geometry = st.geom;
  if (st.phi_star_rad) st.cfg.phi_star = *st.phi_star_rad;
  if (!st.theta_list.empty()) st.cfg.grid.theta_b = st.theta_list;
  if (!st.phi_list.empty()) st.cfg.grid.phi_b = st.phi_list;
  return st.cfg;
}

void ScenarioConfig::normalize() {
  if (scenario == "optimize-phi" && !input_set) {
    input = BlochPoint{M_PI / 2.0, M_PI / 2.0};  // the optimizer's sensitive probe
    input_set = true;
  }
  if (grid.theta_b.empty()) grid.theta_b = {0.0, M_PI / 3.0, M_PI / 2.0, M_PI};
  if (grid.phi_b.empty()) grid.phi_b = {0.0, 2.0 * M_PI / 3.0, M_PI, 4.0 * M_PI / 3.0};
  if (format.empty()) format = (scenario == "sweep" || scenario == "wigner") ? "csv" : "json";
  if (out_path.empty()) {
    std::string stem = scenario;
    for (char& c : stem)
      if (c == '-') c = '_';
    out_path = stem + "." + format;
  }
  if (manifest_path.empty()) manifest_path = out_path + ".manifest.json";
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigError, m); };
  static const std::set<std::string> known{"simulate", "sweep", "optimize-phi", "modes", "wigner"};
  if (!known.count(scenario)) fail("unknown scenario '" + scenario + "'");
  if (format != "csv" && format != "json") fail("format must be csv or json");
  if (jobs < 1) fail("jobs must be >= 1");
  if (scenario == "modes" && !geometry)
    fail("scenario modes needs the squid_* geometry keys in [params]");
  if (mode_count < 1) fail("mode_count must be >= 1");
  if (scenario == "wigner") {
    if (!(wigner_min < wigner_max)) fail("wigner_min must be below wigner_max");
    if (wigner_points < 2) fail("wigner_points must be >= 2");
  }
  if (scenario == "sweep" && (grid.theta_b.empty() || grid.phi_b.empty()))
    fail("sweep needs a nonempty theta_b/phi_b grid");
  if (out_path.empty() || manifest_path.empty()) fail("output paths must not be empty");
  if (out_path == manifest_path) fail("output path and manifest path collide");
  input.validate();
}

std::string scenario_config_to_ini(const ScenarioConfig& cfg) {
  std::string s;
  s += "scenario = " + cfg.scenario + "\n\n[params]\n";
  s += "omega_rad_per_ns = " + fmt(cfg.params.omega) + "\n";
  s += "omega_q_rad_per_ns = " + fmt(cfg.params.omega_q) + "\n";
  s += "chi_rad_per_ns = " + fmt(cfg.params.chi) + "\n";
  s += "omega_d_rad_per_ns = " + fmt(cfg.params.resolved_omega_d()) + "\n";
  s += "g_d_rad_per_ns = " + fmt(cfg.params.g_d) + "\n";
  s += "kerr_k_rad_per_ns = " + fmt(cfg.params.kerr_k) + "\n";
  s += "epsilon = " + fmt(cfg.params.epsilon) + "\n";
  s += "theta_rad = " + fmt(cfg.params.theta) + "\n";
  s += "gate_time_ns = " + fmt(cfg.params.gate_time) + "\n";
  s += "temperature_K = " + fmt(cfg.params.temperature) + "\n";
  s += "tau_r_ns = " + fmt(cfg.params.tau_r) + "\n";
  s += "tau_q_ns = " + fmt(cfg.params.tau_q) + "\n";
  s += "tau_phi_ns = " + fmt(cfg.params.tau_phi) + "\n";
  s += "resonator_dim = " + std::to_string(cfg.params.resonator_dim) + "\n";
  if (cfg.geometry) {
    s += "squid_l0 = " + fmt(cfg.geometry->l0) + "\n";
    s += "squid_c0 = " + fmt(cfg.geometry->c0) + "\n";
    s += "squid_d = " + fmt(cfg.geometry->d) + "\n";
    s += "squid_cj = " + fmt(cfg.geometry->cj) + "\n";
    s += "squid_ej = " + fmt(cfg.geometry->ej) + "\n";
    s += "squid_flux_bias = " + fmt(cfg.geometry->flux_bias) + "\n";
  }
  s += "mode_count = " + std::to_string(cfg.mode_count) + "\n";
  s += "\n[sweep]\n";
  s += "backend = " + backend_name(cfg.backend) + "\n";
  if (cfg.phi_star)
    s += "phi_star_rad = " + fmt(*cfg.phi_star) + "\n";
  else
    s += "phi_star = analytic\n";
  if (cfg.input_set) {
    s += "theta_b_rad = " + fmt(cfg.input.theta_b) + "\n";
    s += "phi_b_rad = " + fmt(cfg.input.phi_b) + "\n";
  }
  if (!cfg.grid.theta_b.empty()) s += "theta_b_list = " + fmt_list(cfg.grid.theta_b) + "\n";
  if (!cfg.grid.phi_b.empty()) s += "phi_b_list = " + fmt_list(cfg.grid.phi_b) + "\n";
  s += "\n[output]\n";
  s += "path = " + cfg.out_path + "\n";
  s += "format = " + cfg.format + "\n";
  s += "manifest_path = " + cfg.manifest_path + "\n";
  s += "wigner_min = " + fmt(cfg.wigner_min) + "\n";
  s += "wigner_max = " + fmt(cfg.wigner_max) + "\n";
  s += "wigner_points = " + std::to_string(cfg.wigner_points) + "\n";
  s += "wigner_source = " + cfg.wigner_source + "\n";
  return s;
}

namespace {

// ------------------------------------------------------------ result renders

constexpr const char* kSweepHeader =
    "theta_b,phi_b,p_plus,p_minus,f_plus,f_minus,f_avg,purity_plus,purity_minus,phi_used";

std::string report_row(const ProtocolReport& r) {
  std::string s;
  s += fmt(r.bloch.theta_b) + "," + fmt(r.bloch.phi_b) + "," + fmt(r.p_plus) + "," +
       fmt(r.p_minus) + "," + fmt(r.f_plus) + "," + fmt(r.f_minus) + "," + fmt(r.f_avg) + "," +
       fmt(r.purity_plus) + "," + fmt(r.purity_minus) + "," + fmt(r.phi_used);
  return s;
}

ordered_json report_json(const ProtocolReport& r) {
  ordered_json j;
  j["theta_b"] = r.bloch.theta_b;
  j["phi_b"] = r.bloch.phi_b;
  j["p_plus"] = r.p_plus;
  j["p_minus"] = r.p_minus;
  j["f_plus"] = r.f_plus;
  j["f_minus"] = r.f_minus;
  j["f_avg"] = r.f_avg;
  j["purity_plus"] = r.purity_plus;
  j["purity_minus"] = r.purity_minus;
  j["phi_used"] = r.phi_used;
  j["wait_time_ns"] = r.wait_time;
  j["long_wait"] = r.long_wait;
  return j;
}

ordered_json diagnostics_json(long steps, double drift, double leakage) {
  ordered_json j;
  j["steps"] = steps;
  j["max_trace_drift"] = drift;
  j["max_leakage"] = leakage;
  return j;
}

ordered_json config_echo_json(const ScenarioConfig& cfg) {
  ordered_json j;
  j["scenario"] = cfg.scenario;
  ordered_json p;
  p["omega_rad_per_ns"] = cfg.params.omega;
  p["omega_q_rad_per_ns"] = cfg.params.omega_q;
  p["chi_rad_per_ns"] = cfg.params.chi;
  p["omega_d_rad_per_ns"] = cfg.params.resolved_omega_d();
  p["g_d_rad_per_ns"] = cfg.params.g_d;
  p["kerr_k_rad_per_ns"] = cfg.params.kerr_k;
  p["epsilon"] = cfg.params.epsilon;
  p["theta_rad"] = cfg.params.theta;
  p["gate_time_ns"] = cfg.params.gate_time;
  p["temperature_K"] = cfg.params.temperature;
  p["tau_r_ns"] = cfg.params.tau_r;
  p["tau_q_ns"] = cfg.params.tau_q;
  p["tau_phi_ns"] = cfg.params.tau_phi;
  p["resonator_dim"] = cfg.params.resonator_dim;
  if (cfg.geometry) {
    p["squid_l0"] = cfg.geometry->l0;
    p["squid_c0"] = cfg.geometry->c0;
    p["squid_d"] = cfg.geometry->d;
    p["squid_cj"] = cfg.geometry->cj;
    p["squid_ej"] = cfg.geometry->ej;
    p["squid_flux_bias"] = cfg.geometry->flux_bias;
  }
  p["mode_count"] = cfg.mode_count;
  j["params"] = p;
  ordered_json s;
  s["backend"] = backend_name(cfg.backend);
  if (cfg.phi_star)
    s["phi_star_rad"] = *cfg.phi_star;
  else
    s["phi_star"] = "analytic";
  if (cfg.input_set) {
    s["theta_b_rad"] = cfg.input.theta_b;
    s["phi_b_rad"] = cfg.input.phi_b;
  }
  s["theta_b_list"] = cfg.grid.theta_b;
  s["phi_b_list"] = cfg.grid.phi_b;
  j["sweep"] = s;
  ordered_json o;
  o["path"] = cfg.out_path;
  o["format"] = cfg.format;
  o["manifest_path"] = cfg.manifest_path;
  o["wigner_min"] = cfg.wigner_min;
  o["wigner_max"] = cfg.wigner_max;
  o["wigner_points"] = cfg.wigner_points;
  o["wigner_source"] = cfg.wigner_source;
  j["output"] = o;
  return j;
}

ordered_json derived_json(const PhysicalParams& params) {
  DerivedQuantities d = derive(params);
  ordered_json j;
  j["omega_bar_0_rad_per_ns"] = d.omega_bar_0;
  j["omega_bar_1_rad_per_ns"] = d.omega_bar_1;
  j["delta_rad_per_ns"] = d.delta;
  j["delta_tilde_rad_per_ns"] = d.delta_tilde;
  j["r_target"] = d.r_target;
  j["phi_analytic_rad"] = d.phi_analytic;
  j["perturbative"] = d.perturbative;
  return j;
}

struct ScenarioOutput {
  std::string content;
  std::string message;
  ordered_json extra;  // scenario-specific manifest block (may be null)
};

double resolve_phi(const ScenarioConfig& cfg) {
  return cfg.phi_star ? *cfg.phi_star : derive(cfg.params).phi_analytic;
}

ScenarioOutput run_simulate(const ScenarioConfig& cfg) {
  double phi = resolve_phi(cfg);
  EncodeOutcome out = compensated_encode(cfg.input, cfg.params, phi, cfg.backend);
  ScenarioOutput so;
  if (cfg.format == "csv") {
    so.content = std::string(kSweepHeader) + "\n" + report_row(out.report) + "\n";
  } else {
    ordered_json j;
    j["scenario"] = "simulate";
    j["backend"] = backend_name(cfg.backend);
    j["report"] = report_json(out.report);
    j["diagnostics"] = diagnostics_json(out.steps, out.max_trace_drift, out.max_leakage);
    so.content = j.dump(2) + "\n";
  }
  so.message = "simulate: f_avg = " + fmt(out.report.f_avg) + ", p_plus = " +
               fmt(out.report.p_plus) + " (backend " + backend_name(cfg.backend) + ")";
  so.extra = diagnostics_json(out.steps, out.max_trace_drift, out.max_leakage);
  return so;
}

ScenarioOutput run_sweep(const ScenarioConfig& cfg) {
  double phi = resolve_phi(cfg);
  SweepResult res = bloch_sweep(cfg.params, cfg.grid, phi, cfg.backend, cfg.jobs);
  for (const SweepEntry& e : res.entries)
    if (!e.ok)
      throw Error(ErrorCode::NumericFailure,
                  "sweep point (theta_b=" + fmt(e.report.bloch.theta_b) + ", phi_b=" +
                      fmt(e.report.bloch.phi_b) + ") failed: " + e.error);
  ScenarioOutput so;
  if (cfg.format == "csv") {
    std::string s = std::string(kSweepHeader) + "\n";
    for (const SweepEntry& e : res.entries) s += report_row(e.report) + "\n";
    so.content = s;
  } else {
    ordered_json rows = ordered_json::array();
    for (const SweepEntry& e : res.entries) rows.push_back(report_json(e.report));
    ordered_json j;
    j["scenario"] = "sweep";
    j["backend"] = backend_name(cfg.backend);
    j["phi_used_rad"] = phi;
    j["rows"] = rows;
    j["diagnostics"] = diagnostics_json(res.steps, res.max_trace_drift, res.max_leakage);
    so.content = j.dump(2) + "\n";
  }
  so.message = "sweep: " + std::to_string(cfg.grid.theta_b.size()) + "x" +
               std::to_string(cfg.grid.phi_b.size()) + " grid at phi = " + fmt(phi) +
               " (backend " + backend_name(cfg.backend) + ")";
  so.extra = diagnostics_json(res.steps, res.max_trace_drift, res.max_leakage);
  return so;
}

ScenarioOutput run_optimize(const ScenarioConfig& cfg) {
  OptimizationResult res = optimize_compensation_angle(cfg.params, cfg.backend, cfg.input);
  ScenarioOutput so;
  ordered_json j;
  j["phi_analytic"] = res.phi_analytic;
  j["phi_star"] = res.phi_star;
  j["f_at_star"] = res.f_at_star;
  j["evaluations"] = res.evaluations;
  j["multimodal"] = res.multimodal;
  j["degenerate"] = res.degenerate;
  if (cfg.format == "csv") {
    so.content = "phi_analytic,phi_star,f_at_star,evaluations,multimodal,degenerate\n" +
                 fmt(res.phi_analytic) + "," + fmt(res.phi_star) + "," + fmt(res.f_at_star) + "," +
                 std::to_string(res.evaluations) + "," + std::to_string(int(res.multimodal)) +
                 "," + std::to_string(int(res.degenerate)) + "\n";
  } else {
    ordered_json top;
    top["scenario"] = "optimize-phi";
    top["backend"] = backend_name(cfg.backend);
    top["probe"] = {{"theta_b", cfg.input.theta_b}, {"phi_b", cfg.input.phi_b}};
    top["result"] = j;
    so.content = top.dump(2) + "\n";
  }
  so.message = "optimize-phi: phi_star = " + fmt(res.phi_star) + " (analytic " +
               fmt(res.phi_analytic) + ", f = " + fmt(res.f_at_star) + ")";
  so.extra = j;
  return so;
}

ScenarioOutput run_modes(const ScenarioConfig& cfg) {
  const SquidResonatorGeometry& geom = *cfg.geometry;
  ModeSpectrum spec = mode_spectrum(geom, geom.flux_bias, cfg.mode_count);
  DriveSpec drive{cfg.params.epsilon, cfg.params.resolved_omega_d(), cfg.params.theta};
  ExtractedParams ex = extract_model_params(geom, geom.flux_bias, drive, 0);

  // The multi-mode coupling is computed but not propagated; this advisory
  // ratio (max |M| * flux drive rate / smallest mode spacing) quantifies how
  // much the single-mode treatment neglects.
  double max_m = 0.0;
  for (int i = 0; i < spec.coupling.rows(); ++i)
    for (int k = 0; k < spec.coupling.cols(); ++k)
      max_m = std::max(max_m, std::abs(spec.coupling(i, k)));
  double min_gap = 0.0;
  double v = geom.wave_velocity();
  for (size_t i = 0; i + 1 < spec.wavenumbers.size(); ++i) {
    double gap = v * (spec.wavenumbers[i + 1] - spec.wavenumbers[i]);
    min_gap = (i == 0) ? gap : std::min(min_gap, gap);
  }
  double drive_rate = cfg.params.epsilon * cfg.params.resolved_omega_d();
  double advisory = (min_gap > 0.0) ? max_m * drive_rate / min_gap : 0.0;

  ScenarioOutput so;
  if (cfg.format == "csv") {
    std::string s = "mode,wavenumber,frequency_rad_per_ns,boundary_residual,domega_dflux\n";
    for (size_t n = 0; n < spec.wavenumbers.size(); ++n) {
      s += std::to_string(n) + "," + fmt(spec.wavenumbers[n]) + "," + fmt(spec.frequencies[n]) +
           "," + fmt(spec.residuals[n]) + "," + fmt(spec.flux_derivatives[n]) + "\n";
    }
    so.content = s;
  } else {
    ordered_json j;
    j["scenario"] = "modes";
    j["wavenumbers"] = spec.wavenumbers;
    j["frequencies_rad_per_ns"] = spec.frequencies;
    j["boundary_residuals"] = spec.residuals;
    j["domega_dflux"] = spec.flux_derivatives;
    ordered_json m = ordered_json::array();
    for (int i = 0; i < spec.coupling.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (int k = 0; k < spec.coupling.cols(); ++k) row.push_back(spec.coupling(i, k));
      m.push_back(row);
    }
    j["coupling_matrix"] = m;
    ordered_json e;
    e["omega_rad_per_ns"] = ex.omega;
    e["g_d_rad_per_ns"] = ex.g_d;
    e["participation_sigma"] = ex.sigma;
    e["kerr_ratio"] = ex.k_squid_ratio;
    j["extracted"] = e;
    ordered_json a;
    a["max_coupling"] = max_m;
    a["flux_drive_rate_rad_per_ns"] = drive_rate;
    a["min_mode_spacing_rad_per_ns"] = min_gap;
    a["neglect_ratio"] = advisory;
    j["single_mode_advisory"] = a;
    so.content = j.dump(2) + "\n";
  }
  so.message = "modes: " + std::to_string(spec.wavenumbers.size()) + " modes, omega_0 = " +
               fmt(ex.omega) + ", g_d = " + fmt(ex.g_d) + ", single-mode advisory ratio " +
               fmt(advisory);
  ordered_json a;
  a["neglect_ratio"] = advisory;
  so.extra = a;
  return so;
}

ScenarioOutput run_wigner(const ScenarioConfig& cfg) {
  QuantumState state = [&] {
    if (cfg.wigner_source == "vacuum") {
      return QuantumState::pure({cfg.params.resonator_dim, false},
                                fock_vector(cfg.params.resonator_dim, 0));
    }
    EncodeOutcome out = compensated_encode(cfg.input, cfg.params, resolve_phi(cfg), cfg.backend);
    return cfg.wigner_source == "encode_plus" ? out.resonator_plus : out.resonator_minus;
  }();
  VectorXd axis(cfg.wigner_points);
  for (int i = 0; i < cfg.wigner_points; ++i)
    axis(i) = cfg.wigner_min +
              (cfg.wigner_max - cfg.wigner_min) * double(i) / double(cfg.wigner_points - 1);
  WignerGrid grid = wigner_grid(state, axis, axis);

  ScenarioOutput so;
  if (cfg.format == "csv") {
    std::string s = "x,p,w\n";
    for (int i = 0; i < grid.p.size(); ++i)
      for (int j = 0; j < grid.x.size(); ++j)
        s += fmt(grid.x(j)) + "," + fmt(grid.p(i)) + "," + fmt(grid.w(i, j)) + "\n";
    so.content = s;
  } else {
    ordered_json j;
    j["scenario"] = "wigner";
    j["source"] = cfg.wigner_source;
    j["x"] = std::vector<double>(grid.x.data(), grid.x.data() + grid.x.size());
    j["p"] = std::vector<double>(grid.p.data(), grid.p.data() + grid.p.size());
    ordered_json rows = ordered_json::array();
    for (int i = 0; i < grid.w.rows(); ++i) {
      ordered_json row = ordered_json::array();
      for (int jx = 0; jx < grid.w.cols(); ++jx) row.push_back(grid.w(i, jx));
      rows.push_back(row);
    }
    j["w"] = rows;
    so.content = j.dump(2) + "\n";
  }
  double wmax = grid.w.maxCoeff();
  so.message = "wigner: " + cfg.wigner_source + " on " + std::to_string(cfg.wigner_points) + "^2 [" +
               fmt(cfg.wigner_min) + "," + fmt(cfg.wigner_max) + "]^2, max W = " + fmt(wmax);
  ordered_json e;
  e["max_w"] = wmax;
  so.extra = e;
  return so;
}

}  // namespace

int cli_exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InconsistentParameters:
    case ErrorCode::InvalidDimension:
    case ErrorCode::InvalidState:
    case ErrorCode::DegenerateCode:
      return 2;
    case ErrorCode::RegimeViolation:
      return 4;
    default:
      return 3;  // integration/spectrum/truncation/numeric failures
  }
}

RunResult run_scenario(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  cfg.normalize();
  cfg.validate();
  cfg.params.validate();

  auto t0 = std::chrono::steady_clock::now();

  std::vector<RegimeCheck> regimes = validate_regimes(cfg.params);
  if (cfg.strict) {
    std::string bad;
    for (const RegimeCheck& rc : regimes)
      if (!rc.pass) bad += (bad.empty() ? "" : ", ") + rc.check;
    if (!bad.empty())
      throw Error(ErrorCode::RegimeViolation, "strict mode: failed regime checks: " + bad);
  }

  ScenarioOutput so;
  if (cfg.scenario == "simulate") {
    so = run_simulate(cfg);
  } else if (cfg.scenario == "sweep") {
    so = run_sweep(cfg);
  } else if (cfg.scenario == "optimize-phi") {
    so = run_optimize(cfg);
  } else if (cfg.scenario == "modes") {
    so = run_modes(cfg);
  } else {
    so = run_wigner(cfg);
  }

  auto t1 = std::chrono::steady_clock::now();

  ordered_json manifest;
  manifest["scenario"] = cfg.scenario;
  manifest["library_version"] = kLibraryVersion;
  manifest["config"] = config_echo_json(cfg);
  manifest["derived"] = derived_json(cfg.params);
  ordered_json rj = ordered_json::array();
  for (const RegimeCheck& rc : regimes) {
    ordered_json r;
    r["check"] = rc.check;
    r["value"] = rc.value;
    r["threshold"] = rc.threshold;
    r["pass"] = rc.pass;
    rj.push_back(r);
  }
  manifest["regime_checks"] = rj;
  if (!so.extra.is_null()) manifest["scenario_summary"] = so.extra;
  manifest["outputs"] = std::vector<std::string>{cfg.out_path};
  manifest["wall_time_ms"] = std::chrono::duration<double, std::milli>(t1 - t0).count();

  RunResult result;
  result.artifacts.push_back({cfg.out_path, std::move(so.content)});
  result.artifacts.push_back({cfg.manifest_path, manifest.dump(2) + "\n"});
  result.message = so.message;
  return result;
}

}  // namespace csq
