#include "twloc/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "twloc/error.hpp"

namespace twloc::config {

namespace pt = boost::property_tree;

namespace {

pt::ptree parse_ini(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error::validation("ini", "line " + std::to_string(e.line()) + ": " + e.message());
  }
  return tree;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::in | std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Rejects keys and sections that are not in the allowed set.
void check_keys(const pt::ptree& tree, const std::string& section, const std::set<std::string>& allowed) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!node) return;
  for (const auto& [key, value] : *node) {
    if (!allowed.count(key)) throw Error::validation(section + "." + key, "unknown key");
  }
}

std::optional<std::string> get_text(const pt::ptree& tree, const std::string& section, const std::string& key) {
  const auto node = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (!node) return std::nullopt;
  const auto v = node->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
  if (!v) return std::nullopt;
  return boost::trim_copy(*v);
}

double to_number(const std::string& text, const std::string& field) {
  std::string_view s(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error::validation(field, "expected a finite number, got '" + text + "'");
  }
  return v;
}

void read_number(const pt::ptree& tree, const std::string& section, const std::string& key, double& out) {
  if (const auto t = get_text(tree, section, key)) out = to_number(*t, section + "." + key);
}

void read_int(const pt::ptree& tree, const std::string& section, const std::string& key, int& out) {
  if (const auto t = get_text(tree, section, key)) {
    const double v = to_number(*t, section + "." + key);
    if (v != std::floor(v) || std::abs(v) > 1e9) throw Error::validation(section + "." + key, "expected an integer");
    out = static_cast<int>(v);
  }
}

bool to_bool(const std::string& text, const std::string& field) {
  const std::string t = boost::to_lower_copy(text);
  if (t == "true" || t == "yes" || t == "1" || t == "on") return true;
  if (t == "false" || t == "no" || t == "0" || t == "off") return false;
  throw Error::validation(field, "expected true or false, got '" + text + "'");
}

std::optional<double> to_snr(const std::string& text, const std::string& field) {
  const std::string t = boost::to_lower_copy(text);
  if (t == "none" || t == "off" || t == "inf") return std::nullopt;
  return to_number(text, field);
}

std::vector<std::string> list(const std::string& text, const char* seps = ",") {
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(seps));
  std::vector<std::string> out;
  for (auto& p : parts) {
    boost::trim(p);
    if (!p.empty()) out.push_back(p);
  }
  return out;
}

void apply_analysis(const pt::ptree& tree, AnalysisParams& a) {
  check_keys(tree, "analysis",
             {"f_min", "f_max", "voices", "omega0", "threshold_rel", "min_peak_to_floor", "quorum", "mad_k"});
  read_number(tree, "analysis", "f_min", a.f_min);
  read_number(tree, "analysis", "f_max", a.f_max);
  read_int(tree, "analysis", "voices", a.voices);
  read_number(tree, "analysis", "omega0", a.cwt.omega0);
  read_number(tree, "analysis", "threshold_rel", a.cwt.threshold_rel);
  read_number(tree, "analysis", "min_peak_to_floor", a.cwt.min_peak_to_floor);
  read_int(tree, "analysis", "quorum", a.quorum);
  read_number(tree, "analysis", "mad_k", a.mad_k);
  a.validate();
}

PropagationModel read_model(const pt::ptree& tree, const std::string& section, const std::string& preset) {
  PropagationModel m;
  try {
    m = model_preset(preset);
  } catch (const Error&) {
    throw Error::validation(section + ".model", "unknown preset '" + preset + "' (overhead, cable or lossless)");
  }
  read_number(tree, section, "v_inf", m.v_inf);
  read_number(tree, section, "k_alpha_sqrt", m.k_alpha_sqrt);
  read_number(tree, section, "k_alpha_lin", m.k_alpha_lin);
  read_number(tree, section, "k_disp", m.k_disp);
  m.validate();
  return m;
}

SourceParams source_defaults(const std::string& kind, const std::string& field) {
  if (kind == "pd") return default_pd_source();
  if (kind == "lightning") return default_lightning_source();
  throw Error::validation(field, "unknown source kind '" + kind + "' (pd or lightning)");
}

void validate_source(const SourceParams& s, const std::string& section) {
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error::validation(section, e.what());
  }
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  const pt::ptree tree = parse_ini(text);
  const std::set<std::string> sections{"line", "source", "sampling", "noise", "desync", "reflections", "analysis"};
  for (const auto& [name, node] : tree) {
    if (!sections.count(name)) throw Error::validation(name, "unknown section");
    if (node.empty() && !node.data().empty()) throw Error::validation(name, "key outside of a section");
  }
  check_keys(tree, "line", {"length_m", "a_over_l", "x_over_l", "model", "v_inf", "k_alpha_sqrt", "k_alpha_lin", "k_disp"});
  check_keys(tree, "source", {"kind", "amplitude", "tau1", "tau2", "n"});
  check_keys(tree, "sampling", {"sample_rate", "duration"});
  check_keys(tree, "noise", {"snr_db", "seed"});
  check_keys(tree, "desync", {"m1", "m2", "m3"});
  check_keys(tree, "reflections", {"rho_left", "rho_right", "max_bounces"});

  ScenarioConfig cfg;
  if (!get_text(tree, "line", "length_m")) throw Error::validation("line.length_m", "is required");
  if (!get_text(tree, "line", "x_over_l")) throw Error::validation("line.x_over_l", "is required");
  read_number(tree, "line", "length_m", cfg.geometry.length_m);
  read_number(tree, "line", "a_over_l", cfg.geometry.a_over_l);
  read_number(tree, "line", "x_over_l", cfg.geometry.x_over_l);
  cfg.model = read_model(tree, "line", get_text(tree, "line", "model").value_or("cable"));

  const std::string kind = get_text(tree, "source", "kind").value_or("pd");
  cfg.source = source_defaults(kind, "source.kind");
  read_number(tree, "source", "amplitude", cfg.source.amplitude);
  read_number(tree, "source", "tau1", cfg.source.tau1);
  read_number(tree, "source", "tau2", cfg.source.tau2);
  read_number(tree, "source", "n", cfg.source.n);
  validate_source(cfg.source, "source");

  read_number(tree, "sampling", "sample_rate", cfg.sample_rate);
  read_number(tree, "sampling", "duration", cfg.duration);

  if (const auto t = get_text(tree, "noise", "snr_db")) cfg.snr_db = to_snr(*t, "noise.snr_db");
  if (const auto t = get_text(tree, "noise", "seed")) {
    const double v = to_number(*t, "noise.seed");
    if (v < 0.0 || v != std::floor(v)) throw Error::validation("noise.seed", "expected a non-negative integer");
    cfg.noise_seed = static_cast<std::uint64_t>(v);
  }
  read_number(tree, "desync", "m1", cfg.desync_offsets[0]);
  read_number(tree, "desync", "m2", cfg.desync_offsets[1]);
  read_number(tree, "desync", "m3", cfg.desync_offsets[2]);

  if (tree.get_child_optional("reflections")) {
    ReflectionConfig r;
    read_number(tree, "reflections", "rho_left", r.rho_left);
    read_number(tree, "reflections", "rho_right", r.rho_right);
    read_int(tree, "reflections", "max_bounces", r.max_bounces);
    cfg.reflections = r;
  }
  AnalysisParams analysis;
  apply_analysis(tree, analysis);
  cfg.analysis_f_max = analysis.f_max;
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) { return parse_scenario(read_file(path)); }

AnalysisParams parse_analysis(const std::string& text) {
  AnalysisParams a;
  apply_analysis(parse_ini(text), a);
  return a;
}

AnalysisParams load_analysis(const std::filesystem::path& path) { return parse_analysis(read_file(path)); }

ExperimentMatrix parse_matrix(const std::string& text) {
  const pt::ptree tree = parse_ini(text);
  ExperimentMatrix m = default_matrix();
  check_keys(tree, "matrix",
             {"sections", "cases", "location_factors", "snr_db", "seeds", "desync", "sample_rate", "velocity_error",
              "workers", "timing"});

  std::set<std::string> custom;
  for (const auto& [name, node] : tree) {
    if (name == "matrix" || name == "analysis") continue;
    if (!boost::starts_with(name, "section.")) throw Error::validation(name, "unknown section");
    check_keys(tree, name, {"length_m", "a_over_l", "duration"});
    custom.insert(name.substr(8));
  }

  if (const auto t = get_text(tree, "matrix", "sections")) {
    m.lines.clear();
    for (const std::string& name : list(*t)) {
      LinePreset line;
      if (name == "a" || name == "b" || name == "c") {
        line = line_preset(name);
      } else if (custom.count(name)) {
        line.name = name;
        for (const char* key : {"length_m", "a_over_l", "duration"}) {
          if (!get_text(tree, "section." + name, key)) {
            throw Error::validation("section." + name + "." + key, "is required for a custom section");
          }
        }
      } else {
        throw Error::validation("matrix.sections", "unknown section '" + name + "' (a, b, c or a [section.<name>])");
      }
      read_number(tree, "section." + name, "length_m", line.length_m);
      read_number(tree, "section." + name, "a_over_l", line.a_over_l);
      read_number(tree, "section." + name, "duration", line.duration);
      m.lines.push_back(line);
    }
  }

  if (const auto t = get_text(tree, "matrix", "cases")) {
    m.cases.clear();
    for (const std::string& item : list(*t)) {
      const auto parts = list(item, ":");
      if (parts.size() != 2) throw Error::validation("matrix.cases", "expected <model>:<source>, got '" + item + "'");
      LineCase c;
      c.model_name = parts[0];
      try {
        c.model = model_preset(parts[0]);
      } catch (const Error&) {
        throw Error::validation("matrix.cases", "unknown model preset '" + parts[0] + "'");
      }
      c.source = source_defaults(parts[1], "matrix.cases");
      m.cases.push_back(c);
    }
  }

  if (const auto t = get_text(tree, "matrix", "location_factors")) {
    m.location_factors.clear();
    for (const std::string& v : list(*t)) m.location_factors.push_back(to_number(v, "matrix.location_factors"));
  }
  if (const auto t = get_text(tree, "matrix", "snr_db")) {
    m.noise_levels.clear();
    for (const std::string& v : list(*t)) m.noise_levels.push_back(to_snr(v, "matrix.snr_db"));
  }
  if (const auto t = get_text(tree, "matrix", "seeds")) {
    // "1-10" or a comma list
    m.seeds.clear();
    for (const std::string& item : list(*t)) {
      const auto range = list(item, "-");
      auto seed = [](const std::string& s) {
        const double v = to_number(s, "matrix.seeds");
        if (v < 0.0 || v != std::floor(v)) throw Error::validation("matrix.seeds", "expected non-negative integers");
        return static_cast<std::uint64_t>(v);
      };
      if (range.size() == 2) {
        const auto lo = seed(range[0]);
        const auto hi = seed(range[1]);
        if (hi < lo || hi - lo > 100000) throw Error::validation("matrix.seeds", "invalid range '" + item + "'");
        for (auto s = lo; s <= hi; ++s) m.seeds.push_back(s);
      } else if (range.size() == 1) {
        m.seeds.push_back(seed(range[0]));
      } else {
        throw Error::validation("matrix.seeds", "invalid entry '" + item + "'");
      }
    }
  }
  if (const auto t = get_text(tree, "matrix", "desync")) {
    // "m1 m2 m3; m1 m2 m3" in seconds
    m.desync_cases.clear();
    for (const std::string& item : list(*t, ";")) {
      const auto parts = list(item, " \t");
      if (parts.size() != 3) throw Error::validation("matrix.desync", "expected three offsets per case, got '" + item + "'");
      m.desync_cases.push_back({to_number(parts[0], "matrix.desync"), to_number(parts[1], "matrix.desync"),
                                to_number(parts[2], "matrix.desync")});
    }
  }
  read_number(tree, "matrix", "sample_rate", m.sample_rate);
  read_number(tree, "matrix", "velocity_error", m.velocity_error);
  read_int(tree, "matrix", "workers", m.workers);
  if (const auto t = get_text(tree, "matrix", "timing")) m.timing = to_bool(*t, "matrix.timing");

  apply_analysis(tree, m.analysis);
  m.validate();
  return m;
}

ExperimentMatrix load_matrix(const std::filesystem::path& path) { return parse_matrix(read_file(path)); }

}  // namespace twloc::config
