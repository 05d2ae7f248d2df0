#include "ltvdw/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ltvdw/io.hpp"

namespace ltvdw {

namespace {

struct RawValue {
  std::string text;
  int line = 0;
};

using Section = std::map<std::string, RawValue>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

[[noreturn]] void fail(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": " + msg);
}

std::map<std::string, Section> parse_sections(const std::string& text) {
  std::map<std::string, Section> sections;
  std::istringstream is(text);
  std::string line;
  std::string current;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(lineno, "unterminated section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) fail(lineno, "empty section name");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(lineno, "expected 'key = value'");
    if (current.empty()) fail(lineno, "key before any [section] header");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(lineno, "empty key");
    if (value.empty()) fail(lineno, "empty value for key '" + key + "'");
    if (sections[current].count(key)) fail(lineno, "duplicate key '" + key + "'");
    sections[current][key] = RawValue{value, lineno};
  }
  return sections;
}

double parse_number(const RawValue& rv, const std::string& key) {
  try {
    size_t used = 0;
    const double v = std::stod(rv.text, &used);
    if (used != rv.text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(rv.line, "cannot parse '" + rv.text + "' as a number for key '" + key + "'");
  }
}

long parse_integer(const RawValue& rv, const std::string& key) {
  try {
    size_t used = 0;
    const long v = std::stol(rv.text, &used);
    if (used != rv.text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(rv.line, "cannot parse '" + rv.text + "' as an integer for key '" + key + "'");
  }
}

std::uint64_t parse_u64(const RawValue& rv, const std::string& key) {
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(rv.text, &used);
    if (used != rv.text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    fail(rv.line, "cannot parse '" + rv.text + "' as an unsigned integer for key '" + key + "'");
  }
}

// Parses "[a, b, c]" and nested "[[a,b],[c,d]]" (row-major rows).
std::vector<std::vector<double>> parse_array(const RawValue& rv, const std::string& key) {
  const std::string& s = rv.text;
  size_t i = 0;
  auto skip_ws = [&] { while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i; };
  auto expect = [&](char c) {
    skip_ws();
    if (i >= s.size() || s[i] != c) {
      fail(rv.line, std::string("expected '") + c + "' in array value for key '" + key + "'");
    }
    ++i;
  };
  auto parse_scalar = [&]() -> double {
    skip_ws();
    size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s.substr(i), &used);
    } catch (const std::exception&) {
      fail(rv.line, "bad number in array value for key '" + key + "'");
    }
    i += used;
    return v;
  };
  auto parse_row = [&]() -> std::vector<double> {
    std::vector<double> row;
    expect('[');
    skip_ws();
    if (i < s.size() && s[i] == ']') { ++i; return row; }
    while (true) {
      row.push_back(parse_scalar());
      skip_ws();
      if (i < s.size() && s[i] == ',') { ++i; continue; }
      expect(']');
      return row;
    }
  };

  std::vector<std::vector<double>> rows;
  expect('[');
  skip_ws();
  if (i < s.size() && s[i] == '[') {
    while (true) {
      rows.push_back(parse_row());
      skip_ws();
      if (i < s.size() && s[i] == ',') { ++i; skip_ws(); continue; }
      expect(']');
      break;
    }
  } else {
    // flat vector: rewind the '[' we consumed
    --i;
    rows.push_back(parse_row());
  }
  skip_ws();
  if (i != s.size()) fail(rv.line, "trailing characters after array for key '" + key + "'");
  return rows;
}

Eigen::VectorXd parse_vector(const RawValue& rv, const std::string& key, int expected) {
  const auto rows = parse_array(rv, key);
  if (rows.size() != 1) fail(rv.line, "key '" + key + "' expects a flat vector");
  if (expected >= 0 && static_cast<int>(rows[0].size()) != expected) {
    fail(rv.line, "key '" + key + "' expects " + std::to_string(expected) +
                      " entries, got " + std::to_string(rows[0].size()));
  }
  Eigen::VectorXd v(rows[0].size());
  for (size_t j = 0; j < rows[0].size(); ++j) v(static_cast<int>(j)) = rows[0][j];
  return v;
}

class SectionReader {
 public:
  SectionReader(const std::map<std::string, Section>& sections, const std::string& name,
                bool required) {
    auto it = sections.find(name);
    if (it == sections.end()) {
      if (required) throw ConfigError("missing section [" + name + "]");
      section_ = nullptr;
    } else {
      section_ = &it->second;
    }
    name_ = name;
  }

  bool present() const { return section_ != nullptr; }

  const RawValue* find(const std::string& key) {
    if (!section_) return nullptr;
    auto it = section_->find(key);
    if (it == section_->end()) return nullptr;
    seen_.insert(key);
    return &it->second;
  }

  double number(const std::string& key, double fallback) {
    const RawValue* rv = find(key);
    return rv ? parse_number(*rv, key) : fallback;
  }
  long integer(const std::string& key, long fallback) {
    const RawValue* rv = find(key);
    return rv ? parse_integer(*rv, key) : fallback;
  }
  std::uint64_t u64(const std::string& key, std::uint64_t fallback) {
    const RawValue* rv = find(key);
    return rv ? parse_u64(*rv, key) : fallback;
  }
  std::string str(const std::string& key, const std::string& fallback) {
    const RawValue* rv = find(key);
    return rv ? rv->text : fallback;
  }
  Eigen::VectorXd vector(const std::string& key, const Eigen::VectorXd& fallback,
                         int expected) {
    const RawValue* rv = find(key);
    return rv ? parse_vector(*rv, key, expected) : fallback;
  }

  void reject_unknown_keys() const {
    if (!section_) return;
    for (const auto& [key, rv] : *section_) {
      if (!seen_.count(key)) fail(rv.line, "unknown key '" + key + "' in section [" + name_ + "]");
    }
  }

 private:
  const Section* section_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

ScenarioConfig parse_config_text(const std::string& text) {
  const auto sections = parse_sections(text);
  for (const auto& [name, _] : sections) {
    if (name != "scenario" && name != "noise" && name != "detector" && name != "attack" &&
        name != "run") {
      throw ConfigError("unknown section [" + name + "]");
    }
  }

  ScenarioConfig cfg;
  cfg.scenario = CarScenarioParams::defaults();

  SectionReader scenario(sections, "scenario", true);
  cfg.scenario.traj.dt = scenario.number("dt", cfg.scenario.traj.dt);
  if (cfg.scenario.traj.dt <= 0.0) {
    throw ConfigError("scenario dt must be positive, got " +
                      std::to_string(cfg.scenario.traj.dt));
  }
  cfg.scenario.traj.duration_s = scenario.number("duration", cfg.scenario.traj.duration_s);
  if (cfg.scenario.traj.duration_s <= 0.0) throw ConfigError("scenario duration must be positive");
  cfg.scenario.traj.v_mean = scenario.number("v_mean", cfg.scenario.traj.v_mean);
  cfg.scenario.traj.v_amp = scenario.number("v_amp", cfg.scenario.traj.v_amp);
  cfg.scenario.traj.v_period_s = scenario.number("v_period", cfg.scenario.traj.v_period_s);
  cfg.scenario.traj.heading_amp = scenario.number("heading_amp", cfg.scenario.traj.heading_amp);
  cfg.scenario.traj.heading_period_s =
      scenario.number("heading_period", cfg.scenario.traj.heading_period_s);
  cfg.scenario.traj.velocity_floor =
      scenario.number("velocity_floor", cfg.scenario.traj.velocity_floor);
  cfg.scenario.state_scale = scenario.vector("state_scale", cfg.scenario.state_scale, 5);
  cfg.scenario.q_diag = scenario.vector("q_diag", cfg.scenario.q_diag, 5);
  cfg.scenario.r_diag = scenario.vector("r_diag", cfg.scenario.r_diag, 2);
  scenario.reject_unknown_keys();

  SectionReader noise(sections, "noise", true);
  cfg.scenario.sigma_w_base = noise.vector("sigma_w_base", cfg.scenario.sigma_w_base, 5);
  cfg.scenario.sigma_z_base = noise.vector("sigma_z_base", cfg.scenario.sigma_z_base, 5);
  cfg.scenario.sigma_e = noise.vector("sigma_e", cfg.scenario.sigma_e, 2);
  cfg.scenario.velocity_noise_floor =
      noise.number("velocity_noise_floor", cfg.scenario.velocity_noise_floor);
  noise.reject_unknown_keys();

  SectionReader detector(sections, "detector", true);
  cfg.scenario.window = static_cast<int>(detector.integer("window", cfg.scenario.window));
  cfg.scenario.watermark_delay =
      static_cast<int>(detector.integer("watermark_delay", cfg.scenario.watermark_delay));
  cfg.scenario.target_rate_per_s =
      detector.number("target_rate_per_s", cfg.scenario.target_rate_per_s);
  {
    const std::string mode = detector.str("normalization", "analytic");
    if (mode == "analytic") cfg.normalization = NormalizationMode::Analytic;
    else if (mode == "ensemble") cfg.normalization = NormalizationMode::Ensemble;
    else if (mode == "lti") cfg.normalization = NormalizationMode::Lti;
    else throw ConfigError("unknown normalization mode '" + mode + "'");
  }
  detector.reject_unknown_keys();

  SectionReader attack(sections, "attack", false);
  if (attack.present()) {
    const std::string kind = attack.str("type", "none");
    if (kind == "none") cfg.attack_kind = AttackKind::None;
    else if (kind == "replay") cfg.attack_kind = AttackKind::Replay;
    else if (kind == "custom") cfg.attack_kind = AttackKind::Custom;
    else throw ConfigError("unknown attack type '" + kind + "'");
    cfg.attack_start_s = attack.number("start", cfg.attack_start_s);
    cfg.attack_alpha = attack.number("alpha", cfg.attack_alpha);
    cfg.attack_sigma_omega = attack.vector("sigma_omega", Eigen::VectorXd(), -1);
    cfg.attack_sigma_zeta = attack.vector("sigma_zeta", Eigen::VectorXd(), -1);
    attack.reject_unknown_keys();
    if (cfg.attack_kind == AttackKind::Custom &&
        (cfg.attack_sigma_omega.size() != 5 || cfg.attack_sigma_zeta.size() != 5)) {
      throw ConfigError("custom attacks need sigma_omega and sigma_zeta (5 entries each)");
    }
  }

  SectionReader run(sections, "run", true);
  cfg.seed = run.u64("seed", cfg.seed);
  cfg.runs = static_cast<int>(run.integer("runs", cfg.runs));
  if (cfg.runs < 1) throw ConfigError("runs must be >= 1");
  cfg.out_dir = run.str("out", cfg.out_dir);
  run.reject_unknown_keys();

  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

namespace {
std::string vec_text(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (int i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_double(v(i));
  }
  return s + "]";
}
}  // namespace

std::string serialize_config(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "[scenario]\n"
     << "dt = " << format_double(c.scenario.traj.dt) << "\n"
     << "duration = " << format_double(c.scenario.traj.duration_s) << "\n"
     << "v_mean = " << format_double(c.scenario.traj.v_mean) << "\n"
     << "v_amp = " << format_double(c.scenario.traj.v_amp) << "\n"
     << "v_period = " << format_double(c.scenario.traj.v_period_s) << "\n"
     << "heading_amp = " << format_double(c.scenario.traj.heading_amp) << "\n"
     << "heading_period = " << format_double(c.scenario.traj.heading_period_s) << "\n"
     << "velocity_floor = " << format_double(c.scenario.traj.velocity_floor) << "\n"
     << "state_scale = " << vec_text(c.scenario.state_scale) << "\n"
     << "q_diag = " << vec_text(c.scenario.q_diag) << "\n"
     << "r_diag = " << vec_text(c.scenario.r_diag) << "\n"
     << "\n[noise]\n"
     << "sigma_w_base = " << vec_text(c.scenario.sigma_w_base) << "\n"
     << "sigma_z_base = " << vec_text(c.scenario.sigma_z_base) << "\n"
     << "sigma_e = " << vec_text(c.scenario.sigma_e) << "\n"
     << "velocity_noise_floor = " << format_double(c.scenario.velocity_noise_floor) << "\n"
     << "\n[detector]\n"
     << "window = " << c.scenario.window << "\n"
     << "watermark_delay = " << c.scenario.watermark_delay << "\n"
     << "target_rate_per_s = " << format_double(c.scenario.target_rate_per_s) << "\n"
     << "normalization = " << to_string(c.normalization) << "\n"
     << "\n[attack]\n"
     << "type = " << to_string(c.attack_kind) << "\n"
     << "start = " << format_double(c.attack_start_s) << "\n"
     << "alpha = " << format_double(c.attack_alpha) << "\n";
  if (c.attack_sigma_omega.size())
    os << "sigma_omega = " << vec_text(c.attack_sigma_omega) << "\n";
  if (c.attack_sigma_zeta.size())
    os << "sigma_zeta = " << vec_text(c.attack_sigma_zeta) << "\n";
  os << "\n[run]\n"
     << "seed = " << c.seed << "\n"
     << "runs = " << c.runs << "\n"
     << "out = " << c.out_dir << "\n";
  return os.str();
}

std::string ScenarioConfig::scenario_hash() const {
  // FNV-1a 64 over the scenario-defining part of the canonical serialization.
  const std::string full = serialize_config(*this);
  const auto cut = full.find("\n[attack]");
  const std::string scoped = cut == std::string::npos ? full : full.substr(0, cut);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : scoped) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Replay: return "replay";
    case AttackKind::Custom: return "custom";
  }
  return "none";
}

const char* to_string(NormalizationMode m) {
  switch (m) {
    case NormalizationMode::Analytic: return "analytic";
    case NormalizationMode::Ensemble: return "ensemble";
    case NormalizationMode::Lti: return "lti";
  }
  return "analytic";
}

}  // namespace ltvdw
