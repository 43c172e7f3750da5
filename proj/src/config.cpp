#include "subkam/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <functional>
#include <sstream>

namespace subkam {

GridGeometry RunConfig::hj_geometry() const {
  const int d = instance == "custom" ? custom.d : (instance == "heisenberg" ? 3 : (instance == "grushin" ? 2 : 1));
  return cube_geometry(d, hj_half_width, hj_resolution);
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::kConfig, what); }

double parse_double(const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad("expected a number, got '" + s + "'");
  return v;
}

long long parse_integer(const std::string& raw) {
  const std::string s = trim(raw);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) bad("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& raw) {
  std::string s = trim(raw);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  bad("expected true or false, got '" + s + "'");
}

std::string parse_string(const std::string& raw) {
  std::string s = trim(raw);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::string strip_brackets(const std::string& raw) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') bad("unbalanced brackets in '" + s + "'");
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_doubles(const std::string& raw) {
  std::vector<double> out;
  for (const auto& tok : split_list(strip_brackets(raw))) out.push_back(parse_double(tok));
  return out;
}

std::vector<int> parse_ints(const std::string& raw) {
  std::vector<int> out;
  for (const auto& tok : split_list(strip_brackets(raw))) out.push_back(static_cast<int>(parse_integer(tok)));
  return out;
}

std::vector<std::vector<double>> parse_table(const std::string& raw) {
  const std::string s = trim(raw);
  if (s.empty() || s == "[]") return {};
  if (s.front() != '[' || s.back() != ']') bad("expected a table like [[1, 2], [3, 4]]");
  const std::string inner = trim(s.substr(1, s.size() - 2));
  std::vector<std::vector<double>> rows;
  std::size_t i = 0;
  while (i < inner.size()) {
    if (std::isspace(static_cast<unsigned char>(inner[i])) || inner[i] == ',') {
      ++i;
      continue;
    }
    if (inner[i] != '[') bad("expected '[' starting a table row");
    const std::size_t close = inner.find(']', i);
    if (close == std::string::npos) bad("unterminated table row");
    rows.push_back(parse_doubles(inner.substr(i, close - i + 1)));
    i = close + 1;
  }
  return rows;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_same_v<T, double>) out += fmt(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_table(const std::vector<std::vector<double>>& t) {
  std::string out = "[";
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i) out += ", ";
    out += "[" + fmt_list(t[i]) + "]";
  }
  return out + "]";
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Acc>
Field num(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key),
          [acc](RunConfig& c, const std::string& s) { acc(c) = parse_double(s); },
          [acc](const RunConfig& c) { return fmt(acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Field integer(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key),
          [acc](RunConfig& c, const std::string& s) {
            using T = std::remove_reference_t<decltype(acc(c))>;
            const long long v = parse_integer(s);
            if (v < 0 && std::is_unsigned_v<T>) bad("expected a nonnegative integer");
            acc(c) = static_cast<T>(v);
          },
          [acc](const RunConfig& c) { return std::to_string(acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Field flag(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key), [acc](RunConfig& c, const std::string& s) { acc(c) = parse_bool(s); },
          [acc](const RunConfig& c) { return std::string(acc(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class Acc>
Field text(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key), [acc](RunConfig& c, const std::string& s) { acc(c) = parse_string(s); },
          [acc](const RunConfig& c) { return acc(const_cast<RunConfig&>(c)); }};
}

template <class Acc>
Field doubles(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key), [acc](RunConfig& c, const std::string& s) { acc(c) = parse_doubles(s); },
          [acc](const RunConfig& c) { return fmt_list(acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Field ints(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key), [acc](RunConfig& c, const std::string& s) { acc(c) = parse_ints(s); },
          [acc](const RunConfig& c) { return fmt_list(acc(const_cast<RunConfig&>(c))); }};
}

template <class Acc>
Field table(std::string sec, std::string key, Acc acc) {
  return {std::move(sec), std::move(key), [acc](RunConfig& c, const std::string& s) { acc(c) = parse_table(s); },
          [acc](const RunConfig& c) { return fmt_table(acc(const_cast<RunConfig&>(c))); }};
}

#define ACC(expr) [](RunConfig& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> all{
      text("", "instance", ACC(c.instance)),
      text("", "task", ACC(c.task)),
      integer("", "seed", ACC(c.seed)),
      text("", "out_dir", ACC(c.out_dir)),

      num("instance", "shift", ACC(c.shift)),
      text("instance", "system", ACC(c.custom.system)),
      integer("instance", "d", ACC(c.custom.d)),
      integer("instance", "m", ACC(c.custom.m)),
      table("instance", "fields", ACC(c.custom.fields)),
      num("instance", "field_growth", ACC(c.custom.field_growth)),
      table("instance", "numerator", ACC(c.custom.numerator)),
      table("instance", "denominator", ACC(c.custom.denominator)),
      text("instance", "kinetic", ACC(c.custom.kinetic)),
      num("instance", "beta", ACC(c.custom.beta)),
      doubles("instance", "x_star", ACC(c.custom.x_star)),
      num("instance", "attractor_radius", ACC(c.custom.attractor_radius)),
      num("instance", "gap", ACC(c.custom.gap)),
      num("instance", "growth_C1", ACC(c.custom.growth_C1)),

      integer("assumptions", "samples", ACC(c.assumption_samples)),
      num("assumptions", "x_radius", ACC(c.sample_boxes.x_radius)),
      num("assumptions", "u_radius", ACC(c.sample_boxes.u_radius)),
      num("assumptions", "p_radius", ACC(c.sample_boxes.p_radius)),
      integer("assumptions", "field_samples", ACC(c.field_samples)),
      num("assumptions", "oracle_radius", ACC(c.oracle_radius)),
      integer("assumptions", "oracle_grid", ACC(c.oracle_grid)),

      integer("action", "n_steps", ACC(c.optimizer.n_steps)),
      integer("action", "n_restarts", ACC(c.optimizer.n_restarts)),
      num("action", "penalty_init", ACC(c.optimizer.penalty_init)),
      num("action", "penalty_growth", ACC(c.optimizer.penalty_growth)),
      integer("action", "max_outer", ACC(c.optimizer.max_outer)),
      num("action", "grad_tol", ACC(c.optimizer.grad_tol)),
      num("action", "max_dt", ACC(c.optimizer.max_dt)),
      integer("action", "max_iterations", ACC(c.optimizer.max_iterations)),
      num("action", "feasibility_tol", ACC(c.optimizer.feasibility_tol)),

      num("hj", "half_width", ACC(c.hj_half_width)),
      integer("hj", "resolution", ACC(c.hj_resolution)),
      num("hj", "dt", ACC(c.scheme.dt)),
      num("hj", "U", ACC(c.scheme.U)),
      integer("hj", "control_samples", ACC(c.scheme.control_samples)),
      flag("hj", "legendre_candidate", ACC(c.scheme.legendre_candidate)),
      num("hj", "tol_fixed_point", ACC(c.scheme.tol_fixed_point)),
      integer("hj", "max_iters", ACC(c.scheme.max_iters)),
      num("hj", "c_offset", ACC(c.solve_c_offset)),

      doubles("critical", "x", ACC(c.probe_point)),
      doubles("critical", "t_ladder", ACC(c.t_ladder)),
      doubles("critical", "lambda_ladder", ACC(c.lambda_ladder)),
      flag("critical", "cross_check", ACC(c.cross_check)),
      num("critical", "lp_R", ACC(c.lp_R)),
      num("critical", "lp_U", ACC(c.lp_U)),
      ints("critical", "lp_n_x", ACC(c.lp_n_x)),
      ints("critical", "lp_n_u", ACC(c.lp_n_u)),
      integer("critical", "lp_degree", ACC(c.lp_degree)),
      integer("critical", "dual_samples", ACC(c.dual_samples)),
      integer("critical", "dual_sweeps", ACC(c.dual_sweeps)),

      num("barrier", "t_min", ACC(c.barrier.t_min)),
      num("barrier", "t_max", ACC(c.barrier.t_max)),
      integer("barrier", "n_horizons", ACC(c.barrier.n_horizons)),
      integer("barrier", "tail_restarts", ACC(c.barrier.tail_restarts)),
      integer("barrier", "n_triples", ACC(c.n_triples)),
      num("barrier", "radius", ACC(c.triple_radius)),

      num("aubry", "probe_radius", ACC(c.probe_radius)),
      num("aubry", "probe_spacing", ACC(c.probe_spacing)),
      num("aubry", "eps_A", ACC(c.eps_A)),

      num("calibrate", "horizon", ACC(c.calibrate_horizon)),
      num("calibrate", "dt", ACC(c.calibrate_dt)),
  };
  return all;
}

#undef ACC

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

struct Assignment {
  std::string section, key, value;
  int line;
};

// Splits on commas outside brackets, then glues pieces without '=' back onto
// the previous value so that "a = 1, 2, b = 3" reads as a = "1, 2" and b = "3".
std::vector<std::pair<std::string, std::string>> split_assignments(const std::string& line, int line_no) {
  std::vector<std::string> pieces;
  std::string cur;
  int depth = 0;
  for (char ch : line) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      pieces.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  pieces.push_back(cur);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : pieces) {
    const auto eq = p.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(trim(p.substr(0, eq)), trim(p.substr(eq + 1)));
    } else if (!out.empty()) {
      out.back().second += ", " + trim(p);
    } else {
      bad("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
  }
  return out;
}

void validate(const RunConfig& c) {
  if (std::find(known_tasks().begin(), known_tasks().end(), c.task) == known_tasks().end())
    bad("unknown task '" + c.task + "'");
  c.optimizer.validate();
  c.scheme.validate();
  c.barrier.validate();
  if (c.lp_n_x.empty() || c.lp_n_x.size() != c.lp_n_u.size())
    bad("critical.lp_n_x and critical.lp_n_u must be nonempty lists of equal length");
  if (c.t_ladder.size() < 2 || c.lambda_ladder.size() < 2) bad("critical ladders need at least two entries");
  if (c.hj_resolution < 3) bad("hj.resolution must be >= 3");
  if (!(c.hj_half_width > 0.0)) bad("hj.half_width must be positive");
  if (c.n_triples < 0) bad("barrier.n_triples must be >= 0");
  if (!(c.probe_spacing > 0.0) || !(c.probe_radius > 0.0)) bad("aubry probe radius and spacing must be positive");
  if (!(c.calibrate_horizon > 0.0) || !(c.calibrate_dt > 0.0)) bad("calibrate horizon and dt must be positive");
  if (c.instance == "custom") {
    if (c.custom.d < 1 || c.custom.d > kMaxDim || c.custom.m < 1 || c.custom.m > kMaxDim)
      bad("instance.d and instance.m must lie in [1, " + std::to_string(kMaxDim) + "]");
    if (static_cast<int>(c.custom.x_star.size()) != c.custom.d) bad("instance.x_star must have d entries");
  }
}

}  // namespace

void apply_instance_defaults(RunConfig& c) {
  auto& o = c.optimizer;
  o.n_steps = 20;
  o.n_restarts = 2;
  o.max_dt = 0.1;
  c.barrier.optimizer = o;
  if (c.instance == "euclidean-1d" || c.instance == "double-well" || c.instance == "custom") {
    c.probe_point = {0.5};
    c.hj_half_width = 2.0;
    c.hj_resolution = 401;
    c.scheme.dt = 5e-3;
    c.scheme.U = 2.0;
    c.scheme.control_samples = 41;
    c.lp_R = 2.0;
    c.lp_n_x = {21, 41, 81};
    c.lp_n_u = {21, 41, 41};
    c.dual_samples = 81;
    c.probe_radius = 1.5;
    c.probe_spacing = 0.25;
  }
  if (c.instance == "double-well") c.probe_point = {0.0};
  if (c.instance == "custom") {
    c.probe_point.assign(static_cast<std::size_t>(c.custom.d), 0.0);
    if (c.custom.d > 1) {
      c.hj_resolution = 21;
      c.scheme.dt = 0.1;
      c.scheme.control_samples = 9;
    }
  }
  if (c.instance == "heisenberg") {
    c.probe_point = {0.5, 0.0, 0.0};
    c.hj_half_width = 2.0;
    c.hj_resolution = 21;
    c.scheme.dt = 0.1;
    c.scheme.U = 2.0;
    c.scheme.control_samples = 9;
    c.lp_R = 2.0;
    c.lp_n_x = {5, 7, 9};
    c.lp_n_u = {5, 7, 9};
    c.dual_samples = 9;
    c.dual_sweeps = 4;
    c.probe_radius = 1.5;
    c.probe_spacing = 0.75;
    c.calibrate_dt = 0.05;
  }
  if (c.instance == "grushin") {
    c.probe_point = {0.5, 0.0};
    c.hj_half_width = 2.0;
    c.hj_resolution = 41;
    c.scheme.dt = 0.05;
    c.scheme.U = 2.0;
    c.scheme.control_samples = 9;
    c.lp_R = 2.0;
    c.lp_n_x = {9, 13, 17};
    c.lp_n_u = {9, 9, 9};
    c.dual_samples = 21;
    c.dual_sweeps = 6;
    c.probe_radius = 1.5;
    c.probe_spacing = 0.5;
    c.calibrate_dt = 0.02;
  }
}

RunConfig parse_config(const std::string& text) {
  std::vector<Assignment> assigns;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      static const std::vector<std::string> sections{"instance", "assumptions", "action", "hj",
                                                     "critical", "barrier", "aubry", "calibrate"};
      if (std::find(sections.begin(), sections.end(), section) == sections.end())
        bad("line " + std::to_string(line_no) + ": unknown section [" + section + "]");
      continue;
    }
    for (auto& [key, value] : split_assignments(line, line_no)) {
      if (key.empty()) bad("line " + std::to_string(line_no) + ": empty key");
      if (!find_field(section, key)) {
        const std::string where = section.empty() ? key : section + "." + key;
        bad("line " + std::to_string(line_no) + ": unknown key '" + where + "'");
      }
      assigns.push_back({section, key, value, line_no});
    }
  }

  RunConfig c;
  int instance_line = line_no;
  bool have_instance = false;
  for (const auto& a : assigns)
    if (a.section.empty() && a.key == "instance") {
      c.instance = parse_string(a.value);
      instance_line = a.line;
      have_instance = true;
    }
  if (!have_instance) bad("line " + std::to_string(instance_line) + ": missing 'instance'");
  if (std::find(known_instances().begin(), known_instances().end(), c.instance) == known_instances().end())
    bad("line " + std::to_string(instance_line) + ": unknown instance '" + c.instance + "'");
  // Custom dimensions steer the defaults, so read them first.
  if (c.instance == "custom")
    for (const auto& a : assigns)
      if (a.section == "instance" && (a.key == "d" || a.key == "m")) {
        try {
          find_field(a.section, a.key)->set(c, a.value);
        } catch (const Error& e) {
          bad("line " + std::to_string(a.line) + ": " + a.key + ": " + e.what());
        }
      }
  apply_instance_defaults(c);

  for (const auto& a : assigns) {
    try {
      find_field(a.section, a.key)->set(c, a.value);
      if (a.section.empty() && a.key == "task" &&
          std::find(known_tasks().begin(), known_tasks().end(), c.task) == known_tasks().end())
        bad("unknown task '" + c.task + "'");
    } catch (const Error& e) {
      const std::string where = a.section.empty() ? a.key : a.section + "." + a.key;
      bad("line " + std::to_string(a.line) + ": " + where + ": " + e.what());
    }
  }
  try {
    validate(c);
  } catch (const Error& e) {
    bad(std::string("invalid configuration: ") + e.what());
  }
  return c;
}

std::string echo_config(const RunConfig& c) {
  std::ostringstream out;
  std::string section = "\x01";
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      if (!section.empty()) out << "\n[" << section << "]\n";
    }
    out << f.key << " = " << f.get(c) << "\n";
  }
  return out.str();
}

}  // namespace subkam
