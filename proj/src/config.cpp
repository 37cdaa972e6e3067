#include "qclt/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "qclt/diagnostics.hpp"
#include "qclt/errors.hpp"

namespace qclt {

// ------------------------------------------------------------- TOML subset

namespace toml {
namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  std::ostringstream msg;
  msg << "config line " << line << ": " << what;
  throw ConfigError(msg.str());
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Removes a # comment, respecting quoted strings.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

// Bracket balance outside strings; used to join multiline arrays.
int bracket_balance(const std::string& s) {
  int depth = 0;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      --depth;
    }
  }
  return depth;
}

bool valid_bare_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      return false;
  return true;
}

struct Cursor {
  const std::string& text;
  std::size_t pos = 0;
  int line;

  void skip_ws() {
    while (pos < text.size() &&
           (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\n' ||
            text[pos] == '\r'))
      ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= text.size();
  }
};

Value parse_value(Cursor& cur);

Value parse_string(Cursor& cur) {
  Value v;
  v.type = Value::Type::string;
  ++cur.pos;  // opening quote
  while (cur.pos < cur.text.size() && cur.text[cur.pos] != '"') {
    char c = cur.text[cur.pos];
    if (c == '\\') {
      ++cur.pos;
      if (cur.pos >= cur.text.size()) fail(cur.line, "unterminated escape");
      const char esc = cur.text[cur.pos];
      switch (esc) {
        case '"': c = '"'; break;
        case '\\': c = '\\'; break;
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        default: fail(cur.line, std::string("unsupported escape \\") + esc);
      }
    }
    v.s.push_back(c);
    ++cur.pos;
  }
  if (cur.pos >= cur.text.size()) fail(cur.line, "unterminated string");
  ++cur.pos;  // closing quote
  return v;
}

Value parse_array(Cursor& cur) {
  Value v;
  v.type = Value::Type::array;
  ++cur.pos;  // opening bracket
  while (true) {
    cur.skip_ws();
    if (cur.pos >= cur.text.size()) fail(cur.line, "unterminated array");
    if (cur.text[cur.pos] == ']') {
      ++cur.pos;
      return v;
    }
    v.items.push_back(parse_value(cur));
    cur.skip_ws();
    if (cur.pos < cur.text.size() && cur.text[cur.pos] == ',') {
      ++cur.pos;
      continue;
    }
    if (cur.pos < cur.text.size() && cur.text[cur.pos] == ']') {
      ++cur.pos;
      return v;
    }
    fail(cur.line, "expected ',' or ']' in array");
  }
}

Value parse_scalar(Cursor& cur) {
  std::size_t end = cur.pos;
  while (end < cur.text.size() && cur.text[end] != ',' &&
         cur.text[end] != ']' && cur.text[end] != ' ' &&
         cur.text[end] != '\t' && cur.text[end] != '\n' &&
         cur.text[end] != '\r')
    ++end;
  const std::string token = cur.text.substr(cur.pos, end - cur.pos);
  cur.pos = end;
  if (token.empty()) fail(cur.line, "expected a value");

  Value v;
  if (token == "true" || token == "false") {
    v.type = Value::Type::boolean;
    v.b = (token == "true");
    return v;
  }
  // Integer: optional sign followed by digits only.
  bool integral = true;
  for (std::size_t i = 0; i < token.size(); ++i) {
    const char c = token[i];
    if (i == 0 && (c == '+' || c == '-')) continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      integral = false;
      break;
    }
  }
  if (integral && token != "+" && token != "-") {
    try {
      v.type = Value::Type::integer;
      v.i = std::stoll(token);
      return v;
    } catch (const std::exception&) {
      fail(cur.line, "integer out of range: " + token);
    }
  }
  try {
    std::size_t used = 0;
    v.type = Value::Type::floating;
    v.d = std::stod(token, &used);
    if (used != token.size()) fail(cur.line, "bad number: " + token);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(cur.line, "bad value: " + token);
  }
}

Value parse_value(Cursor& cur) {
  cur.skip_ws();
  if (cur.pos >= cur.text.size()) fail(cur.line, "expected a value");
  const char c = cur.text[cur.pos];
  if (c == '"') return parse_string(cur);
  if (c == '[') return parse_array(cur);
  return parse_scalar(cur);
}

}  // namespace

double Value::as_number() const {
  if (type == Type::integer) return static_cast<double>(i);
  if (type == Type::floating) return d;
  throw ConfigError("expected a numeric value");
}

Table parse(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_bare_key(section)) fail(line_no, "bad section name");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_bare_key(key)) fail(line_no, "bad key: " + key);

    std::string value_text = trim(line.substr(eq + 1));
    const int value_line = line_no;
    int balance = bracket_balance(value_text);
    while (balance > 0) {
      if (!std::getline(in, raw)) fail(value_line, "unterminated array");
      ++line_no;
      const std::string more = trim(strip_comment(raw));
      value_text += "\n" + more;
      balance = bracket_balance(value_text);
    }
    if (balance < 0) fail(value_line, "unbalanced brackets");

    Cursor cur{value_text, 0, value_line};
    Value v = parse_value(cur);
    if (!cur.done()) fail(value_line, "trailing characters after value");

    const std::string full = section.empty() ? key : section + "." + key;
    if (!table.emplace(full, std::move(v)).second)
      fail(value_line, "duplicate key: " + full);
  }
  return table;
}

}  // namespace toml

// -------------------------------------------------------------- experiment

namespace {

const toml::Value* find(const toml::Table& t, const std::string& key) {
  auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

long long integer_field(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::integer)
    throw ConfigError(key + " must be an integer");
  return v.i;
}

std::string string_field(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::string)
    throw ConfigError(key + " must be a string");
  return v.s;
}

bool bool_field(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::boolean)
    throw ConfigError(key + " must be a boolean");
  return v.b;
}

std::vector<double> number_array(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::array)
    throw ConfigError(key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& item : v.items) out.push_back(item.as_number());
  return out;
}

std::vector<long> long_array(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::array)
    throw ConfigError(key + " must be an array of integers");
  std::vector<long> out;
  for (const auto& item : v.items)
    out.push_back(static_cast<long>(integer_field(item, key + " entry")));
  return out;
}

std::vector<int> int_array(const toml::Value& v, const std::string& key) {
  std::vector<int> out;
  for (long x : long_array(v, key)) out.push_back(static_cast<int>(x));
  return out;
}

std::vector<std::string> string_array(const toml::Value& v,
                                      const std::string& key) {
  if (v.type != toml::Value::Type::array)
    throw ConfigError(key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& item : v.items)
    out.push_back(string_field(item, key + " entry"));
  return out;
}

Matrix matrix_field(const toml::Value& v, const std::string& key) {
  if (v.type != toml::Value::Type::array)
    throw ConfigError(key + " must be an array of row arrays");
  Matrix out;
  for (const auto& row : v.items) out.push_back(number_array(row, key));
  return out;
}

// Collects every key of one section; `claim` marks the ones the schema
// consumed so leftovers can be flagged (or routed into builder params).
std::vector<std::string> section_keys(const toml::Table& t,
                                      const std::string& section) {
  std::vector<std::string> keys;
  const std::string prefix = section + ".";
  for (const auto& [key, value] : t)
    if (key.rfind(prefix, 0) == 0) keys.push_back(key.substr(prefix.size()));
  return keys;
}

void reject_unknown(const toml::Table& t, const std::string& section,
                    const std::vector<std::string>& known) {
  for (const std::string& key : section_keys(t, section))
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key \"" + key + "\" in [" + section + "]");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  const toml::Table t = toml::parse(text);
  ExperimentConfig cfg;

  if (const toml::Value* v = find(t, "seed")) {
    const long long s = integer_field(*v, "seed");
    if (s < 0) throw ConfigError("seed must be nonnegative");
    cfg.seed = static_cast<std::uint64_t>(s);
    cfg.seed_set = true;
  }
  if (const toml::Value* v = find(t, "threads")) {
    const long long n = integer_field(*v, "threads");
    if (n < 0) throw ConfigError("threads must be nonnegative");
    cfg.threads = static_cast<int>(n);
  }
  if (const toml::Value* v = find(t, "out_dir"))
    cfg.out_dir = string_field(*v, "out_dir");

  // [kernel] — exactly one source plus optional labels; any other
  // numeric keys are builder parameters.
  {
    const std::string sec = "kernel";
    const auto keys = section_keys(t, sec);
    if (!keys.empty()) {
      cfg.kernel_set = true;
      KernelSpec& k = cfg.kernel;
      int sources = 0;
      if (const toml::Value* v = find(t, "kernel.rows")) {
        k.rows = matrix_field(*v, "kernel.rows");
        k.source = KernelSpec::Source::rows;
        ++sources;
      }
      if (const toml::Value* v = find(t, "kernel.file")) {
        k.file = string_field(*v, "kernel.file");
        k.source = KernelSpec::Source::file;
        ++sources;
      }
      if (const toml::Value* v = find(t, "kernel.builder")) {
        k.builder = string_field(*v, "kernel.builder");
        k.source = KernelSpec::Source::builder;
        ++sources;
      }
      if (sources != 1 && !(sources == 2 && !k.builder.empty() &&
                            !k.rows.empty()))
        throw ConfigError(
            "[kernel] needs exactly one of rows/file/builder (builders "
            "taking a table may combine builder + rows)");
      if (const toml::Value* v = find(t, "kernel.labels"))
        k.labels = string_array(*v, "kernel.labels");
      if (const toml::Value* v = find(t, "kernel.target"))
        k.target = number_array(*v, "kernel.target");
      for (const std::string& key : keys) {
        if (key == "rows" || key == "file" || key == "builder" ||
            key == "labels" || key == "target")
          continue;
        const toml::Value* v = find(t, sec + "." + key);
        k.params[key] = v->as_number();
      }
    }
  }

  // [observable]
  {
    const std::string sec = "observable";
    const auto keys = section_keys(t, sec);
    if (!keys.empty()) {
      cfg.observable_set = true;
      ObservableSpec& o = cfg.observable;
      int sources = 0;
      if (const toml::Value* v = find(t, "observable.values")) {
        o.values = number_array(*v, "observable.values");
        o.source = ObservableSpec::Source::values;
        ++sources;
      }
      if (const toml::Value* v = find(t, "observable.file")) {
        o.file = string_field(*v, "observable.file");
        o.source = ObservableSpec::Source::file;
        ++sources;
      }
      if (const toml::Value* v = find(t, "observable.builder")) {
        o.builder = string_field(*v, "observable.builder");
        o.source = ObservableSpec::Source::builder;
        ++sources;
      }
      if (sources != 1)
        throw ConfigError(
            "[observable] needs exactly one of values/file/builder");
      for (const std::string& key : keys) {
        if (key == "values" || key == "file" || key == "builder") continue;
        const toml::Value* v = find(t, sec + "." + key);
        o.params[key] = v->as_number();
      }
    }
  }

  // [simulate]
  {
    reject_unknown(t, "simulate",
                   {"n_grid", "count", "m_grid", "quenched", "annealed",
                    "start_states", "time_grid"});
    SimulateSpec& s = cfg.simulate;
    if (const toml::Value* v = find(t, "simulate.n_grid"))
      s.n_grid = long_array(*v, "simulate.n_grid");
    if (const toml::Value* v = find(t, "simulate.count"))
      s.count = static_cast<long>(integer_field(*v, "simulate.count"));
    if (const toml::Value* v = find(t, "simulate.m_grid"))
      s.m_grid = int_array(*v, "simulate.m_grid");
    if (const toml::Value* v = find(t, "simulate.quenched"))
      s.quenched = bool_field(*v, "simulate.quenched");
    if (const toml::Value* v = find(t, "simulate.annealed"))
      s.annealed = bool_field(*v, "simulate.annealed");
    if (const toml::Value* v = find(t, "simulate.start_states"))
      s.start_states = int_array(*v, "simulate.start_states");
    if (const toml::Value* v = find(t, "simulate.time_grid"))
      s.time_grid = number_array(*v, "simulate.time_grid");
    if (s.n_grid.empty()) throw ConfigError("simulate.n_grid must be nonempty");
    for (long n : s.n_grid)
      if (n < 1) throw ConfigError("simulate.n_grid entries must be >= 1");
    for (int m : s.m_grid)
      if (m < 1) throw ConfigError("simulate.m_grid entries must be >= 1");
    if (s.count < 0) throw ConfigError("simulate.count must be nonnegative");
    for (double u : s.time_grid)
      if (!(u >= 0.0 && u <= 1.0))
        throw ConfigError("simulate.time_grid entries must lie in [0, 1]");
  }

  // [diagnose]
  {
    reject_unknown(t, "diagnose",
                   {"conditions", "eps", "m_grid", "n_grid", "count", "k_max",
                    "series_cap", "p_exponent", "start_state"});
    DiagnoseSpec& d = cfg.diagnose;
    if (const toml::Value* v = find(t, "diagnose.conditions")) {
      d.conditions = string_array(*v, "diagnose.conditions");
      for (const std::string& c : d.conditions)
        condition_from_name(c);  // validates; throws ConfigError
    }
    if (const toml::Value* v = find(t, "diagnose.eps"))
      d.eps = v->as_number();
    if (const toml::Value* v = find(t, "diagnose.m_grid"))
      d.m_grid = int_array(*v, "diagnose.m_grid");
    if (const toml::Value* v = find(t, "diagnose.n_grid"))
      d.n_grid = long_array(*v, "diagnose.n_grid");
    if (const toml::Value* v = find(t, "diagnose.count"))
      d.count = static_cast<long>(integer_field(*v, "diagnose.count"));
    if (const toml::Value* v = find(t, "diagnose.k_max"))
      d.k_max = static_cast<int>(integer_field(*v, "diagnose.k_max"));
    if (const toml::Value* v = find(t, "diagnose.series_cap"))
      d.series_cap = static_cast<long>(integer_field(*v, "diagnose.series_cap"));
    if (const toml::Value* v = find(t, "diagnose.p_exponent")) {
      if (v->type == toml::Value::Type::string) {
        if (v->s != "inf")
          throw ConfigError("diagnose.p_exponent must be a number or \"inf\"");
        d.p_exponent = std::numeric_limits<double>::infinity();
      } else {
        d.p_exponent = v->as_number();
      }
    }
    if (const toml::Value* v = find(t, "diagnose.start_state"))
      d.start_state = static_cast<int>(integer_field(*v, "diagnose.start_state"));
    if (!(d.eps > 0.0)) throw ConfigError("diagnose.eps must be positive");
    if (d.m_grid.empty() || d.n_grid.empty())
      throw ConfigError("diagnose grids must be nonempty");
    if (d.count < 1) throw ConfigError("diagnose.count must be >= 1");
    if (d.k_max < 1) throw ConfigError("diagnose.k_max must be >= 1");
    if (d.series_cap < 1) throw ConfigError("diagnose.series_cap must be >= 1");
    if (!std::isinf(d.p_exponent) && d.p_exponent < 2.0)
      throw ConfigError("diagnose.p_exponent must be >= 2 (or \"inf\")");
  }

  // [counterexample]
  {
    reject_unknown(t, "counterexample", {"K", "count"});
    CounterexampleSpec& c = cfg.counterexample;
    if (const toml::Value* v = find(t, "counterexample.K"))
      c.K = static_cast<int>(integer_field(*v, "counterexample.K"));
    if (const toml::Value* v = find(t, "counterexample.count"))
      c.count = static_cast<long>(integer_field(*v, "counterexample.count"));
  }

  // Catch stray top-level keys (typos); sections were handled above.
  for (const auto& [key, value] : t) {
    if (key.find('.') != std::string::npos) continue;
    if (key != "seed" && key != "threads" && key != "out_dir")
      throw ConfigError("unknown top-level key: " + key);
  }

  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(io::read_text_file(path));
}

MarkovKernel realize_kernel(const ExperimentConfig& config) {
  if (!config.kernel_set) throw ConfigError("config defines no [kernel]");
  const KernelSpec& k = config.kernel;
  switch (k.source) {
    case KernelSpec::Source::rows:
      return build_kernel(k.rows, k.labels);
    case KernelSpec::Source::file: {
      const io::Json j =
          io::Json::parse(io::read_text_file(k.file), nullptr, false);
      if (j.is_discarded())
        throw ConfigError("kernel file is not valid JSON: " + k.file);
      return io::kernel_from_json(j);
    }
    case KernelSpec::Source::builder: {
      auto param = [&](const std::string& name) {
        auto it = k.params.find(name);
        if (it == k.params.end())
          throw ConfigError("kernel builder \"" + k.builder +
                            "\" needs parameter " + name);
        return it->second;
      };
      if (k.builder == "two_state") {
        const double p = param("p"), q = param("q");
        if (!(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0))
          throw ConfigError("two_state builder needs p, q in (0, 1)");
        return build_kernel({{1.0 - p, p}, {q, 1.0 - q}}, k.labels);
      }
      if (k.builder == "random_walk") {
        if (k.rows.empty())
          throw ConfigError("random_walk builder needs rows = weight table");
        const double hold =
            k.params.count("hold") ? k.params.at("hold") : 0.0;
        return random_walk_kernel(k.rows, hold);
      }
      if (k.builder == "metropolis") {
        if (k.rows.empty() || k.target.empty())
          throw ConfigError(
              "metropolis builder needs rows = proposal table and target");
        return metropolis_kernel(k.target, k.rows);
      }
      if (k.builder == "lazy") {
        if (k.rows.empty())
          throw ConfigError("lazy builder needs rows = base table");
        return lazy(build_kernel(k.rows, k.labels), param("hold"));
      }
      throw ConfigError("unknown kernel builder: " + k.builder);
    }
  }
  throw ConfigError("kernel source not recognized");
}

Observable realize_observable(const ExperimentConfig& config,
                              const MarkovKernel& kernel) {
  if (!config.observable_set)
    throw ConfigError("config defines no [observable]");
  const ObservableSpec& o = config.observable;
  switch (o.source) {
    case ObservableSpec::Source::values:
      return make_observable(kernel, o.values);
    case ObservableSpec::Source::file: {
      const io::Json j =
          io::Json::parse(io::read_text_file(o.file), nullptr, false);
      if (j.is_discarded())
        throw ConfigError("observable file is not valid JSON: " + o.file);
      return make_observable(kernel, io::doubles_from_json(j));
    }
    case ObservableSpec::Source::builder: {
      if (o.builder == "indicator") {
        auto it = o.params.find("state");
        if (it == o.params.end())
          throw ConfigError("indicator builder needs parameter state");
        const int s = static_cast<int>(it->second);
        if (s < 0 || s >= kernel.size())
          throw ConfigError("indicator state out of range");
        std::vector<double> v(static_cast<std::size_t>(kernel.size()), 0.0);
        v[static_cast<std::size_t>(s)] = 1.0;
        return make_observable(kernel, v);
      }
      throw ConfigError("unknown observable builder: " + o.builder);
    }
  }
  throw ConfigError("observable source not recognized");
}

io::Json config_json(const ExperimentConfig& config) {
  io::Json j;
  j["seed"] = config.seed;

  if (config.kernel_set) {
    io::Json k;
    switch (config.kernel.source) {
      case KernelSpec::Source::rows: k["rows"] = config.kernel.rows; break;
      case KernelSpec::Source::file: k["file"] = config.kernel.file; break;
      case KernelSpec::Source::builder:
        k["builder"] = config.kernel.builder;
        if (!config.kernel.rows.empty()) k["rows"] = config.kernel.rows;
        if (!config.kernel.target.empty()) k["target"] = config.kernel.target;
        break;
    }
    if (!config.kernel.labels.empty()) k["labels"] = config.kernel.labels;
    if (!config.kernel.params.empty()) k["params"] = config.kernel.params;
    j["kernel"] = std::move(k);
  }

  if (config.observable_set) {
    io::Json o;
    switch (config.observable.source) {
      case ObservableSpec::Source::values:
        o["values"] = config.observable.values;
        break;
      case ObservableSpec::Source::file:
        o["file"] = config.observable.file;
        break;
      case ObservableSpec::Source::builder:
        o["builder"] = config.observable.builder;
        break;
    }
    if (!config.observable.params.empty())
      o["params"] = config.observable.params;
    j["observable"] = std::move(o);
  }

  {
    io::Json s;
    s["n_grid"] = config.simulate.n_grid;
    s["count"] = config.simulate.count;
    s["m_grid"] = config.simulate.m_grid;
    s["quenched"] = config.simulate.quenched;
    s["annealed"] = config.simulate.annealed;
    s["start_states"] = config.simulate.start_states;
    s["time_grid"] = config.simulate.time_grid;
    j["simulate"] = std::move(s);
  }
  {
    io::Json d;
    d["conditions"] = config.diagnose.conditions;
    d["eps"] = config.diagnose.eps;
    d["m_grid"] = config.diagnose.m_grid;
    d["n_grid"] = config.diagnose.n_grid;
    d["count"] = config.diagnose.count;
    d["k_max"] = config.diagnose.k_max;
    d["series_cap"] = config.diagnose.series_cap;
    d["p_exponent"] = std::isinf(config.diagnose.p_exponent)
                          ? io::Json("inf")
                          : io::Json(config.diagnose.p_exponent);
    d["start_state"] = config.diagnose.start_state;
    j["diagnose"] = std::move(d);
  }
  {
    io::Json c;
    c["K"] = config.counterexample.K;
    c["count"] = config.counterexample.count;
    j["counterexample"] = std::move(c);
  }
  return j;
}

std::string config_digest(const ExperimentConfig& config) {
  const std::string bytes = config_json(config).dump();
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

io::Json RunManifest::to_json() const {
  io::Json j;
  j["artifact_version"] = kArtifactVersion;
  j["command"] = command;
  j["config_digest"] = config_digest;
  j["seed"] = seed;
  j["threads"] = threads;
  io::Json steps = io::Json::array();
  for (const auto& [name, ms] : timings_ms) {
    io::Json step;
    step["step"] = name;
    step["ms"] = ms;
    steps.push_back(std::move(step));
  }
  j["timings_ms"] = std::move(steps);
  j["verdicts"] = verdicts;
  j["exit_code"] = exit_code;
  return j;
}

}  // namespace qclt
