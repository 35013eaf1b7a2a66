#include "config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "memscope/error.hpp"

namespace memscope::cli {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::uint64_t parse_bytes(const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr == t.data()) throw ConfigError("not a byte count: '" + text + "'");
  std::string suffix = trim(std::string(ptr, t.data() + t.size()));
  for (auto& c : suffix) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (suffix.empty() || suffix == "B") return value;
  if (suffix == "K" || suffix == "KB" || suffix == "KIB") return value << 10;
  if (suffix == "M" || suffix == "MB" || suffix == "MIB") return value << 20;
  if (suffix == "G" || suffix == "GB" || suffix == "GIB") return value << 30;
  throw ConfigError("unknown size suffix in '" + text + "'");
}

namespace {

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    auto where = [&] { return name + ":" + std::to_string(lineno) + ": "; };
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where() + "empty section name");
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where() + "empty key");
    std::string value = unquote(trim(line.substr(eq + 1)));
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse(in, path.string());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::optional<std::string> Config::take(const std::string& key) {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string Config::str(const std::string& key, const std::string& def) {
  auto v = take(key).value_or(def);
  record(key, v);
  return v;
}

std::optional<std::string> Config::opt_str(const std::string& key) {
  auto v = take(key);
  if (v) record(key, *v);
  return v;
}

double Config::num(const std::string& key, double def) {
  auto v = take(key);
  if (!v) {
    record(key, nlohmann::json(def).dump());
    return def;
  }
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    record(key, *v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + *v + "'");
  }
}

std::uint64_t Config::u64(const std::string& key, std::uint64_t def) {
  auto v = opt_u64(key);
  if (!v) {
    record(key, std::to_string(def));
    return def;
  }
  return *v;
}

std::optional<std::uint64_t> Config::opt_u64(const std::string& key) {
  auto v = take(key);
  if (!v) return std::nullopt;
  std::uint64_t out = 0;
  int base = 10;
  std::string t = *v;
  if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
    t = t.substr(2);
    base = 16;
  }
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out, base);
  if (ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + *v + "'");
  record(key, *v);
  return out;
}

bool Config::flag(const std::string& key, bool def) {
  auto v = take(key);
  if (!v) {
    record(key, def ? "true" : "false");
    return def;
  }
  if (*v == "true" || *v == "1" || *v == "yes") {
    record(key, "true");
    return true;
  }
  if (*v == "false" || *v == "0" || *v == "no") {
    record(key, "false");
    return false;
  }
  throw ConfigError("'" + key + "' expects true or false, got '" + *v + "'");
}

std::uint64_t Config::bytes(const std::string& key, std::uint64_t def) {
  auto v = take(key);
  if (!v) {
    record(key, std::to_string(def));
    return def;
  }
  try {
    auto b = parse_bytes(*v);
    record(key, *v);
    return b;
  } catch (const ConfigError& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

std::vector<std::string> Config::list(const std::string& key, const std::vector<std::string>& def) {
  auto v = take(key);
  std::vector<std::string> out = v ? split(*v, ',') : def;
  std::string joined;
  for (std::size_t i = 0; i < out.size(); ++i) joined += (i ? "," : "") + out[i];
  record(key, joined);
  return out;
}

std::vector<std::string> Config::subsections(const std::string& prefix) const {
  std::set<std::string> names;
  const std::string p = prefix + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(p, 0) != 0) continue;
    auto rest = key.substr(p.size());
    auto dot = rest.rfind('.');
    if (dot != std::string::npos) names.insert(rest.substr(0, dot));
  }
  return {names.begin(), names.end()};
}

void Config::reject_unknown() const {
  auto top = [](const std::string& key) { return key.substr(0, key.find('.')); };
  std::set<std::string> read;
  for (const auto& [key, value] : used_) read.insert(top(key));
  std::string unknown;
  for (const auto& [key, value] : values_)
    if (!used_.count(key) && read.count(top(key))) unknown += (unknown.empty() ? "" : ", ") + key;
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
}

std::string Config::echo() const {
  std::map<std::string, std::map<std::string, std::string>> grouped;
  for (const auto& [key, value] : used_) {
    auto dot = key.rfind('.');
    if (dot == std::string::npos)
      grouped[""][key] = value;
    else
      grouped[key.substr(0, dot)][key.substr(dot + 1)] = value;
  }
  std::ostringstream os;
  bool first = true;
  for (const auto& [section, kv] : grouped) {
    if (!section.empty()) {
      if (!first) os << '\n';
      os << '[' << section << "]\n";
    }
    first = false;
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
  }
  return os.str();
}

}  // namespace memscope::cli
