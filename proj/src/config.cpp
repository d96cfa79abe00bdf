#include "dasphys/config.hpp"

#include <fstream>
#include <sstream>

#include "dasphys/error.hpp"

namespace dasphys {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_number(const std::string& key, const std::string& token) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::config, "key '" + key + "': '" + token + "' is not a number");
  }
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": empty key");
    std::istringstream values(line.substr(eq + 1));
    std::vector<std::string> tokens;
    for (std::string tok; values >> tok;) tokens.push_back(tok);
    if (tokens.empty()) {
      throw Error(ErrorKind::config, "line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    }
    cfg.entries_[key] = std::move(tokens);
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::vector<std::string>& KeyValueConfig::tokens(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorKind::config, "missing key '" + key + "'");
  return it->second;
}

double KeyValueConfig::number(const std::string& key, double fallback) const {
  if (!contains(key)) return fallback;
  const auto& t = tokens(key);
  if (t.size() != 1) throw Error(ErrorKind::config, "key '" + key + "' expects one number");
  return to_number(key, t[0]);
}

std::size_t KeyValueConfig::count(const std::string& key, std::size_t fallback) const {
  if (!contains(key)) return fallback;
  const double v = number(key, 0.0);
  if (v < 0.0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    throw Error(ErrorKind::config, "key '" + key + "' expects a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

std::string KeyValueConfig::text(const std::string& key, const std::string& fallback) const {
  if (!contains(key)) return fallback;
  const auto& t = tokens(key);
  if (t.size() != 1) throw Error(ErrorKind::config, "key '" + key + "' expects one token");
  return t[0];
}

std::pair<double, double> KeyValueConfig::range(const std::string& key,
                                                 std::pair<double, double> fallback) const {
  if (!contains(key)) return fallback;
  const auto& t = tokens(key);
  if (t.size() == 1) {
    const double v = to_number(key, t[0]);
    return {v, v};
  }
  if (t.size() != 2) throw Error(ErrorKind::config, "key '" + key + "' expects 'lo hi'");
  const double lo = to_number(key, t[0]);
  const double hi = to_number(key, t[1]);
  if (hi < lo) throw Error(ErrorKind::config, "key '" + key + "': range upper bound below lower");
  return {lo, hi};
}

void KeyValueConfig::set(const std::string& key, std::vector<std::string> values) {
  entries_[key] = std::move(values);
}

void KeyValueConfig::require_known(const std::vector<std::string>& known) const {
  for (const auto& [key, value] : entries_) {
    bool ok = false;
    for (const auto& k : known) {
      if (k == key || (!k.empty() && k.back() == '.' && key.rfind(k, 0) == 0)) {
        ok = true;
        break;
      }
    }
    if (!ok) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
  }
}

std::string KeyValueConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [key, values] : entries_) {
    out << key << " =";
    for (const auto& v : values) out << ' ' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace dasphys
