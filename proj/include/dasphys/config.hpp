#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dasphys {

// Line-oriented `key = value [value...]` document. `#` starts a comment; keys
// are dotted paths such as `shake.A1`. Values are whitespace-separated tokens.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::string& path);

  bool contains(const std::string& key) const { return entries_.count(key) != 0; }
  const std::vector<std::string>& tokens(const std::string& key) const;

  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::pair<double, double> range(const std::string& key, std::pair<double, double> fallback) const;

  void set(const std::string& key, std::vector<std::string> values);
  const std::map<std::string, std::vector<std::string>>& entries() const { return entries_; }

  // Rejects keys outside `known` (each entry either an exact key or a prefix
  // ending in '.').
  void require_known(const std::vector<std::string>& known) const;

  std::string serialize() const;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

}  // namespace dasphys
