#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "rotorkick/errors.hpp"

namespace rotorkick {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace detail

// FNV-1a over raw bytes; used to stamp outputs with the config they came from.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Plain-text `key = value` file: one key per line, '#' starts a comment,
// blank lines ignored. No nesting. Keys are consumed by the typed getters
// so that leftover (misspelled) keys can be rejected afterwards.
class KeyValueFile {
 public:
  static KeyValueFile parse_text(const std::string& text,
                                 const std::string& origin = "<text>") {
    KeyValueFile kv;
    kv.text_ = text;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected `key = value`, got `" + line + "`");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": duplicate key `" + key + "`");
      kv.values_[key] = value;
    }
    return kv;
  }

  static KeyValueFile parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open `" + path + "`");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError(origin_ + ": missing required key `" + key + "`");
    consumed_.insert(key);
    return it->second;
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) {
    return to_double(key, get_string(key));
  }

  double get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
  }

  int get_int(const std::string& key) {
    const std::string raw = get_string(key);
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(raw, &pos);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key `" + key + "`: not an integer: `" + raw + "`");
    }
    if (pos != raw.size())
      throw ConfigError(origin_ + ": key `" + key + "`: trailing junk in `" + raw + "`");
    return v;
  }

  int get_int(const std::string& key, int fallback) {
    return has(key) ? get_int(key) : fallback;
  }

  bool get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const std::string raw = get_string(key);
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError(origin_ + ": key `" + key + "`: not a boolean: `" + raw + "`");
  }

  // Call after all expected keys are read.
  void reject_unknown_keys() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
      if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty())
      throw ConfigError(origin_ + ": unknown key(s): " + unknown);
  }

  const std::string& text() const { return text_; }
  const std::string& origin() const { return origin_; }
  std::uint64_t hash() const { return fnv1a64(text_); }

 private:
  double to_double(const std::string& key, const std::string& raw) const {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(raw, &pos);
    } catch (const std::exception&) {
      throw ConfigError(origin_ + ": key `" + key + "`: not a number: `" + raw + "`");
    }
    if (pos != raw.size())
      throw ConfigError(origin_ + ": key `" + key + "`: trailing junk in `" + raw + "`");
    return v;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::string text_;
  std::string origin_;
};

}  // namespace rotorkick
