#include "rftlab/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rftlab/csvio.hpp"

namespace rftlab::config {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  // '#' starts a comment unless inside a quoted string.
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str());
}

KeyValueFile KeyValueFile::parse_string(const std::string& text) {
  KeyValueFile kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ParseError("config line " + std::to_string(lineno) + ": unterminated section");
      }
      section = trim(line.substr(1, line.size() - 2));
      kv.sections_[section];
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(lineno) + ": empty key");
    }
    kv.sections_[section][key] = value;
  }
  return kv;
}

bool KeyValueFile::has(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

bool KeyValueFile::has_section(const std::string& section) const {
  return sections_.count(section) > 0;
}

std::vector<std::string> KeyValueFile::section_keys(const std::string& section) const {
  std::vector<std::string> keys;
  auto s = sections_.find(section);
  if (s != sections_.end()) {
    for (const auto& [k, v] : s->second) keys.push_back(k);
  }
  return keys;
}

const std::string& KeyValueFile::raw(const std::string& section, const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end() || s->second.count(key) == 0) {
    throw ParseError("config: missing key '" + key + "' in section '" + section + "'");
  }
  return s->second.at(key);
}

std::string KeyValueFile::get_string(const std::string& section, const std::string& key) const {
  return unquote(raw(section, key));
}

long KeyValueFile::get_int(const std::string& section, const std::string& key) const {
  const std::string& v = raw(section, key);
  try {
    std::size_t pos = 0;
    long out = std::stol(v, &pos);
    if (pos != v.size()) throw ParseError("");
    return out;
  } catch (...) {
    throw ParseError("config: key '" + key + "' is not an integer: " + v);
  }
}

double KeyValueFile::get_real(const std::string& section, const std::string& key) const {
  const std::string& v = raw(section, key);
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw ParseError("");
    return out;
  } catch (...) {
    throw ParseError("config: key '" + key + "' is not a real: " + v);
  }
}

bool KeyValueFile::get_bool(const std::string& section, const std::string& key) const {
  const std::string& v = raw(section, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseError("config: key '" + key + "' is not a bool: " + v);
}

std::vector<std::string> KeyValueFile::get_list(const std::string& section,
                                                const std::string& key) const {
  const std::string& v = raw(section, key);
  if (v.size() < 2 || v.front() != '[' || v.back() != ']') {
    throw ParseError("config: key '" + key + "' is not a list: " + v);
  }
  std::vector<std::string> out;
  for (const std::string& item : csv::split_line(v.substr(1, v.size() - 2))) {
    std::string t = trim(item);
    if (!t.empty()) out.push_back(unquote(t));
  }
  return out;
}

std::vector<long> KeyValueFile::get_int_list(const std::string& section,
                                             const std::string& key) const {
  std::vector<long> out;
  for (const std::string& item : get_list(section, key)) {
    try {
      out.push_back(std::stol(item));
    } catch (...) {
      throw ParseError("config: list '" + key + "' has non-integer item: " + item);
    }
  }
  return out;
}

std::string KeyValueFile::get_string_or(const std::string& section, const std::string& key,
                                        const std::string& fallback) const {
  return has(section, key) ? get_string(section, key) : fallback;
}

long KeyValueFile::get_int_or(const std::string& section, const std::string& key,
                              long fallback) const {
  return has(section, key) ? get_int(section, key) : fallback;
}

double KeyValueFile::get_real_or(const std::string& section, const std::string& key,
                                 double fallback) const {
  return has(section, key) ? get_real(section, key) : fallback;
}

bool KeyValueFile::get_bool_or(const std::string& section, const std::string& key,
                               bool fallback) const {
  return has(section, key) ? get_bool(section, key) : fallback;
}

void KeyValueFile::set(const std::string& section, const std::string& key,
                       const std::string& value) {
  sections_[section][key] = value;
}

void KeyValueFile::set_real(const std::string& section, const std::string& key, double value) {
  set(section, key, csv::format_real(value));
}

void KeyValueFile::set_int(const std::string& section, const std::string& key, long value) {
  set(section, key, std::to_string(value));
}

void KeyValueFile::set_bool(const std::string& section, const std::string& key, bool value) {
  set(section, key, value ? "true" : "false");
}

void KeyValueFile::set_list(const std::string& section, const std::string& key,
                            const std::vector<std::string>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += values[i];
  }
  out += "]";
  set(section, key, out);
}

std::string KeyValueFile::serialize() const {
  // std::map keeps sections and keys sorted: canonical bytes.
  std::string out;
  auto emit_section = [&out](const std::map<std::string, std::string>& entries) {
    for (const auto& [k, v] : entries) {
      out += k;
      out += " = ";
      out += v;
      out += "\n";
    }
  };
  if (auto top = sections_.find(""); top != sections_.end()) emit_section(top->second);
  for (const auto& [name, entries] : sections_) {
    if (name.empty()) continue;
    out += "\n[" + name + "]\n";
    emit_section(entries);
  }
  return out;
}

void KeyValueFile::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("config: cannot write " + path);
  out << serialize();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rftlab::config
