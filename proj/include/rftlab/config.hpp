#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rftlab::config {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value file with one level of named sections:
///
///   # comment
///   key = value            top-level entry
///   [section]
///   key = value            entry in `section`
///
/// Values are scalars (int, real, bool, string) or lists like [a, b, c].
/// Serialization is canonical (sorted sections and keys), so identical
/// configurations produce identical bytes.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::vector<std::string> section_keys(const std::string& section) const;
  bool has_section(const std::string& section) const;

  // Typed getters throw ParseError on missing keys or malformed values.
  std::string get_string(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key) const;
  double get_real(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_list(const std::string& section, const std::string& key) const;
  std::vector<long> get_int_list(const std::string& section, const std::string& key) const;

  // Defaulted variants.
  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  long get_int_or(const std::string& section, const std::string& key, long fallback) const;
  double get_real_or(const std::string& section, const std::string& key, double fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);
  void set_real(const std::string& section, const std::string& key, double value);
  void set_int(const std::string& section, const std::string& key, long value);
  void set_bool(const std::string& section, const std::string& key, bool value);
  void set_list(const std::string& section, const std::string& key,
                const std::vector<std::string>& values);

  std::string serialize() const;
  void write_file(const std::string& path) const;

 private:
  const std::string& raw(const std::string& section, const std::string& key) const;

  // section -> key -> raw value; "" is the top-level section.
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// FNV-1a over a canonical string; used for config identity.
std::uint64_t fnv1a(const std::string& text);
std::string hash_hex(std::uint64_t h);

}  // namespace rftlab::config
