#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace reluspec {

/// Flat key=value configuration. Lines starting with '#' and blank lines are
/// ignored. Every entry remembers where it came from so type errors can name
/// the file and line.
class Config {
 public:
  struct Entry {
    std::string value;
    std::string origin;  // "file:line" or "override"
  };

  static Config parse(std::string_view text, const std::string& source = "<string>");
  /// Reads a flat config file, or the "config" object of a run manifest when
  /// the file is JSON.
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value, const std::string& origin = "override");
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<long long> get_int_list(const std::string& key, const std::vector<long long>& fallback) const;
  std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

  /// Raises kConfig naming the first key not in `known`.
  void check_known(const std::set<std::string>& known) const;

  /// Sorted "key=value" lines.
  std::string canonical() const;

 private:
  [[noreturn]] void bad_value(const std::string& key, const std::string& expected) const;
  std::map<std::string, Entry> entries_;
};

/// Git blob hash: SHA-1 over "blob <size>\0" followed by the content.
std::string git_blob_sha1(std::string_view content);

}  // namespace reluspec
