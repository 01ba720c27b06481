#include "reluspec/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <boost/uuid/detail/sha1.hpp>
#include <json.hpp>

#include "reluspec/error.hpp"

namespace reluspec {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool parse_ll(const std::string& s, long long& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtoll(s.c_str(), &end, 10);
  if (errno == 0 && *end == '\0') return true;
  // Accept integral scientific notation such as 1e5.
  const double d = std::strtod(s.c_str(), &end);
  if (*end != '\0' || !std::isfinite(d) || d != std::floor(d) || std::abs(d) > 9e18) return false;
  out = static_cast<long long>(d);
  return true;
}

bool parse_d(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return *end == '\0' && std::isfinite(out);
}

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  Config c;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno);
    require(eq != std::string::npos, ErrorCode::kConfig, where + ": expected key=value, got '" + t + "'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    require(valid_key(key), ErrorCode::kConfig, where + ": invalid key '" + key + "'");
    require(!c.has(key), ErrorCode::kConfig,
            where + ": duplicate key '" + key + "' (first set at " + (c.has(key) ? c.entries_.at(key).origin : "") + ")");
    c.entries_[key] = Entry{value, where};
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kConfig, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::kConfig, path.string() + ": invalid manifest JSON: " + e.what());
    }
    require(j.contains("config") && j["config"].is_object(), ErrorCode::kConfig,
            path.string() + ": manifest has no \"config\" object");
    Config c;
    for (const auto& [k, v] : j["config"].items()) {
      require(v.is_string(), ErrorCode::kConfig, path.string() + ": manifest value for '" + k + "' is not a string");
      c.entries_[k] = Entry{v.get<std::string>(), path.string() + ":config." + k};
    }
    return c;
  }
  return parse(text, path.string());
}

void Config::set(const std::string& key, const std::string& value, const std::string& origin) {
  require(valid_key(key), ErrorCode::kConfig, origin + ": invalid key '" + key + "'");
  entries_[key] = Entry{trim(value), origin};
}

void Config::bad_value(const std::string& key, const std::string& expected) const {
  const Entry& e = entries_.at(key);
  fail(ErrorCode::kConfig, e.origin + ": field '" + key + "' expects " + expected + ", got '" + e.value + "'");
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  long long v;
  if (!parse_ll(it->second.value, v)) bad_value(key, "an integer");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  double v;
  if (!parse_d(it->second.value, v)) bad_value(key, "a finite number");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second.value;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, "a boolean (true/false)");
}

std::vector<long long> Config::get_int_list(const std::string& key, const std::vector<long long>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<long long> out;
  for (const auto& item : split_list(it->second.value)) {
    long long v;
    if (!parse_ll(item, v)) bad_value(key, "a comma-separated list of integers");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, "a non-empty list");
  return out;
}

std::vector<double> Config::get_double_list(const std::string& key, const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(it->second.value)) {
    double v;
    if (!parse_d(item, v)) bad_value(key, "a comma-separated list of numbers");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, "a non-empty list");
  return out;
}

void Config::check_known(const std::set<std::string>& known) const {
  for (const auto& [k, e] : entries_) {
    require(known.count(k) != 0, ErrorCode::kConfig, e.origin + ": unknown field '" + k + "'");
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + "=" + e.value + "\n";
  return out;
}

std::string git_blob_sha1(std::string_view content) {
  boost::uuids::detail::sha1 h;
  const std::string prefix = "blob " + std::to_string(content.size()) + '\0';
  h.process_bytes(prefix.data(), prefix.size());
  h.process_bytes(content.data(), content.size());
  boost::uuids::detail::sha1::digest_type digest;
  h.get_digest(digest);
  char buf[41];
  for (int i = 0; i < 5; ++i) std::snprintf(buf + 8 * i, 9, "%08x", digest[i]);
  return std::string(buf, 40);
}

}  // namespace reluspec
