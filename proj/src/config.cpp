#include "tcn/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace tcn {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path);
}

Config Config::from_string(const std::string& text, const std::string& origin) {
  Config cfg;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      check(t.back() == ']', "config: " + origin + ":" + std::to_string(line_no) +
                                 ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      check(!section.empty(), "config: " + origin + ":" + std::to_string(line_no) +
                                  ": empty section name");
      continue;
    }
    auto eq = t.find('=');
    check(eq != std::string::npos, "config: " + origin + ":" + std::to_string(line_no) +
                                       ": expected key=value, got '" + t + "'");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    check(!key.empty(), "config: " + origin + ":" + std::to_string(line_no) + ": empty key");
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

void Config::set(const std::string& dotted_key, const std::string& value) {
  check(!dotted_key.empty(), "config: empty key");
  values_[dotted_key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::get_required(const std::string& key) const {
  auto it = values_.find(key);
  check(it != values_.end(), "config: missing required key '" + key + "'");
  return it->second;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    int64_t v = std::stoll(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (const std::exception&) {
    fail("config: key '" + key + "' is not an integer: '" + it->second + "'");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    double v = std::stod(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (const std::exception&) {
    fail("config: key '" + key + "' is not a number: '" + it->second + "'");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail("config: key '" + key + "' is not a boolean: '" + v + "'");
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    size_t pos = 0;
    uint64_t v = std::stoull(it->second, &pos);
    check(pos == it->second.size(), "");
    return v;
  } catch (const std::exception&) {
    fail("config: key '" + key + "' is not an unsigned integer: '" + it->second + "'");
  }
}

void Config::apply_overrides(const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    auto eq = o.find('=');
    check(eq != std::string::npos && eq > 0,
          "config override must look like section.key=value, got '" + o + "'");
    set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

std::string Config::canonical() const {
  // Sectionless keys first so a re-parse never mis-attributes them, then the
  // sorted map groups each section's keys contiguously.
  std::ostringstream os;
  for (const auto& [key, value] : values_)
    if (key.find('.') == std::string::npos) os << key << " = " << value << "\n";
  std::string current_section;
  for (const auto& [key, value] : values_) {
    auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    std::string section = key.substr(0, dot);
    if (section != current_section) {
      os << "[" << section << "]\n";
      current_section = section;
    }
    os << key.substr(dot + 1) << " = " << value << "\n";
  }
  return os.str();
}

void Config::write(const std::string& path) const {
  std::ofstream out(path);
  check(out.good(), "config: cannot write '" + path + "'");
  out << "# config hash " << hex64(hash()) << "\n" << canonical();
  check(out.good(), "config: write to '" + path + "' failed");
}

}  // namespace tcn
