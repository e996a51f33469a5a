#pragma once

// `key = value` text files used for device and geometry descriptions.
// One pair per line, `#` starts a comment, unknown or repeated keys are errors.

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "squidstore/quantum.hpp"

namespace squidstore {

class FormatError : public Error {
 public:
  FormatError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

inline std::map<std::string, double> parse_key_values(std::string_view text,
                                                      const std::set<std::string>& allowed) {
  std::map<std::string, double> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw FormatError("expected `key = value`", line_no);
    const std::string key(trim(line.substr(0, eq)));
    if (!allowed.contains(key)) throw FormatError("unknown key `" + key + "`", line_no);
    if (out.contains(key)) throw FormatError("duplicate key `" + key + "`", line_no);
    double v = 0.0;
    if (!parse_double(line.substr(eq + 1), v))
      throw FormatError("invalid number for `" + key + "`", line_no);
    out.emplace(key, v);
  }
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open `" + path + "`");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace squidstore
