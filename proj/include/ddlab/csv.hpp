// RFC-4180 CSV output with deterministic number formatting (shortest
// round-trippable decimal via %.17g on a fixed locale-independent path).
#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ddlab {

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  using Field = std::variant<std::string, double, long>;

  CsvWriter(const std::string& path, std::vector<std::string> header) : out_(path) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    columns_ = header.size();
    bool first = true;
    for (const auto& h : header) {
      if (!first) out_ << ',';
      out_ << quote(h);
      first = false;
    }
    out_ << "\r\n";
  }

  void row(std::initializer_list<Field> fields) { row(std::vector<Field>(fields)); }

  void row(const std::vector<Field>& fields) {
    if (fields.size() != columns_) throw std::runtime_error("CsvWriter: column count mismatch");
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      if (std::holds_alternative<std::string>(f))
        out_ << quote(std::get<std::string>(f));
      else if (std::holds_alternative<double>(f))
        out_ << format_double(std::get<double>(f));
      else
        out_ << std::get<long>(f);
      first = false;
    }
    out_ << "\r\n";
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  }

  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace ddlab
