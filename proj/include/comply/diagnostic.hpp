// comply/diagnostic.hpp - Positioned parse and validation diagnostics
#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace comply
{

struct SourcePos
{
  int line = 0;    // 1-based; 0 means "no position"
  int column = 0;  // 1-based

  friend bool operator==(const SourcePos &, const SourcePos &) = default;
};

enum class Severity { error, warning };

struct Diagnostic
{
  Severity severity = Severity::error;
  std::string file;
  SourcePos pos;
  std::string message;

  friend bool operator==(const Diagnostic &, const Diagnostic &) = default;
};

inline std::string format_diagnostic(const Diagnostic & d)
{
  std::string out = d.file.empty() ? std::string("<input>") : d.file;
  out += ':' + std::to_string(d.pos.line) + ':' + std::to_string(d.pos.column) + ": ";
  out += d.severity == Severity::error ? "error: " : "warning: ";
  out += d.message;
  return out;
}

inline std::ostream & operator<<(std::ostream & os, const Diagnostic & d)
{
  return os << format_diagnostic(d);
}

inline bool has_errors(const std::vector<Diagnostic> & diags)
{
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic & d) {
    return d.severity == Severity::error;
  });
}

/// Either a value (possibly with warnings) or a non-empty set of errors, never both.
template <class T>
struct ParseResult
{
  std::optional<T> value;
  std::vector<Diagnostic> diagnostics;

  bool ok() const { return value.has_value(); }
};

}  // namespace comply
