#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gensql {

// Half-open byte range into the original query text.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool known() const { return end > begin || begin != 0; }
  static Span join(const Span& a, const Span& b) {
    if (!a.known()) return b;
    if (!b.known()) return a;
    return Span{a.begin < b.begin ? a.begin : b.begin, a.end > b.end ? a.end : b.end};
  }
};

// 1-based line/column for diagnostics.
inline std::pair<int, int> line_col(const std::string& text, std::size_t offset) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

enum class Stage { Parse, Type, Normalize, Safety, Lower, Eval, Io };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Parse: return "parse";
    case Stage::Type: return "type";
    case Stage::Normalize: return "normalize";
    case Stage::Safety: return "safety";
    case Stage::Lower: return "lower";
    case Stage::Eval: return "eval";
    case Stage::Io: return "io";
  }
  return "?";
}

class Error : public std::runtime_error {
 public:
  Error(Stage stage, std::string rule, std::string message, Span span = {})
      : std::runtime_error(message), stage_(stage), rule_(std::move(rule)), span_(span) {}

  Stage stage() const { return stage_; }
  const std::string& rule() const { return rule_; }
  const Span& span() const { return span_; }

  std::string render(const std::string& source) const {
    std::string out = stage_name(stage_);
    out += " error";
    if (!rule_.empty()) out += " [" + rule_ + "]";
    if (span_.known() && !source.empty()) {
      auto [line, col] = line_col(source, span_.begin);
      out += " at " + std::to_string(line) + ":" + std::to_string(col);
    }
    out += ": ";
    out += what();
    return out;
  }

 private:
  Stage stage_;
  std::string rule_;
  Span span_;
};

struct ParseError : Error {
  ParseError(std::string message, Span span)
      : Error(Stage::Parse, "syntax", std::move(message), span) {}
};

struct TypeError : Error {
  TypeError(std::string rule, std::string message, Span span)
      : Error(Stage::Type, std::move(rule), std::move(message), span) {}
};

struct EvalError : Error {
  EvalError(std::string rule, std::string message, Span span = {})
      : Error(Stage::Eval, std::move(rule), std::move(message), span) {}
};

struct IoError : Error {
  explicit IoError(std::string message) : Error(Stage::Io, "io", std::move(message)) {}
};

// Non-fatal messages (dropped conjuncts, unsafe queries, ...). Collected by the
// pipeline and rendered by the CLI.
struct Diagnostic {
  enum class Severity { Warning, Note };
  Severity severity = Severity::Warning;
  std::string message;
  Span span;
};

using Diagnostics = std::vector<Diagnostic>;

inline void warn(Diagnostics& sink, std::string message, Span span = {}) {
  sink.push_back(Diagnostic{Diagnostic::Severity::Warning, std::move(message), span});
}

}  // namespace gensql
