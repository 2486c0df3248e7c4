#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "causalkit/scm.hpp"

namespace causalkit {

// Model files (.scm.txt) are a list of declarations:
//
//   var NAME [":" domain] ("~" dist | ":=" expr | "cpt" rows) ";"
//
//   domain  :=  "{" value ("," value)* "}"  |  "real"
//   dist    :=  normal(mean, std) | bernoulli(p) | uniform(v1, ..., vk)
//             | point(v)
//   expr    :=  arithmetic over parent names, literals and at most one
//               inline dist call (the noise term); operators + - * / unary -,
//               comparisons < <= > >= == != (yielding 0/1), min/max/indicator
//   rows    :=  ("|" [NAME "=" value ("," NAME "=" value)*] "->"
//                prob ("," prob)*)+        one row per parent assignment,
//                                          probs aligned with the domain
//
// '#' starts a comment running to end of line. Identifiers may end in
// apostrophes (v', x''). Parents are inferred from mechanism references;
// there is no edges block, and one is rejected if present.
struct SourceSpan {
  int line = 1, col = 1;          // 1-based, inclusive
  int end_line = 1, end_col = 1;  // inclusive position of the last character
};

struct ParseError {
  // One of: syntax, unknown-symbol, duplicate-definition, domain-mismatch,
  // cpt-shape.
  std::string kind;
  std::string message;
  SourceSpan span;
};

struct ParseResult {
  std::optional<Scm> scm;  // set iff errors.empty()
  std::vector<ParseError> errors;
  bool ok() const { return scm.has_value(); }
};

// Never throws on bad input; reports every independent error it can find,
// resynchronizing at declaration boundaries.
ParseResult parse_scm(std::string_view source);

// Canonical text: topological node order (lexicographic tie-break), explicit
// domains, map keys sorted, shortest round-trip float formatting. Equal
// models serialize to identical bytes, and parse(serialize(m)) == m.
// Requires a model that passes validate().
std::string serialize_scm(const Scm& scm);

std::string format_parse_errors(const std::vector<ParseError>& errors);

// Shared float formatting (shortest form that parses back to the same
// double); also used by CSV and JSON writers.
std::string format_double(double v);

}  // namespace causalkit
