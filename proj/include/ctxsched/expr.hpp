#pragma once

// Small expression language used by config files: score expressions, derived
// stream filters/maps, context-rule conditions and task-graph predicates.
//
//   expr    := cond
//   cond    := or ('?' expr ':' expr)?
//   or      := and (('or' | '||') and)*
//   and     := not (('and' | '&&') not)*
//   not     := ('not' | '!') not | cmp
//   cmp     := add (('<' | '<=' | '>' | '>=' | '==' | '!=') add)?
//   add     := mul (('+' | '-') mul)*
//   mul     := unary (('*' | '/' | '%') unary)*
//   unary   := '-' unary | postfix
//   postfix := primary ('.' ident | '[' expr ']')*
//   primary := number | string | 'true' | 'false' | 'value'
//            | ident '(' args ')' | ident | '{' stream-name '}' | '(' expr ')'
//
// A bare identifier names a stream and evaluates to its latest payload. Names
// containing characters outside [A-Za-z0-9_] (topic streams such as
// "slam/pose") are written in braces: {slam/pose}.x. The keyword `value`
// refers to the payload currently flowing through a filter or map stage.
//
// Builtins: abs, sqrt, min, max, clamp(x, lo, hi), norm(v), len(v),
// present(stream).

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ctxsched::expr {

using Value = nlohmann::json;

/// Returns the latest value of a stream, or nullptr if it has not emitted yet.
using Resolver = std::function<const Value*(const std::string& name)>;

class Expression {
 public:
  /// Throws ExprError with the offending column on malformed input.
  static Expression parse(std::string_view text);

  const std::string& source() const noexcept { return source_; }

  /// Stream names referenced by the expression, sorted and unique.
  const std::vector<std::string>& streams() const noexcept { return streams_; }

  bool uses_value() const noexcept { return uses_value_; }

  /// Throws MissingValueError if a referenced stream has no value yet and
  /// EvalError on type errors or division by zero.
  Value evaluate(const Resolver& resolve, const Value* current = nullptr) const;
  double evaluate_number(const Resolver& resolve, const Value* current = nullptr) const;
  bool evaluate_bool(const Resolver& resolve, const Value* current = nullptr) const;

  friend bool operator==(const Expression& a, const Expression& b) {
    return a.source_ == b.source_;
  }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string source_;
  std::vector<std::string> streams_;
  bool uses_value_ = false;
};

/// Numbers pass through, booleans map to 0/1; anything else is an EvalError.
double to_number(const Value& v);

/// Booleans pass through, numbers are true when non-zero, null is false.
bool truthy(const Value& v);

/// True if `name` can be written in an expression without braces.
bool is_bare_identifier(std::string_view name);

}  // namespace ctxsched::expr
