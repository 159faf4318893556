#include "ctxsched/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "ctxsched/error.hpp"

namespace ctxsched::expr {

enum class Op {
  Number,
  Bool,
  String,
  Stream,
  Current,
  Member,
  Index,
  Neg,
  Not,
  Add,
  Sub,
  Mul,
  Div,
  Mod,
  Lt,
  Le,
  Gt,
  Ge,
  Eq,
  Ne,
  And,
  Or,
  Cond,
  Call,
};

struct Expression::Node {
  Op op;
  double number = 0.0;
  std::string text;  // stream name, member name, string literal or function
  std::vector<std::shared_ptr<const Node>> kids;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr leaf(Op op, std::string text = {}, double number = 0.0) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->text = std::move(text);
  n->number = number;
  return n;
}

NodePtr branch(Op op, std::vector<NodePtr> kids, std::string text = {}) {
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->kids = std::move(kids);
  n->text = std::move(text);
  return n;
}

enum class Tok { End, Number, Ident, Braced, String, Punct };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  std::size_t column = 0;
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.column = pos_ + 1;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '.' && pos_ + 1 < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        t.kind = Tok::Number;
        t.number = lex_number(t.column);
      } else if (ident_start(c)) {
        const auto start = pos_;
        while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (c == '{') {
        const auto close = src_.find('}', pos_);
        if (close == std::string_view::npos) fail("unterminated '{'", t.column);
        t.kind = Tok::Braced;
        t.text = std::string(src_.substr(pos_ + 1, close - pos_ - 1));
        if (t.text.empty()) fail("empty stream name", t.column);
        pos_ = close + 1;
      } else if (c == '"' || c == '\'') {
        t.kind = Tok::String;
        t.text = lex_string(c, t.column);
      } else {
        t.kind = Tok::Punct;
        static constexpr std::string_view two[] = {"<=", ">=", "==", "!=", "&&", "||"};
        const auto rest = src_.substr(pos_);
        bool matched = false;
        for (auto op : two) {
          if (rest.starts_with(op)) {
            t.text = std::string(op);
            pos_ += 2;
            matched = true;
            break;
          }
        }
        if (!matched) {
          if (std::string_view("+-*/%()[].,?:<>!").find(c) == std::string_view::npos)
            fail(std::string("unexpected character '") + c + "'", t.column);
          t.text = std::string(1, c);
          ++pos_;
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  double lex_number(std::size_t column) {
    const auto start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    double v = 0.0;
    const auto text = src_.substr(start, pos_ - start);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
      fail("malformed number '" + std::string(text) + "'", column);
    return v;
  }

  std::string lex_string(char quote, std::size_t column) {
    std::string s;
    ++pos_;
    while (pos_ < src_.size() && src_[pos_] != quote) {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
      s += src_[pos_++];
    }
    if (pos_ >= src_.size()) fail("unterminated string", column);
    ++pos_;
    return s;
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t column) const {
    throw ExprError("expression '" + std::string(src_) + "': " + msg + " at column " +
                    std::to_string(column));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  Parser(std::string_view src, std::vector<Token> toks) : src_(src), toks_(std::move(toks)) {}

  NodePtr parse() {
    auto n = expression();
    if (peek().kind != Tok::End) fail("unexpected '" + describe(peek()) + "'");
    return n;
  }

  std::set<std::string> streams;
  bool uses_value = false;

 private:
  const Token& peek() const { return toks_[i_]; }
  Token next() { return toks_[i_++]; }

  bool accept_punct(std::string_view p) {
    if (peek().kind == Tok::Punct && peek().text == p) {
      ++i_;
      return true;
    }
    return false;
  }
  bool accept_word(std::string_view w) {
    if (peek().kind == Tok::Ident && peek().text == w) {
      ++i_;
      return true;
    }
    return false;
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) fail("expected '" + std::string(p) + "' but found '" + describe(peek()) + "'");
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::End: return "end of input";
      case Tok::Number: return "number";
      default: return t.text;
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ExprError("expression '" + std::string(src_) + "': " + msg + " at column " +
                    std::to_string(peek().column));
  }

  NodePtr expression() {
    auto c = disjunction();
    if (accept_punct("?")) {
      auto a = expression();
      expect_punct(":");
      auto b = expression();
      return branch(Op::Cond, {c, a, b});
    }
    return c;
  }

  NodePtr disjunction() {
    auto l = conjunction();
    while (accept_word("or") || accept_punct("||")) l = branch(Op::Or, {l, conjunction()});
    return l;
  }

  NodePtr conjunction() {
    auto l = negation();
    while (accept_word("and") || accept_punct("&&")) l = branch(Op::And, {l, negation()});
    return l;
  }

  NodePtr negation() {
    if (accept_word("not") || accept_punct("!")) return branch(Op::Not, {negation()});
    return comparison();
  }

  NodePtr comparison() {
    auto l = additive();
    static const std::pair<std::string_view, Op> ops[] = {{"<=", Op::Le}, {">=", Op::Ge},
                                                          {"==", Op::Eq}, {"!=", Op::Ne},
                                                          {"<", Op::Lt},  {">", Op::Gt}};
    for (auto [text, op] : ops) {
      if (accept_punct(text)) return branch(op, {l, additive()});
    }
    return l;
  }

  NodePtr additive() {
    auto l = multiplicative();
    for (;;) {
      if (accept_punct("+"))
        l = branch(Op::Add, {l, multiplicative()});
      else if (accept_punct("-"))
        l = branch(Op::Sub, {l, multiplicative()});
      else
        return l;
    }
  }

  NodePtr multiplicative() {
    auto l = unary();
    for (;;) {
      if (accept_punct("*"))
        l = branch(Op::Mul, {l, unary()});
      else if (accept_punct("/"))
        l = branch(Op::Div, {l, unary()});
      else if (accept_punct("%"))
        l = branch(Op::Mod, {l, unary()});
      else
        return l;
    }
  }

  NodePtr unary() {
    if (accept_punct("-")) return branch(Op::Neg, {unary()});
    return postfix();
  }

  NodePtr postfix() {
    auto n = primary();
    for (;;) {
      if (accept_punct(".")) {
        if (peek().kind != Tok::Ident) fail("expected member name after '.'");
        n = branch(Op::Member, {n}, next().text);
      } else if (accept_punct("[")) {
        auto idx = expression();
        expect_punct("]");
        n = branch(Op::Index, {n, idx});
      } else {
        return n;
      }
    }
  }

  NodePtr primary() {
    const Token t = peek();
    switch (t.kind) {
      case Tok::Number:
        ++i_;
        return leaf(Op::Number, {}, t.number);
      case Tok::String:
        ++i_;
        return leaf(Op::String, t.text);
      case Tok::Braced:
        ++i_;
        streams.insert(t.text);
        return leaf(Op::Stream, t.text);
      case Tok::Ident: {
        ++i_;
        if (t.text == "true" || t.text == "false") return leaf(Op::Bool, t.text, t.text == "true");
        if (t.text == "value") {
          uses_value = true;
          return leaf(Op::Current);
        }
        if (t.text == "and" || t.text == "or" || t.text == "not")
          fail("unexpected keyword '" + t.text + "'");
        if (accept_punct("(")) return call(t.text);
        streams.insert(t.text);
        return leaf(Op::Stream, t.text);
      }
      case Tok::Punct:
        if (accept_punct("(")) {
          auto n = expression();
          expect_punct(")");
          return n;
        }
        fail("unexpected '" + t.text + "'");
      case Tok::End:
        fail("unexpected end of input");
    }
    fail("unexpected token");
  }

  NodePtr call(const std::string& fn) {
    std::vector<NodePtr> args;
    if (!accept_punct(")")) {
      do {
        args.push_back(expression());
      } while (accept_punct(","));
      expect_punct(")");
    }
    auto arity = [&](std::size_t lo, std::size_t hi) {
      if (args.size() < lo || args.size() > hi)
        fail("wrong number of arguments to " + fn + "()");
    };
    if (fn == "abs" || fn == "sqrt" || fn == "norm" || fn == "len") {
      arity(1, 1);
    } else if (fn == "min" || fn == "max") {
      arity(1, 64);
    } else if (fn == "clamp") {
      arity(3, 3);
    } else if (fn == "present") {
      arity(1, 1);
      if (args[0]->op != Op::Stream) fail("present() takes a stream name");
    } else {
      fail("unknown function '" + fn + "'");
    }
    return branch(Op::Call, std::move(args), fn);
  }

  std::string_view src_;
  std::vector<Token> toks_;
  std::size_t i_ = 0;
};

struct Evaluator {
  const Resolver& resolve;
  const Value* current;

  Value eval(const Expression::Node& n) const {
    switch (n.op) {
      case Op::Number: return n.number;
      case Op::Bool: return n.number != 0.0;
      case Op::String: return n.text;
      case Op::Stream: {
        const Value* v = resolve ? resolve(n.text) : nullptr;
        if (v == nullptr) throw MissingValueError(n.text);
        return *v;
      }
      case Op::Current:
        if (current == nullptr) throw EvalError("'value' used outside a filter or map stage");
        return *current;
      case Op::Member: {
        Value obj = eval(*n.kids[0]);
        if (!obj.is_object() || !obj.contains(n.text))
          throw EvalError("no member '" + n.text + "' in " + obj.dump());
        return obj[n.text];
      }
      case Op::Index: {
        Value obj = eval(*n.kids[0]);
        Value idx = eval(*n.kids[1]);
        if (obj.is_array()) {
          const double d = to_number(idx);
          if (d < 0 || d != std::floor(d) || d >= static_cast<double>(obj.size()))
            throw EvalError("index " + idx.dump() + " out of range");
          return obj[static_cast<std::size_t>(d)];
        }
        if (obj.is_object() && idx.is_string()) {
          const auto key = idx.get<std::string>();
          if (!obj.contains(key)) throw EvalError("no member '" + key + "'");
          return obj[key];
        }
        throw EvalError("cannot index " + obj.dump());
      }
      case Op::Neg: return -to_number(eval(*n.kids[0]));
      case Op::Not: return !truthy(eval(*n.kids[0]));
      case Op::Add: return num(n, 0) + num(n, 1);
      case Op::Sub: return num(n, 0) - num(n, 1);
      case Op::Mul: return num(n, 0) * num(n, 1);
      case Op::Div: {
        const double d = num(n, 1);
        if (d == 0.0) throw EvalError("division by zero");
        return num(n, 0) / d;
      }
      case Op::Mod: {
        const double d = num(n, 1);
        if (d == 0.0) throw EvalError("modulo by zero");
        return std::fmod(num(n, 0), d);
      }
      case Op::Lt:
      case Op::Le:
      case Op::Gt:
      case Op::Ge: return compare(n);
      case Op::Eq: return equal(eval(*n.kids[0]), eval(*n.kids[1]));
      case Op::Ne: return !equal(eval(*n.kids[0]), eval(*n.kids[1]));
      case Op::And: return truthy(eval(*n.kids[0])) && truthy(eval(*n.kids[1]));
      case Op::Or: return truthy(eval(*n.kids[0])) || truthy(eval(*n.kids[1]));
      case Op::Cond: return truthy(eval(*n.kids[0])) ? eval(*n.kids[1]) : eval(*n.kids[2]);
      case Op::Call: return call(n);
    }
    throw EvalError("corrupt expression tree");
  }

  double num(const Expression::Node& n, std::size_t i) const { return to_number(eval(*n.kids[i])); }

  static bool equal(const Value& a, const Value& b) {
    const bool an = a.is_number() || a.is_boolean();
    const bool bn = b.is_number() || b.is_boolean();
    if (an && bn) return to_number(a) == to_number(b);
    return a == b;
  }

  Value compare(const Expression::Node& n) const {
    const Value a = eval(*n.kids[0]);
    const Value b = eval(*n.kids[1]);
    int c = 0;
    if (a.is_string() && b.is_string()) {
      c = a.get<std::string>().compare(b.get<std::string>());
    } else {
      const double x = to_number(a);
      const double y = to_number(b);
      c = x < y ? -1 : (x > y ? 1 : 0);
    }
    switch (n.op) {
      case Op::Lt: return c < 0;
      case Op::Le: return c <= 0;
      case Op::Gt: return c > 0;
      default: return c >= 0;
    }
  }

  Value call(const Expression::Node& n) const {
    const std::string& fn = n.text;
    if (fn == "present") {
      return resolve && resolve(n.kids[0]->text) != nullptr;
    }
    if (fn == "abs") return std::fabs(num(n, 0));
    if (fn == "sqrt") {
      const double x = num(n, 0);
      if (x < 0) throw EvalError("sqrt of negative number");
      return std::sqrt(x);
    }
    if (fn == "min" || fn == "max") {
      double acc = num(n, 0);
      for (std::size_t i = 1; i < n.kids.size(); ++i)
        acc = fn == "min" ? std::min(acc, num(n, i)) : std::max(acc, num(n, i));
      return acc;
    }
    if (fn == "clamp") return std::clamp(num(n, 0), num(n, 1), num(n, 2));
    if (fn == "len") {
      const Value v = eval(*n.kids[0]);
      if (v.is_string()) return static_cast<double>(v.get<std::string>().size());
      if (v.is_array() || v.is_object()) return static_cast<double>(v.size());
      throw EvalError("len() of " + v.dump());
    }
    // norm
    const Value v = eval(*n.kids[0]);
    if (v.is_number() || v.is_boolean()) return std::fabs(to_number(v));
    if (!v.is_array() && !v.is_object()) throw EvalError("norm() of " + v.dump());
    double sum = 0.0;
    for (const auto& e : v) {
      const double x = to_number(e);
      sum += x * x;
    }
    return std::sqrt(sum);
  }
};

}  // namespace

Expression Expression::parse(std::string_view text) {
  Parser p(text, Lexer(text).run());
  Expression e;
  e.root_ = p.parse();
  e.source_ = std::string(text);
  e.streams_.assign(p.streams.begin(), p.streams.end());
  e.uses_value_ = p.uses_value;
  return e;
}

Value Expression::evaluate(const Resolver& resolve, const Value* current) const {
  if (!root_) throw EvalError("empty expression");
  return Evaluator{resolve, current}.eval(*root_);
}

double Expression::evaluate_number(const Resolver& resolve, const Value* current) const {
  return to_number(evaluate(resolve, current));
}

bool Expression::evaluate_bool(const Resolver& resolve, const Value* current) const {
  return truthy(evaluate(resolve, current));
}

double to_number(const Value& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
  throw EvalError("expected a number but got " + v.dump());
}

bool truthy(const Value& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_null()) return false;
  throw EvalError("expected a boolean but got " + v.dump());
}

bool is_bare_identifier(std::string_view name) {
  if (name.empty() || !ident_start(name.front())) return false;
  if (name == "value" || name == "true" || name == "false" || name == "and" || name == "or" ||
      name == "not")
    return false;
  return std::all_of(name.begin(), name.end(), ident_char);
}

}  // namespace ctxsched::expr
