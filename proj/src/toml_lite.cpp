#include "ctxsched/toml_lite.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "ctxsched/error.hpp"

namespace ctxsched::toml {

namespace {

using Json = nlohmann::ordered_json;

bool bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  Json run() {
    Json root = Json::object();
    Json* table = &root;
    for (;;) {
      skip_blank_lines();
      if (eof()) return root;
      if (peek() == '[') {
        const bool array = src_.substr(pos_).starts_with("[[");
        pos_ += array ? 2 : 1;
        skip_ws();
        auto path = key_path();
        skip_ws();
        if (array ? !consume("]]") : !consume("]")) fail("unterminated table header");
        end_of_line();
        table = open_table(root, path, array);
      } else {
        auto path = key_path();
        skip_ws();
        if (!consume("=")) fail("expected '=' after key");
        skip_ws();
        Json v = value();
        end_of_line();
        Json* target = table;
        for (std::size_t i = 0; i + 1 < path.size(); ++i) {
          Json& next = (*target)[path[i]];
          if (next.is_null()) next = Json::object();
          if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
          target = &next;
        }
        if (target->contains(path.back())) fail("key '" + path.back() + "' defined twice");
        (*target)[path.back()] = std::move(v);
      }
    }
  }

 private:
  bool eof() const { return pos_ >= src_.size(); }
  char peek() const { return src_[pos_]; }

  bool consume(std::string_view s) {
    if (src_.substr(pos_).starts_with(s)) {
      pos_ += s.size();
      return true;
    }
    return false;
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#')
      while (!eof() && peek() != '\n') ++pos_;
  }

  void newline() {
    if (consume("\r\n") || consume("\n")) ++line_;
  }

  void skip_blank_lines() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (eof() || (peek() != '\n' && peek() != '\r')) return;
      newline();
    }
  }

  // Whitespace, comments and newlines inside arrays.
  void skip_array_space() {
    for (;;) {
      skip_ws();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        newline();
        continue;
      }
      return;
    }
  }

  void end_of_line() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected text after value");
    newline();
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + msg);
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> path;
    for (;;) {
      skip_ws();
      if (eof()) fail("expected key");
      if (peek() == '"') {
        path.push_back(basic_string());
      } else if (peek() == '\'') {
        path.push_back(literal_string());
      } else {
        const auto start = pos_;
        while (!eof() && bare_key_char(peek())) ++pos_;
        if (pos_ == start) fail("expected key");
        path.emplace_back(src_.substr(start, pos_ - start));
      }
      skip_ws();
      if (!consume(".")) return path;
    }
  }

  Json* open_table(Json& root, const std::vector<std::string>& path, bool array) {
    Json* cur = &root;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
      Json& next = (*cur)[path[i]];
      if (next.is_null()) next = Json::object();
      if (next.is_array()) {
        if (next.empty() || !next.back().is_object()) fail("'" + path[i] + "' is not a table array");
        cur = &next.back();
      } else if (next.is_object()) {
        cur = &next;
      } else {
        fail("'" + path[i] + "' is not a table");
      }
    }
    Json& last = (*cur)[path.back()];
    std::string joined;
    for (const auto& p : path) joined += (joined.empty() ? "" : ".") + p;
    if (array) {
      if (last.is_null()) last = Json::array();
      if (!last.is_array()) fail("'" + joined + "' is not a table array");
      last.push_back(Json::object());
      return &last.back();
    }
    if (last.is_null()) last = Json::object();
    if (!last.is_object()) fail("'" + joined + "' is not a table");
    if (!defined_.insert(joined).second) fail("table [" + joined + "] defined twice");
    return &last;
  }

  Json value() {
    if (eof()) fail("expected value");
    const char c = peek();
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    if (consume("true")) return true;
    if (consume("false")) return false;
    return number();
  }

  std::string basic_string() {
    ++pos_;
    std::string out;
    while (!eof() && peek() != '"') {
      char c = src_[pos_++];
      if (c == '\n') fail("newline in string");
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) break;
      c = src_[pos_++];
      switch (c) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case 'b': out += '\b'; break;
        case 'f': out += '\f'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'u': {
          if (pos_ + 4 > src_.size()) fail("bad \\u escape");
          unsigned code = 0;
          auto [p, ec] = std::from_chars(src_.data() + pos_, src_.data() + pos_ + 4, code, 16);
          if (ec != std::errc() || p != src_.data() + pos_ + 4) fail("bad \\u escape");
          pos_ += 4;
          append_utf8(out, code);
          break;
        }
        default: fail(std::string("unknown escape \\") + c);
      }
    }
    if (eof()) fail("unterminated string");
    ++pos_;
    return out;
  }

  static void append_utf8(std::string& out, unsigned code) {
    if (code < 0x80) {
      out += static_cast<char>(code);
    } else if (code < 0x800) {
      out += static_cast<char>(0xC0 | (code >> 6));
      out += static_cast<char>(0x80 | (code & 0x3F));
    } else {
      out += static_cast<char>(0xE0 | (code >> 12));
      out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (code & 0x3F));
    }
  }

  std::string literal_string() {
    ++pos_;
    const auto start = pos_;
    while (!eof() && peek() != '\'' && peek() != '\n') ++pos_;
    if (eof() || peek() != '\'') fail("unterminated literal string");
    std::string out(src_.substr(start, pos_ - start));
    ++pos_;
    return out;
  }

  Json array() {
    ++pos_;
    Json arr = Json::array();
    for (;;) {
      skip_array_space();
      if (consume("]")) return arr;
      arr.push_back(value());
      skip_array_space();
      if (consume("]")) return arr;
      if (!consume(",")) fail("expected ',' or ']' in array");
    }
  }

  Json inline_table() {
    ++pos_;
    Json obj = Json::object();
    skip_ws();
    if (consume("}")) return obj;
    for (;;) {
      auto path = key_path();
      skip_ws();
      if (!consume("=")) fail("expected '=' in inline table");
      skip_ws();
      Json* target = &obj;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        Json& next = (*target)[path[i]];
        if (next.is_null()) next = Json::object();
        target = &next;
      }
      if (target->contains(path.back())) fail("key '" + path.back() + "' defined twice");
      (*target)[path.back()] = value();
      skip_ws();
      if (consume("}")) return obj;
      if (!consume(",")) fail("expected ',' or '}' in inline table");
      skip_ws();
    }
  }

  Json number() {
    const auto start = pos_;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '.' ||
                      peek() == '+' || peek() == '-' || peek() == '_'))
      ++pos_;
    std::string text;
    for (char c : src_.substr(start, pos_ - start))
      if (c != '_') text += c;
    if (text.empty()) fail("expected value");
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    if (text == "-inf") return -std::numeric_limits<double>::infinity();
    if (text == "nan" || text == "+nan" || text == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = text.find_first_of(".eE") != std::string::npos;
    const char* b = text.data() + (text.front() == '+' ? 1 : 0);
    const char* e = text.data() + text.size();
    if (is_float) {
      double d = 0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec != std::errc() || p != e) fail("malformed number '" + text + "'");
      return d;
    }
    std::int64_t i = 0;
    auto [p, ec] = std::from_chars(b, e, i);
    if (ec != std::errc() || p != e) fail("malformed value '" + text + "'");
    return i;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::set<std::string> defined_;
};

// ---------------------------------------------------------------------------

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", static_cast<unsigned>(c));
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out + "\"";
}

std::string key(const std::string& k) {
  if (!k.empty() && std::all_of(k.begin(), k.end(), bare_key_char)) return k;
  return quote(k);
}

std::string scalar(const Json& v) {
  if (v.is_string()) return quote(v.get<std::string>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, d);
    std::string s(buf, p);
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  }
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + scalar(v[i]);
    return out + "]";
  }
  if (v.is_object()) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, x] : v.items()) {
      out += (first ? "" : ", ") + key(k) + " = " + scalar(x);
      first = false;
    }
    return out + "}";
  }
  throw ConfigError("cannot write null to TOML");
}

bool is_table_array(const Json& v) {
  return v.is_array() && !v.empty() &&
         std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_object(); });
}

void write_table(std::string& out, const Json& table, const std::string& prefix) {
  for (const auto& [k, v] : table.items()) {
    if (v.is_object() || is_table_array(v)) continue;
    out += key(k) + " = " + scalar(v) + "\n";
  }
  for (const auto& [k, v] : table.items()) {
    const std::string name = prefix.empty() ? key(k) : prefix + "." + key(k);
    if (v.is_object()) {
      out += "\n[" + name + "]\n";
      write_table(out, v, name);
    } else if (is_table_array(v)) {
      for (const auto& e : v) {
        out += "\n[[" + name + "]]\n";
        write_table(out, e, name);
      }
    }
  }
}

}  // namespace

nlohmann::ordered_json parse(std::string_view text) { return Reader(text).run(); }

std::string write(const nlohmann::ordered_json& doc) {
  if (!doc.is_object()) throw ConfigError("TOML document must be a table");
  std::string out;
  write_table(out, doc, "");
  if (!out.empty() && out.front() == '\n') out.erase(0, 1);
  return out;
}

}  // namespace ctxsched::toml
