#pragma once

// Reader and writer for the TOML subset used by controller config files:
// [table] and [[array.of.tables]] headers (dotted), bare/quoted/dotted keys,
// basic and literal strings, integers, floats, booleans, arrays (may span
// lines) and inline tables. Dates and multi-line strings are not supported.

#include <string>
#include <string_view>

#include <json.hpp>

namespace ctxsched::toml {

/// Parses a document into an ordered JSON object. Throws ConfigError with
/// the line number on malformed input or a redefined key.
nlohmann::ordered_json parse(std::string_view text);

/// Serializes an object so that parse(write(v)) == v. Integers stay
/// integers and floats keep a decimal point.
std::string write(const nlohmann::ordered_json& doc);

}  // namespace ctxsched::toml
