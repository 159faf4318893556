#include <doctest.h>

#include <cmath>
#include <map>

#include "ctxsched/error.hpp"
#include "ctxsched/expr.hpp"

using ctxsched::expr::Expression;
using ctxsched::expr::Value;
using nlohmann::json;

namespace {

struct Env {
  std::map<std::string, Value> values;
  ctxsched::expr::Resolver resolver() const {
    return [this](const std::string& name) -> const Value* {
      auto it = values.find(name);
      return it == values.end() ? nullptr : &it->second;
    };
  }
};

double num(const std::string& text, const Env& env = {}) {
  return Expression::parse(text).evaluate_number(env.resolver());
}

}  // namespace

TEST_CASE("arithmetic and precedence") {
  CHECK(num("1 + 2 * 3") == 7);
  CHECK(num("(1 + 2) * 3") == 9);
  CHECK(num("-2 * 3 + 10 / 4") == doctest::Approx(-3.5));
  CHECK(num("7 % 3") == 1);
  CHECK(num("2 > 1 ? 10 : 20") == 10);
  CHECK(num("true") == 1);
}

TEST_CASE("boolean operators accept words and symbols") {
  Env env;
  CHECK(Expression::parse("1 < 2 and not (3 < 2)").evaluate_bool(env.resolver()));
  CHECK(Expression::parse("1 > 2 || 2 >= 2").evaluate_bool(env.resolver()));
  CHECK_FALSE(Expression::parse("!true && true").evaluate_bool(env.resolver()));
}

TEST_CASE("stream references and member access") {
  Env env;
  env.values["imu"] = json{{"accelerometer", {{"x", 0.5}, {"y", 0.0}}}};
  env.values["slam/pose"] = json{{"x", 2.0}};
  const auto e = Expression::parse("imu.accelerometer.x + {slam/pose}.x");
  CHECK(e.streams() == std::vector<std::string>{"imu", "slam/pose"});
  CHECK(e.evaluate_number(env.resolver()) == doctest::Approx(2.5));
}

TEST_CASE("listing filter on a non-zero accelerometer component") {
  const auto e = Expression::parse("value.accelerometer.x != 0");
  CHECK(e.uses_value());
  CHECK(e.streams().empty());
  Env env;
  const json moving = {{"accelerometer", {{"x", 0.3}}}};
  const json still = {{"accelerometer", {{"x", 0}}}};
  CHECK(e.evaluate_bool(env.resolver(), &moving));
  CHECK_FALSE(e.evaluate_bool(env.resolver(), &still));
}

TEST_CASE("builtins") {
  Env env;
  env.values["v"] = json::array({3, 4});
  env.values["rec"] = json{{"a", 1}, {"b", 2}, {"c", 2}};
  CHECK(num("norm(v)", env) == doctest::Approx(5.0));
  CHECK(num("norm(rec)", env) == doctest::Approx(3.0));
  CHECK(num("len(v)", env) == 2);
  CHECK(num("abs(-2) + sqrt(9) + min(4, 1, 7) + max(2, 5)", env) == doctest::Approx(11.0));
  CHECK(num("clamp(12, 0, 10)") == 10);
  CHECK(num("v[1]", env) == 4);
  CHECK(Expression::parse("present(v) and not present(nothing)").evaluate_bool(env.resolver()));
}

TEST_CASE("evaluation errors") {
  Env env;
  CHECK_THROWS_AS(num("1 / 0"), ctxsched::EvalError);
  CHECK_THROWS_AS(num("5 % 0"), ctxsched::EvalError);
  try {
    num("missing + 1");
    FAIL("expected MissingValueError");
  } catch (const ctxsched::MissingValueError& e) {
    CHECK(e.stream() == "missing");
  }
  env.values["s"] = "text";
  CHECK_THROWS_AS(num("s * 2", env), ctxsched::EvalError);
  CHECK_THROWS_AS(num("value + 1"), ctxsched::EvalError);
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(Expression::parse(""), ctxsched::ExprError);
  CHECK_THROWS_AS(Expression::parse("1 +"), ctxsched::ExprError);
  CHECK_THROWS_AS(Expression::parse("(1"), ctxsched::ExprError);
  CHECK_THROWS_AS(Expression::parse("foo(1)"), ctxsched::ExprError);
  CHECK_THROWS_AS(Expression::parse("{unterminated"), ctxsched::ExprError);
  CHECK_THROWS_AS(Expression::parse("1 2"), ctxsched::ExprError);
}

TEST_CASE("equality follows source text") {
  CHECK(Expression::parse("a + 1") == Expression::parse("a + 1"));
  CHECK_FALSE(Expression::parse("a + 1") == Expression::parse("a + 2"));
}
