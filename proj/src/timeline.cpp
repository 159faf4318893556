#include "ctxsched/timeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ctxsched/error.hpp"

namespace ctxsched {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError("timeline: " + where + (where.empty() ? "" : ": ") + what);
}

std::int64_t get_int(const json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(where, std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

Timeline parse_timeline(std::string_view text, std::vector<std::string>* warnings) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail("", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("", "document must be an object");
  for (const auto& [key, _] : doc.items())
    if (key != "name" && key != "duration_ms" && key != "entries")
      fail("", "unknown key '" + key + "'");

  Timeline tl;
  if (!doc.contains("name") || !doc["name"].is_string()) fail("", "'name' must be a string");
  tl.name = doc["name"].get<std::string>();
  if (!doc.contains("duration_ms")) fail("", "missing 'duration_ms'");
  tl.duration_ms = get_int(doc, "duration_ms", "");
  if (tl.duration_ms < 0) fail("", "'duration_ms' must be >= 0");
  if (!doc.contains("entries") || !doc["entries"].is_array()) fail("", "'entries' must be a list");

  std::size_t i = 0;
  for (const auto& e : doc["entries"]) {
    const std::string where = "entry " + std::to_string(i++);
    if (!e.is_object()) fail(where, "must be an object");
    for (const auto& [key, _] : e.items())
      if (key != "t_ms" && key != "stream" && key != "payload" && key != "work_us" &&
          key != "ground_truth")
        fail(where, "unknown key '" + key + "'");
    TimelineEntry entry;
    if (!e.contains("t_ms")) fail(where, "missing 't_ms'");
    entry.t_ms = get_int(e, "t_ms", where);
    if (entry.t_ms < 0) fail(where, "'t_ms' must be >= 0");
    if (!e.contains("stream") || !e["stream"].is_string() || e["stream"].get<std::string>().empty())
      fail(where, "missing 'stream'");
    entry.stream = e["stream"].get<std::string>();
    if (!e.contains("payload") || !e["payload"].is_object())
      fail(where, "'payload' must be an object");
    entry.payload = e["payload"];
    if (e.contains("work_us")) {
      entry.work_us = get_int(e, "work_us", where);
      if (*entry.work_us <= 0) fail(where, "'work_us' must be > 0");
    }
    if (e.contains("ground_truth")) entry.ground_truth = e["ground_truth"];
    tl.entries.push_back(std::move(entry));
  }

  auto by_time = [](const TimelineEntry& a, const TimelineEntry& b) { return a.t_ms < b.t_ms; };
  if (!std::is_sorted(tl.entries.begin(), tl.entries.end(), by_time)) {
    std::stable_sort(tl.entries.begin(), tl.entries.end(), by_time);
    if (warnings) warnings->push_back("timeline '" + tl.name + "': entries were not sorted by t_ms; sorted them");
  }
  if (!tl.entries.empty() && tl.entries.back().t_ms > tl.duration_ms)
    fail("", "'duration_ms' " + std::to_string(tl.duration_ms) + " is before the last entry at " +
                 std::to_string(tl.entries.back().t_ms) + " ms");
  return tl;
}

Timeline load_timeline(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read timeline " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_timeline(ss.str(), warnings);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

nlohmann::ordered_json to_json(const Timeline& timeline) {
  nlohmann::ordered_json doc;
  doc["name"] = timeline.name;
  doc["duration_ms"] = timeline.duration_ms;
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : timeline.entries) {
    nlohmann::ordered_json j;
    j["t_ms"] = e.t_ms;
    j["stream"] = e.stream;
    j["payload"] = e.payload;
    if (e.work_us) j["work_us"] = *e.work_us;
    if (e.ground_truth) j["ground_truth"] = *e.ground_truth;
    doc["entries"].push_back(std::move(j));
  }
  return doc;
}

std::uint64_t input_digest(const Timeline& timeline) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (const auto& e : timeline.entries) {
    mix(std::to_string(e.t_ms));
    mix(e.stream);
    mix(e.payload.dump());
    mix(e.work_us ? std::to_string(*e.work_us) : "-");
  }
  return h;
}

}  // namespace ctxsched
