#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ctxsched {

struct TimelineEntry {
  std::int64_t t_ms = 0;
  std::string stream;
  nlohmann::json payload;
  std::optional<std::int64_t> work_us;
  std::optional<nlohmann::json> ground_truth;  // carried through untouched

  friend bool operator==(const TimelineEntry&, const TimelineEntry&) = default;
};

/// Inputs fed to the controller at virtual times, sorted by t_ms.
struct Timeline {
  std::string name;
  std::int64_t duration_ms = 0;
  std::vector<TimelineEntry> entries;

  friend bool operator==(const Timeline&, const Timeline&) = default;
};

/// Parses the timeline JSON document:
///   {"name": str, "duration_ms": int,
///    "entries": [{"t_ms": int, "stream": str, "payload": object,
///                 "work_us": int?, "ground_truth": any?}]}
/// Out-of-order entries are stably sorted and a warning is appended to
/// `warnings`. Throws ValidationError naming the offending entry index.
Timeline parse_timeline(std::string_view text, std::vector<std::string>* warnings = nullptr);
Timeline load_timeline(const std::filesystem::path& path,
                       std::vector<std::string>* warnings = nullptr);

nlohmann::ordered_json to_json(const Timeline& timeline);

/// FNV-1a digest of the entry sequence; equal digests mean identical inputs.
std::uint64_t input_digest(const Timeline& timeline);

}  // namespace ctxsched
