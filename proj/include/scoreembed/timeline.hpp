#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scoreembed/corpus.hpp"

namespace scoreembed {

// ISO-8601 date or date-time: `YYYY-MM-DD`, optionally followed by `T` (or a
// space) `HH:MM[:SS[.frac]]` and `Z` or a `+HH[:MM]`/`-HH[:MM]` offset. A
// date-time without a zone designator is taken as UTC.
std::optional<std::chrono::sys_seconds> parse_iso8601(std::string_view text);

// `YYYY-MM-DD` of the UTC day containing t.
std::string utc_date(std::chrono::sys_seconds t);

struct TimelineBucket {
  std::string date;  // UTC day, YYYY-MM-DD
  std::vector<std::size_t> counts;
  std::size_t total = 0;
};

struct TimelineResult {
  std::vector<TimelineBucket> buckets;  // ascending by date
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> diagnostics;
};

// Returns the predicted class, or nullopt when the text cannot be classified.
using TextClassifier = std::function<std::optional<std::size_t>(const std::string& text)>;

// Reads JSONL records `{"ts": ..., "text": ...}` and counts predictions per
// UTC day. Unparseable records are rejected and counted, never guessed.
TimelineResult build_timeline(std::istream& jsonl, std::size_t num_classes, const TextClassifier& classify);

// `date,total,count_<class>...`
std::string timeline_csv(const TimelineResult& result, const LabelSet& labels);

}  // namespace scoreembed
