#include "scoreembed/timeline.hpp"

#include <cctype>
#include <cstdio>
#include <json.hpp>
#include <map>

namespace scoreembed {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool is_leap(std::int64_t y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

unsigned days_in_month(std::int64_t y, unsigned m) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return m == 2 && is_leap(y) ? 29 : kDays[m - 1];
}

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  bool digits(std::size_t n, int& out) {
    if (pos_ + n > s_.size()) return false;
    int v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      char c = s_[pos_ + i];
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
      v = v * 10 + (c - '0');
    }
    pos_ += n;
    out = v;
    return true;
  }
  bool eat(char c) {
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool done() const { return pos_ == s_.size(); }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::chrono::sys_seconds> parse_iso8601(std::string_view text) {
  Cursor c(text);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!c.digits(4, y) || !c.eat('-') || !c.digits(2, mo) || !c.eat('-') || !c.digits(2, d)) return std::nullopt;
  if (mo < 1 || mo > 12 || d < 1 || static_cast<unsigned>(d) > days_in_month(y, static_cast<unsigned>(mo))) {
    return std::nullopt;
  }
  int offset_minutes = 0;
  if (!c.done()) {
    if (!c.eat('T') && !c.eat(' ')) return std::nullopt;
    if (!c.digits(2, h) || !c.eat(':') || !c.digits(2, mi)) return std::nullopt;
    if (c.eat(':')) {
      if (!c.digits(2, s)) return std::nullopt;
      if (c.eat('.') || c.eat(',')) {
        int digit = 0;
        if (!c.digits(1, digit)) return std::nullopt;
        while (std::isdigit(static_cast<unsigned char>(c.peek()))) c.digits(1, digit);
      }
    }
    if (h > 23 || mi > 59 || s > 60) return std::nullopt;
    if (c.eat('Z')) {
      // UTC
    } else if (c.peek() == '+' || c.peek() == '-') {
      const int sign = c.eat('+') ? 1 : (c.eat('-'), -1);
      int oh = 0, om = 0;
      if (!c.digits(2, oh)) return std::nullopt;
      if (c.eat(':')) {
        if (!c.digits(2, om)) return std::nullopt;
      } else if (!c.done() && !c.digits(2, om)) {
        return std::nullopt;
      }
      if (oh > 23 || om > 59) return std::nullopt;
      offset_minutes = sign * (oh * 60 + om);
    }
    if (!c.done()) return std::nullopt;
  }
  const std::int64_t days = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  const std::int64_t secs = days * 86400 + h * 3600 + mi * 60 + s - offset_minutes * 60;
  return std::chrono::sys_seconds(std::chrono::seconds(secs));
}

std::string utc_date(std::chrono::sys_seconds t) {
  std::int64_t secs = t.time_since_epoch().count();
  std::int64_t days = secs >= 0 ? secs / 86400 : -((-secs + 86399) / 86400);
  std::int64_t y = 0;
  unsigned m = 0, d = 0;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02u", static_cast<long long>(y), m, d);
  return buf;
}

TimelineResult build_timeline(std::istream& jsonl, std::size_t num_classes, const TextClassifier& classify) {
  TimelineResult result;
  std::map<std::string, TimelineBucket> by_day;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(jsonl, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto reject = [&](const std::string& why) {
      ++result.rejected;
      result.diagnostics.push_back("line " + std::to_string(lineno) + ": " + why);
    };
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      reject("invalid JSON");
      continue;
    }
    if (!rec.is_object() || !rec.contains("ts") || !rec["ts"].is_string() || !rec.contains("text") ||
        !rec["text"].is_string()) {
      reject("expected string fields 'ts' and 'text'");
      continue;
    }
    auto ts = parse_iso8601(rec["ts"].get<std::string>());
    if (!ts) {
      reject("unparseable timestamp '" + rec["ts"].get<std::string>() + "'");
      continue;
    }
    auto label = classify(rec["text"].get<std::string>());
    if (!label || *label >= num_classes) {
      reject("text could not be classified");
      continue;
    }
    auto date = utc_date(*ts);
    auto& bucket = by_day[date];
    if (bucket.counts.empty()) {
      bucket.date = date;
      bucket.counts.assign(num_classes, 0);
    }
    ++bucket.counts[*label];
    ++bucket.total;
    ++result.accepted;
  }
  for (auto& [date, bucket] : by_day) result.buckets.push_back(std::move(bucket));
  return result;
}

std::string timeline_csv(const TimelineResult& result, const LabelSet& labels) {
  std::string out = "date,total";
  for (const auto& name : labels.names()) out += ",count_" + name;
  out += "\n";
  for (const auto& b : result.buckets) {
    out += b.date + "," + std::to_string(b.total);
    for (auto c : b.counts) out += "," + std::to_string(c);
    out += "\n";
  }
  return out;
}

}  // namespace scoreembed
