#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace irspace {

/// A click: a query together with the document the user opened from the result list.
struct ClickEvent {
    std::string user_key;
    std::int64_t timestamp_ms = 0;
    std::vector<std::string> query_terms;
    std::string doc_id;
    std::vector<std::string> doc_terms;

    friend bool operator==(const ClickEvent&, const ClickEvent&) = default;
};

/// One user's temporally continuous run of clicks.
struct Clickstream {
    std::string stream_id;
    std::string user_key;
    std::vector<ClickEvent> events;

    std::size_t size() const noexcept { return events.size(); }
    friend bool operator==(const Clickstream&, const Clickstream&) = default;
};

enum class LogFormat { tsv, jsonlines };

LogFormat parse_log_format(std::string_view name);
std::string_view to_string(LogFormat format);

struct SkippedRecord {
    std::size_t line = 0;  // 1-based
    std::string reason;
};

struct ParseReport {
    std::size_t records = 0;
    std::size_t parsed = 0;
    std::vector<SkippedRecord> skipped;
};

struct ParsedLog {
    std::vector<ClickEvent> events;
    ParseReport report;
};

/// Lowercase (ASCII) and split on whitespace.
std::vector<std::string> tokenize(std::string_view text);

/// Parses records in input order. Malformed records are skipped and listed in
/// the report; blank lines are ignored. Records without a doc id are treated
/// as broken links and skipped.
ParsedLog parse_log(const std::vector<std::string>& lines, LogFormat format);

/// Throws InputError when the stream is unreadable.
ParsedLog parse_log(std::istream& in, LogFormat format);

void write_log(std::ostream& out, const std::vector<ClickEvent>& events, LogFormat format);

inline constexpr std::int64_t kDefaultGapThresholdMs = 30 * 60 * 1000;
inline constexpr std::size_t kDefaultMinLength = 2;

/// Groups events by user, orders by timestamp (stable on ties) and splits a
/// user's run wherever consecutive clicks are more than gap_threshold_ms apart.
/// Streams shorter than min_length are dropped. Output is ordered by user key,
/// then start time.
std::vector<Clickstream> extract_clickstreams(const std::vector<ClickEvent>& events,
                                              std::int64_t gap_threshold_ms = kDefaultGapThresholdMs,
                                              std::size_t min_length = kDefaultMinLength);

}  // namespace irspace
