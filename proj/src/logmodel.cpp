#include "irspace/logmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

#include <json.hpp>

#include "irspace/error.hpp"

namespace irspace {

namespace {

using nlohmann::json;

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), is_space);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find('\t', start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string join(const std::vector<std::string>& terms) {
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += ' ';
        out += terms[i];
    }
    return out;
}

// Returns an empty string on success, otherwise the skip reason.
std::string validate(const ClickEvent& e) {
    if (e.user_key.empty()) return "missing user";
    if (e.timestamp_ms < 0) return "negative timestamp";
    if (e.query_terms.empty()) return "missing query";
    if (e.doc_id.empty()) return "missing doc id";
    return {};
}

std::string parse_tsv(std::string_view line, ClickEvent& e) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto fields = split_tabs(line);
    if (fields.size() < 4) return "expected at least 4 tab-separated fields";
    e.user_key = std::string(trim(fields[0]));
    auto ts = trim(fields[1]);
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), value);
    if (ec != std::errc() || ptr != ts.data() + ts.size()) return "bad timestamp";
    e.timestamp_ms = value;
    e.query_terms = tokenize(fields[2]);
    e.doc_id = std::string(trim(fields[3]));
    if (fields.size() > 4) e.doc_terms = tokenize(fields[4]);
    return validate(e);
}

std::vector<std::string> terms_from_json(const json& v) {
    if (v.is_string()) return tokenize(v.get_ref<const std::string&>());
    std::vector<std::string> out;
    if (v.is_array()) {
        for (const auto& item : v) {
            if (!item.is_string()) continue;
            auto t = tokenize(item.get_ref<const std::string&>());
            out.insert(out.end(), t.begin(), t.end());
        }
    }
    return out;
}

std::string parse_jsonl(std::string_view line, ClickEvent& e) {
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) return "invalid json object";
    if (!obj.contains("user") || !obj["user"].is_string()) return "missing user";
    e.user_key = obj["user"].get<std::string>();
    if (!obj.contains("ts") || !obj["ts"].is_number()) return "bad timestamp";
    const auto& ts = obj["ts"];
    if (ts.is_number_integer()) {
        e.timestamp_ms = ts.get<std::int64_t>();
    } else {
        double v = ts.get<double>();
        if (!std::isfinite(v)) return "bad timestamp";
        e.timestamp_ms = static_cast<std::int64_t>(std::llround(v));
    }
    if (obj.contains("query")) e.query_terms = terms_from_json(obj["query"]);
    if (obj.contains("doc") && obj["doc"].is_string()) e.doc_id = obj["doc"].get<std::string>();
    if (obj.contains("text")) e.doc_terms = terms_from_json(obj["text"]);
    return validate(e);
}

}  // namespace

LogFormat parse_log_format(std::string_view name) {
    if (name == "tsv") return LogFormat::tsv;
    if (name == "jsonlines" || name == "jsonl") return LogFormat::jsonlines;
    throw ValidationError("unknown log format '" + std::string(name) + "' (expected tsv or jsonlines)");
}

std::string_view to_string(LogFormat format) {
    return format == LogFormat::tsv ? "tsv" : "jsonlines";
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) ++i;
        std::size_t j = i;
        while (j < text.size() && !is_space(text[j])) ++j;
        if (j > i) {
            std::string term(text.substr(i, j - i));
            for (auto& c : term) {
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            }
            out.push_back(std::move(term));
        }
        i = j;
    }
    return out;
}

ParsedLog parse_log(const std::vector<std::string>& lines, LogFormat format) {
    ParsedLog result;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto& line = lines[i];
        if (is_blank(line)) continue;
        ++result.report.records;
        ClickEvent e;
        std::string reason = format == LogFormat::tsv ? parse_tsv(line, e) : parse_jsonl(line, e);
        if (reason.empty()) {
            result.events.push_back(std::move(e));
        } else {
            result.report.skipped.push_back({i + 1, std::move(reason)});
        }
    }
    result.report.parsed = result.events.size();
    return result;
}

ParsedLog parse_log(std::istream& in, LogFormat format) {
    if (!in.good()) throw InputError("log input stream is not readable");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (in.bad()) throw InputError("read error while consuming log input");
    return parse_log(lines, format);
}

void write_log(std::ostream& out, const std::vector<ClickEvent>& events, LogFormat format) {
    for (const auto& e : events) {
        if (format == LogFormat::tsv) {
            out << e.user_key << '\t' << e.timestamp_ms << '\t' << join(e.query_terms) << '\t' << e.doc_id
                << '\t' << join(e.doc_terms) << '\n';
        } else {
            json obj{{"user", e.user_key},
                     {"ts", e.timestamp_ms},
                     {"query", join(e.query_terms)},
                     {"doc", e.doc_id},
                     {"text", join(e.doc_terms)}};
            out << obj.dump() << '\n';
        }
    }
}

std::vector<Clickstream> extract_clickstreams(const std::vector<ClickEvent>& events,
                                              std::int64_t gap_threshold_ms, std::size_t min_length) {
    if (gap_threshold_ms <= 0) throw ValidationError("gap_threshold must be positive");
    if (min_length < 1) throw ValidationError("min_length must be at least 1");

    std::vector<std::size_t> order(events.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ea = events[a];
        const auto& eb = events[b];
        if (int c = ea.user_key.compare(eb.user_key); c != 0) return c < 0;
        return ea.timestamp_ms < eb.timestamp_ms;
    });

    std::vector<Clickstream> streams;
    Clickstream current;
    std::size_t per_user = 0;
    auto flush = [&] {
        if (!current.events.empty() && current.events.size() >= min_length) {
            current.stream_id = current.user_key + "#" + std::to_string(per_user);
            streams.push_back(std::move(current));
        }
        if (!current.events.empty()) ++per_user;
        current = Clickstream{};
    };

    for (std::size_t idx : order) {
        const auto& e = events[idx];
        if (!current.events.empty()) {
            const auto& prev = current.events.back();
            if (prev.user_key != e.user_key) {
                flush();
                per_user = 0;
            } else if (e.timestamp_ms - prev.timestamp_ms > gap_threshold_ms) {
                flush();
            }
        }
        if (current.events.empty()) current.user_key = e.user_key;
        current.events.push_back(e);
    }
    flush();
    return streams;
}

}  // namespace irspace
