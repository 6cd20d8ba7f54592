#pragma once

#include "shapmine/csv.hpp"
#include "shapmine/error.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

namespace shapmine {

// ---------------------------------------------------------------------------
// Log data model
// ---------------------------------------------------------------------------

struct Event {
    std::string case_id;
    std::string activity;      // non-empty
    std::int64_t timestamp_ms = 0;

    friend bool operator==(const Event&, const Event&) = default;
};

/// Ordered, non-empty event sequence of one case; timestamps non-decreasing.
struct Trace {
    std::string case_id;
    std::vector<Event> events;

    friend bool operator==(const Trace&, const Trace&) = default;

    std::vector<std::string> activities() const {
        std::vector<std::string> out;
        out.reserve(events.size());
        for (const auto& e : events) out.push_back(e.activity);
        return out;
    }
};

/// Multiset of traces, kept as an order-preserving list (duplicates allowed).
struct EventLog {
    std::vector<Trace> traces;

    friend bool operator==(const EventLog&, const EventLog&) = default;

    bool empty() const { return traces.empty(); }
    std::size_t trace_count() const { return traces.size(); }
    std::size_t event_count() const {
        std::size_t n = 0;
        for (const auto& t : traces) n += t.events.size();
        return n;
    }
};

struct Variant {
    std::vector<std::string> activity_sequence;
    std::size_t count = 0;

    friend bool operator==(const Variant&, const Variant&) = default;
};

/// Validates the Trace/EventLog invariants, throwing SchemaError on violation.
inline void validate(const EventLog& log) {
    for (const auto& t : log.traces) {
        if (t.events.empty()) throw SchemaError("trace '" + t.case_id + "' has no events");
        std::int64_t prev = t.events.front().timestamp_ms;
        for (const auto& e : t.events) {
            if (e.activity.empty()) throw SchemaError("event with empty activity in trace '" + t.case_id + "'");
            if (e.case_id != t.case_id)
                throw SchemaError("event case id '" + e.case_id + "' differs from trace '" + t.case_id + "'");
            if (e.timestamp_ms < prev)
                throw SchemaError("timestamps decrease within trace '" + t.case_id + "'");
            prev = e.timestamp_ms;
        }
    }
}

/// Distinct activity sequences with counts, sorted by count descending then
/// lexicographic sequence.
inline std::vector<Variant> variants(const EventLog& log) {
    if (log.empty()) throw DomainError("variants: empty log");
    std::map<std::vector<std::string>, std::size_t> counts;
    for (const auto& t : log.traces) counts[t.activities()] += 1;
    std::vector<Variant> out;
    out.reserve(counts.size());
    for (auto& [seq, n] : counts) out.push_back(Variant{seq, n});
    std::stable_sort(out.begin(), out.end(), [](const Variant& a, const Variant& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.activity_sequence < b.activity_sequence;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Timestamp formatting (UTC, millisecond precision)
// ---------------------------------------------------------------------------

namespace detail {

// Civil-date conversions on a proleptic Gregorian calendar.
inline std::int64_t days_from_civil(std::int64_t y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y += m <= 2;
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace detail

inline std::string format_timestamp(std::int64_t ms) {
    std::int64_t days = detail::floor_div(ms, 86400000);
    std::int64_t rem = ms - days * 86400000;
    std::int64_t y;
    int mo, d;
    detail::civil_from_days(days, y, mo, d);
    int h = static_cast<int>(rem / 3600000);
    rem %= 3600000;
    int mi = static_cast<int>(rem / 60000);
    rem %= 60000;
    int s = static_cast<int>(rem / 1000);
    int msec = static_cast<int>(rem % 1000);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%04lld-%02d-%02dT%02d:%02d:%02d.%03dZ",
                  static_cast<long long>(y), mo, d, h, mi, s, msec);
    return buf;
}

/// Accepts ISO-8601 with optional fractional seconds and Z/±HH:MM offsets.
inline std::int64_t parse_timestamp(const std::string& text) {
    const char* p = text.c_str();
    auto fail = [&] { throw ParseError("bad timestamp '" + text + "'"); };
    auto read_int = [&](int digits) {
        long long v = 0;
        for (int i = 0; i < digits; ++i) {
            if (*p < '0' || *p > '9') fail();
            v = v * 10 + (*p - '0');
            ++p;
        }
        return v;
    };
    long long y = read_int(4);
    if (*p++ != '-') fail();
    int mo = static_cast<int>(read_int(2));
    if (*p++ != '-') fail();
    int d = static_cast<int>(read_int(2));
    if (*p != 'T' && *p != ' ') fail();
    ++p;
    int h = static_cast<int>(read_int(2));
    if (*p++ != ':') fail();
    int mi = static_cast<int>(read_int(2));
    if (*p++ != ':') fail();
    int s = static_cast<int>(read_int(2));
    int msec = 0;
    if (*p == '.') {
        ++p;
        int scale = 100;
        int digits = 0;
        while (*p >= '0' && *p <= '9') {
            if (digits < 3) msec += (*p - '0') * scale;
            scale /= 10;
            ++digits;
            ++p;
        }
        if (digits == 0) fail();
    }
    std::int64_t offset_ms = 0;
    if (*p == 'Z') {
        ++p;
    } else if (*p == '+' || *p == '-') {
        int sign = (*p == '+') ? 1 : -1;
        ++p;
        int oh = static_cast<int>(read_int(2));
        if (*p == ':') ++p;
        int om = static_cast<int>(read_int(2));
        offset_ms = sign * (oh * 3600000LL + om * 60000LL);
    }
    if (*p != '\0') fail();
    std::int64_t days = detail::days_from_civil(y, mo, d);
    return days * 86400000 + h * 3600000LL + mi * 60000LL + s * 1000LL + msec - offset_ms;
}

// ---------------------------------------------------------------------------
// XES subset (log > trace > event; concept:name, time:timestamp)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct XmlTag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;      // </name>
    bool self_closing = false; // <name/>
    int line = 0;
};

/// Minimal non-validating tokenizer for the XES subset. Tracks line numbers
/// for error context; understands declarations, comments and the five
/// predefined entities.
class XmlScanner {
public:
    explicit XmlScanner(const std::string& text) : text_(text) {}

    /// Returns false at end of input.
    bool next(XmlTag& tag) {
        skip_text();
        if (pos_ >= text_.size()) return false;
        int tag_line = line_;
        expect('<');
        if (peek() == '?') { // declaration
            skip_until("?>");
            return next(tag);
        }
        if (starts_with("!--")) { // comment
            skip_until("-->");
            return next(tag);
        }
        tag = XmlTag{};
        tag.line = tag_line;
        if (peek() == '/') {
            ++pos_;
            tag.closing = true;
        }
        tag.name = read_name();
        if (tag.name.empty()) fail("expected tag name");
        for (;;) {
            skip_ws();
            if (pos_ >= text_.size()) fail("unterminated tag '" + tag.name + "'");
            if (peek() == '>') {
                ++pos_;
                return true;
            }
            if (peek() == '/') {
                ++pos_;
                expect('>');
                tag.self_closing = true;
                return true;
            }
            std::string key = read_name();
            if (key.empty()) fail("expected attribute in tag '" + tag.name + "'");
            skip_ws();
            expect('=');
            skip_ws();
            char quote = peek();
            if (quote != '"' && quote != '\'') fail("expected quoted attribute value");
            ++pos_;
            std::string value;
            while (pos_ < text_.size() && text_[pos_] != quote) {
                if (text_[pos_] == '\n') ++line_;
                value.push_back(text_[pos_++]);
            }
            if (pos_ >= text_.size()) fail("unterminated attribute value");
            ++pos_;
            tag.attrs[key] = unescape(value);
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("XML parse error at line " + std::to_string(line_) + ": " + msg);
    }

private:
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    bool starts_with(const char* s) const { return text_.compare(pos_, std::string::traits_type::length(s), s) == 0; }

    void expect(char c) {
        if (pos_ >= text_.size() || text_[pos_] != c)
            fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' || text_[pos_] == '\r')) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    void skip_text() {
        while (pos_ < text_.size() && text_[pos_] != '<') {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    void skip_until(const char* terminator) {
        std::size_t found = text_.find(terminator, pos_);
        if (found == std::string::npos) fail(std::string("unterminated construct, expected '") + terminator + "'");
        for (std::size_t i = pos_; i < found; ++i)
            if (text_[i] == '\n') ++line_;
        pos_ = found + std::string::traits_type::length(terminator);
    }

    std::string read_name() {
        std::string name;
        while (pos_ < text_.size()) {
            char c = text_[pos_];
            bool name_char = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                             c == ':' || c == '_' || c == '-' || c == '.' || c == '!';
            if (!name_char) break;
            name.push_back(c);
            ++pos_;
        }
        return name;
    }

    std::string unescape(const std::string& s) {
        std::string out;
        out.reserve(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '&') {
                out.push_back(s[i]);
                continue;
            }
            std::size_t semi = s.find(';', i);
            if (semi == std::string::npos) fail("bad entity");
            std::string ent = s.substr(i + 1, semi - i - 1);
            if (ent == "amp") out.push_back('&');
            else if (ent == "lt") out.push_back('<');
            else if (ent == "gt") out.push_back('>');
            else if (ent == "quot") out.push_back('"');
            else if (ent == "apos") out.push_back('\'');
            else fail("unknown entity '&" + ent + ";'");
            i = semi;
        }
        return out;
    }

    const std::string& text_;
    std::size_t pos_ = 0;
    int line_ = 1;
};

} // namespace detail

/// Parses the supported XES subset. Trace order and intra-trace event order
/// are preserved; events without a time:timestamp get per-trace synthetic
/// stamps 0,1,2,...
inline EventLog parse_xes(const std::string& document) {
    detail::XmlScanner scanner(document);
    detail::XmlTag tag;
    EventLog log;

    bool in_log = false, in_trace = false, in_event = false;
    Trace trace;
    std::string event_activity;
    std::int64_t event_ts = 0;
    bool event_has_name = false, event_has_ts = false;
    std::int64_t synthetic_counter = 0;
    std::size_t trace_index = 0;

    while (scanner.next(tag)) {
        if (tag.closing) {
            if (tag.name == "event") {
                if (!event_has_name)
                    throw SchemaError("event missing concept:name in trace '" + trace.case_id + "'");
                if (!event_has_ts) event_ts = synthetic_counter++;
                trace.events.push_back(Event{trace.case_id, event_activity, event_ts});
                in_event = false;
            } else if (tag.name == "trace") {
                if (trace.events.empty())
                    throw SchemaError("trace '" + trace.case_id + "' has no events");
                log.traces.push_back(trace);
                in_trace = false;
            } else if (tag.name == "log") {
                in_log = false;
            }
            continue;
        }
        if (tag.name == "log") {
            in_log = true;
            if (tag.self_closing) in_log = false;
        } else if (tag.name == "trace") {
            if (!in_log) scanner.fail("<trace> outside <log>");
            trace = Trace{};
            trace.case_id = "case_" + std::to_string(trace_index++);
            synthetic_counter = 0;
            in_trace = true;
            if (tag.self_closing) throw SchemaError("trace with no events");
        } else if (tag.name == "event") {
            if (!in_trace) scanner.fail("<event> outside <trace>");
            in_event = true;
            event_activity.clear();
            event_has_name = event_has_ts = false;
            if (tag.self_closing)
                throw SchemaError("event missing concept:name in trace '" + trace.case_id + "'");
        } else if (tag.name == "string" || tag.name == "date" || tag.name == "int" || tag.name == "float" || tag.name == "boolean" || tag.name == "id") {
            auto key = tag.attrs.find("key");
            auto value = tag.attrs.find("value");
            if (key == tag.attrs.end() || value == tag.attrs.end()) continue;
            if (in_event) {
                if (key->second == "concept:name") {
                    event_activity = value->second;
                    event_has_name = true;
                } else if (key->second == "time:timestamp") {
                    event_ts = parse_timestamp(value->second);
                    event_has_ts = true;
                }
            } else if (in_trace) {
                if (key->second == "concept:name") {
                    trace.case_id = value->second;
                    for (auto& e : trace.events) e.case_id = trace.case_id;
                }
            }
            // other attributes are ignored by the subset
        }
        // unknown elements (extension, classifier, global, ...) are skipped
    }
    if (in_event || in_trace || in_log)
        throw ParseError("XML parse error: unexpected end of input inside an open element");
    for (auto& t : log.traces)
        for (auto& e : t.events) e.case_id = t.case_id;
    validate(log);
    return log;
}

/// Deterministic writer for the same subset parse_xes reads.
inline std::string write_xes(const EventLog& log) {
    validate(log);
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<log xes.version=\"1.0\">\n";
    for (const auto& t : log.traces) {
        out += "  <trace>\n";
        out += "    <string key=\"concept:name\" value=\"" + detail::xml_escape(t.case_id) + "\"/>\n";
        for (const auto& e : t.events) {
            out += "    <event>\n";
            out += "      <string key=\"concept:name\" value=\"" + detail::xml_escape(e.activity) + "\"/>\n";
            out += "      <date key=\"time:timestamp\" value=\"" + format_timestamp(e.timestamp_ms) + "\"/>\n";
            out += "    </event>\n";
        }
        out += "  </trace>\n";
    }
    out += "</log>\n";
    return out;
}

// ---------------------------------------------------------------------------
// CSV log interchange: header `case,activity,timestamp`
// ---------------------------------------------------------------------------

inline EventLog parse_csv_log(const std::string& text) {
    auto lines = csv::split_lines(text);
    if (lines.empty()) throw ParseError("CSV log: empty document");
    if (csv::split(lines[0]) != std::vector<std::string>{"case", "activity", "timestamp"})
        throw SchemaError("CSV log: expected header 'case,activity,timestamp', got '" + lines[0] + "'");
    EventLog log;
    Trace* current = nullptr;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto fields = csv::split(lines[i]);
        if (fields.size() != 3)
            throw ParseError("CSV log: line " + std::to_string(i + 1) + ": expected 3 fields");
        Event e{fields[0], fields[1], csv::parse_int(fields[2])};
        if (e.activity.empty())
            throw SchemaError("CSV log: line " + std::to_string(i + 1) + ": empty activity");
        // consecutive rows with the same case id extend one trace
        if (current == nullptr || current->case_id != e.case_id) {
            log.traces.push_back(Trace{e.case_id, {}});
            current = &log.traces.back();
        }
        current->events.push_back(e);
    }
    validate(log);
    return log;
}

inline std::string write_csv_log(const EventLog& log) {
    validate(log);
    std::string out = "case,activity,timestamp\n";
    for (const auto& t : log.traces)
        for (const auto& e : t.events)
            out += e.case_id + "," + e.activity + "," + std::to_string(e.timestamp_ms) + "\n";
    return out;
}

} // namespace shapmine
