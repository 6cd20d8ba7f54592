#include "shapmine/eventlog.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

namespace {

using namespace shapmine;

EventLog make_log(const std::vector<std::vector<std::string>>& seqs) {
    EventLog log;
    int i = 0;
    for (const auto& s : seqs) {
        Trace t;
        t.case_id = "c" + std::to_string(i++);
        for (std::size_t j = 0; j < s.size(); ++j)
            t.events.push_back(Event{t.case_id, s[j], static_cast<std::int64_t>(j)});
        log.traces.push_back(t);
    }
    return log;
}

const char* kMinimalXes = R"(<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="case_7"/>
    <event>
      <string key="concept:name" value="a"/>
      <date key="time:timestamp" value="1970-01-01T00:00:00.000Z"/>
    </event>
    <event>
      <string key="concept:name" value="b"/>
      <date key="time:timestamp" value="1970-01-01T00:00:00.001Z"/>
    </event>
  </trace>
</log>
)";

TEST(ParseXes, MinimalFixture) {
    EventLog log = parse_xes(kMinimalXes);
    ASSERT_EQ(log.trace_count(), 1u);
    ASSERT_EQ(log.traces[0].events.size(), 2u);
    EXPECT_EQ(log.traces[0].case_id, "case_7");
    EXPECT_EQ(log.traces[0].events[0].activity, "a");
    EXPECT_EQ(log.traces[0].events[1].activity, "b");
    EXPECT_EQ(log.traces[0].events[0].timestamp_ms, 0);
    EXPECT_EQ(log.traces[0].events[1].timestamp_ms, 1);
}

TEST(ParseXes, RoundTripIdentity) {
    EventLog log = make_log({{"a", "b"}, {"b", "a"}, {"a"}, {"a", "b"}});
    EXPECT_EQ(parse_xes(write_xes(log)), log);
    std::string doc = write_xes(parse_xes(kMinimalXes));
    EXPECT_EQ(parse_xes(doc), parse_xes(kMinimalXes));
}

TEST(ParseXes, WriterIsDeterministic) {
    EventLog log = make_log({{"x", "y", "z"}, {"x"}});
    EXPECT_EQ(write_xes(log), write_xes(log));
}

TEST(ParseXes, TruncatedDocumentFails) {
    std::string doc = kMinimalXes;
    doc.resize(doc.size() - 8); // cut into the closing tag
    EXPECT_THROW(parse_xes(doc), ParseError);
}

TEST(ParseXes, EventWithoutNameFails) {
    const char* doc = R"(<log><trace><string key="concept:name" value="t1"/>
      <event><date key="time:timestamp" value="1970-01-01T00:00:00.000Z"/></event>
      </trace></log>)";
    try {
        parse_xes(doc);
        FAIL() << "expected SchemaError";
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("t1"), std::string::npos);
    }
}

TEST(ParseXes, SyntheticTimestampsPerTrace) {
    const char* doc = R"(<log>
      <trace><string key="concept:name" value="t"/>
        <event><string key="concept:name" value="a"/></event>
        <event><string key="concept:name" value="b"/></event>
        <event><string key="concept:name" value="c"/></event>
      </trace></log>)";
    EventLog log = parse_xes(doc);
    ASSERT_EQ(log.traces[0].events.size(), 3u);
    EXPECT_EQ(log.traces[0].events[0].timestamp_ms, 0);
    EXPECT_EQ(log.traces[0].events[1].timestamp_ms, 1);
    EXPECT_EQ(log.traces[0].events[2].timestamp_ms, 2);
}

TEST(ParseXes, EscapedLabelsRoundTrip) {
    EventLog log = make_log({{"a<b", "c&d", "e\"f"}});
    EXPECT_EQ(parse_xes(write_xes(log)), log);
}

TEST(Timestamps, FormatsAndParses) {
    EXPECT_EQ(format_timestamp(0), "1970-01-01T00:00:00.000Z");
    EXPECT_EQ(parse_timestamp("1970-01-01T00:00:00.000Z"), 0);
    EXPECT_EQ(parse_timestamp("1970-01-01T01:00:00.000+01:00"), 0);
    EXPECT_EQ(parse_timestamp("2024-05-01T12:30:15.250Z"),
              parse_timestamp("2024-05-01T12:30:15.25Z"));
    for (std::int64_t ms : {0LL, 1LL, 999LL, 86400000LL, 1700000000123LL})
        EXPECT_EQ(parse_timestamp(format_timestamp(ms)), ms);
    EXPECT_THROW(parse_timestamp("not a date"), ParseError);
}

TEST(Variants, CountsAndOrder) {
    auto vs = variants(make_log({{"a", "b"}, {"a", "b"}, {"a"}}));
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_EQ(vs[0].activity_sequence, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(vs[0].count, 2u);
    EXPECT_EQ(vs[1].activity_sequence, (std::vector<std::string>{"a"}));
    EXPECT_EQ(vs[1].count, 1u);
}

TEST(Variants, IdenticalTracesCollapse) {
    auto vs = variants(make_log({{"a", "b", "c"}, {"a", "b", "c"}, {"a", "b", "c"}}));
    ASSERT_EQ(vs.size(), 1u);
    EXPECT_EQ(vs[0].count, 3u);
}

TEST(Variants, LexicographicTieBreak) {
    auto vs = variants(make_log({{"b", "a"}, {"a", "b"}}));
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_EQ(vs[0].activity_sequence, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(vs[1].activity_sequence, (std::vector<std::string>{"b", "a"}));
}

TEST(Variants, EmptyLogIsDomainError) {
    EXPECT_THROW(variants(EventLog{}), DomainError);
}

TEST(Variants, CountsSumToTraceCountAndOrderInvariant) {
    std::mt19937 rng(11);
    std::vector<std::string> alphabet = {"a", "b", "c"};
    for (int round = 0; round < 20; ++round) {
        std::vector<std::vector<std::string>> seqs;
        int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            std::vector<std::string> s;
            int len = 1 + static_cast<int>(rng() % 4);
            for (int j = 0; j < len; ++j) s.push_back(alphabet[rng() % alphabet.size()]);
            seqs.push_back(s);
        }
        EventLog log = make_log(seqs);
        auto vs = variants(log);
        std::size_t total = 0;
        for (const auto& v : vs) total += v.count;
        EXPECT_EQ(total, log.trace_count());

        std::shuffle(seqs.begin(), seqs.end(), rng);
        EXPECT_EQ(variants(make_log(seqs)), vs);
    }
}

TEST(CsvLog, RoundTrip) {
    EventLog log = make_log({{"a", "b"}, {"c"}});
    EXPECT_EQ(parse_csv_log(write_csv_log(log)), log);
}

TEST(CsvLog, HeaderMismatchFails) {
    EXPECT_THROW(parse_csv_log("case;activity;timestamp\n"), SchemaError);
    EXPECT_THROW(parse_csv_log("case,activity\nx,a\n"), SchemaError);
}

TEST(Validate, RejectsBrokenTraces) {
    EventLog bad = make_log({{"a"}});
    bad.traces[0].events[0].activity = "";
    EXPECT_THROW(validate(bad), SchemaError);

    EventLog decreasing = make_log({{"a", "b"}});
    decreasing.traces[0].events[1].timestamp_ms = -5;
    EXPECT_THROW(validate(decreasing), SchemaError);

    EventLog empty_trace;
    empty_trace.traces.push_back(Trace{"t", {}});
    EXPECT_THROW(validate(empty_trace), SchemaError);
}

} // namespace
