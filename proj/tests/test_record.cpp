#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "eim/record.hpp"

using namespace eim;

namespace {

AttendeeMeetingRecord valid_record() {
    AttendeeMeetingRecord r;
    r.meeting_id = "m1";
    r.user_id = "u1";
    r.org_id = "org-a";
    r.meeting_size = 5;
    r.call_duration_min = 42.0;
    r.recurring = true;
    r.start_hour_local = 10;
    r.day_of_week = 2;
    r.nef_normalized = 0.2;
    r.video_duration_fraction = 0.5;
    r.screenshare_fraction = 0.05;
    r.headset = true;
    r.quality_stats.assign(kQualityStatCount, 0.1);
    r.effective_stars = 4;
    r.inclusive_stars = 5;
    r.response_time_s = 8.0;
    r.calls_same_day = 3;
    r.minutes_in_meetings_same_day = 120.0;
    return r;
}

}  // namespace

TEST_CASE("valid record round-trips through the JSONL schema") {
    const auto r = valid_record();
    const auto parsed = parse_record_line(serialize_record(r), 1);
    CHECK(parsed == r);
    CHECK(parsed.effective_stars == 4);
    CHECK(parsed.inclusive_stars == 5);
    CHECK(parsed.nef_normalized == 0.2);
}

TEST_CASE("out-of-range fraction is rejected with the field name") {
    auto r = valid_record();
    r.video_duration_fraction = 1.3;
    const std::string line = to_json(r).dump();
    CHECK_THROWS_WITH(parse_record_line(line, 7),
                      Catch::Matchers::ContainsSubstring("video_duration_fraction") &&
                          Catch::Matchers::ContainsSubstring("line 7"));
}

TEST_CASE("missing required field is rejected") {
    auto j = to_json(valid_record());
    j.erase("meeting_size");
    CHECK_THROWS_WITH(parse_record_line(j.dump(), 3),
                      Catch::Matchers::ContainsSubstring("meeting_size"));
}

TEST_CASE("malformed line reports its line number") {
    std::istringstream in(serialize_record(valid_record()) + "\n{not json\n");
    CHECK_THROWS_WITH(parse_records(in), Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("stars must be both present or both absent") {
    auto j = to_json(valid_record());
    j.erase("inclusive_stars");
    CHECK_THROWS_AS(parse_record_line(j.dump(), 1), DataError);
}

TEST_CASE("empty stream parses to an empty sequence") {
    std::istringstream in("");
    CHECK(parse_records(in).empty());
}

TEST_CASE("filters drop by the documented precedence and thresholds") {
    auto long_call = valid_record();
    long_call.call_duration_min = 160.0;
    auto quick_response = valid_record();
    quick_response.response_time_s = 3.0;
    auto tiny = valid_record();
    tiny.meeting_size = 2;
    tiny.call_duration_min = 200.0;  // participants reason wins over duration
    auto ok = valid_record();

    auto [kept, report] = apply_filters({long_call, quick_response, tiny, ok});
    CHECK(kept.size() == 1);
    CHECK(kept[0] == ok);
    CHECK(report.dropped_duration == 1);
    CHECK(report.dropped_response_time == 1);
    CHECK(report.dropped_participants == 1);
    CHECK(report.total() == 4);
}

TEST_CASE("filter boundaries are exact") {
    auto r = valid_record();

    r.meeting_size = 3;
    CHECK(apply_filters({r}).first.size() == 1);
    r.meeting_size = 2;
    CHECK(apply_filters({r}).first.empty());

    r = valid_record();
    r.call_duration_min = 150.0;
    CHECK(apply_filters({r}).first.empty());
    r.call_duration_min = 149.999;
    CHECK(apply_filters({r}).first.size() == 1);

    r = valid_record();
    r.response_time_s = 4.0;
    CHECK(apply_filters({r}).first.empty());
    r.response_time_s = 4.001;
    CHECK(apply_filters({r}).first.size() == 1);

    // A non-response never trips the response-time filter.
    r = valid_record();
    r.effective_stars.reset();
    r.inclusive_stars.reset();
    r.response_time_s.reset();
    CHECK(apply_filters({r}).first.size() == 1);
}

TEST_CASE("filtering is idempotent and counts partition the input") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<AttendeeMeetingRecord> records;
    for (int i = 0; i < 300; ++i) {
        auto r = valid_record();
        r.meeting_size = 1 + static_cast<int>(unif(rng) * 10.0);
        r.call_duration_min = unif(rng) * 200.0;
        if (unif(rng) < 0.5) {
            r.response_time_s = unif(rng) * 20.0;
        } else {
            r.effective_stars.reset();
            r.inclusive_stars.reset();
            r.response_time_s.reset();
        }
        records.push_back(std::move(r));
    }
    auto [kept, report] = apply_filters(records);
    CHECK(report.total() == records.size());
    auto [kept2, report2] = apply_filters(kept);
    CHECK(kept2 == kept);
    CHECK(report2.kept == kept.size());
    CHECK(report2.dropped_participants == 0);
    CHECK(report2.dropped_duration == 0);
    CHECK(report2.dropped_response_time == 0);
}

TEST_CASE("outcome derivation follows the star and NEF thresholds") {
    auto r = valid_record();
    r.effective_stars = 4;
    r.inclusive_stars = 5;
    r.nef_normalized = 0.05;
    auto o = derive_outcomes(r);
    CHECK(o.effective == 1);
    CHECK(o.inclusive == 1);
    CHECK(o.participation == 0);

    r.effective_stars = 3;
    r.inclusive_stars = 3;
    r.nef_normalized = 0.11;
    o = derive_outcomes(r);
    CHECK(o.effective == 0);
    CHECK(o.inclusive == 0);
    CHECK(o.participation == 1);

    r.effective_stars.reset();
    r.inclusive_stars.reset();
    r.nef_normalized = 0.5;
    o = derive_outcomes(r);
    CHECK_FALSE(o.effective.has_value());
    CHECK_FALSE(o.inclusive.has_value());
    CHECK(o.participation == 1);
}

TEST_CASE("outcome boundaries: stars 4 and NEF 0.10 exactly") {
    auto r = valid_record();
    for (int stars = 1; stars <= 5; ++stars) {
        r.effective_stars = stars;
        r.inclusive_stars = stars;
        const auto o = derive_outcomes(r);
        CHECK(*o.effective == (stars >= 4 ? 1 : 0));
        CHECK(*o.inclusive == (stars >= 4 ? 1 : 0));
    }
    r.nef_normalized = 0.10;  // strict inequality: boundary is not participation
    CHECK(derive_outcomes(r).participation == 0);
    r.nef_normalized = 0.10 + 1e-9;
    CHECK(derive_outcomes(r).participation == 1);
}

TEST_CASE("filter report serializes to the documented shape") {
    FilterReport rep;
    rep.kept = 10;
    rep.dropped_participants = 1;
    rep.dropped_duration = 2;
    rep.dropped_response_time = 3;
    const auto j = to_json(rep);
    CHECK(j["kept"] == 10);
    CHECK(j["dropped"]["participants"] == 1);
    CHECK(j["dropped"]["duration"] == 2);
    CHECK(j["dropped"]["response_time"] == 3);
}
