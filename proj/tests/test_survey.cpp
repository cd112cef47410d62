#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <sstream>

#include "eim/pipeline.hpp"
#include "eim/survey.hpp"

using namespace eim;

TEST_CASE("zero trigger rate never shows a survey") {
    const auto meetings = build_meeting_stream(500, 100, 5.0, 30.0, 1);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.0;
    const auto log = run_scheduler(meetings, cfg);
    for (const auto& ev : log) {
        CHECK_FALSE(ev.shown);
        CHECK(ev.suppressed_reason == SuppressedReason::not_triggered);
    }
}

TEST_CASE("meeting-level trigger rate lands inside its 99% binomial CI") {
    const auto meetings = build_meeting_stream(10000, 5000, 5.0, 365.0, 2);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.10;
    cfg.cooldown_days = 0.0;  // isolate the trigger decision
    cfg.seed = 7;
    const auto log = run_scheduler(meetings, cfg);
    std::map<std::string, bool> meeting_triggered;
    for (const auto& ev : log) {
        if (ev.shown) meeting_triggered[ev.meeting_id] = true;
        else meeting_triggered.emplace(ev.meeting_id, false);
    }
    std::size_t triggered = 0;
    for (const auto& [id, t] : meeting_triggered) triggered += t;
    const double rate = static_cast<double>(triggered) / meeting_triggered.size();
    const double half = 2.576 * std::sqrt(0.10 * 0.90 / meeting_triggered.size());
    CHECK(rate > 0.10 - half);
    CHECK(rate < 0.10 + half);
}

TEST_CASE("cool-down invariant holds over the whole log") {
    const auto meetings = build_meeting_stream(5000, 300, 6.0, 90.0, 3);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.25;
    cfg.cooldown_days = 7.0;
    cfg.seed = 9;
    const auto log = run_scheduler(meetings, cfg);
    std::map<std::string, double> last_shown;
    std::size_t shown = 0;
    for (const auto& ev : log) {
        if (!ev.shown) continue;
        ++shown;
        const auto it = last_shown.find(ev.user_id);
        if (it != last_shown.end()) {
            CHECK(ev.time_days - it->second >= 7.0);
        }
        last_shown[ev.user_id] = ev.time_days;
    }
    CHECK(shown > 100);  // the scan must actually exercise repeats
}

TEST_CASE("ineligible users are suppressed with the right reason") {
    const auto meetings = build_meeting_stream(300, 50, 5.0, 30.0, 4);
    SchedulerConfig cfg;
    cfg.trigger_rate = 1.0;
    cfg.eligible = [](const std::string& user) { return user != "u1"; };
    const auto log = run_scheduler(meetings, cfg);
    bool saw_u1 = false;
    for (const auto& ev : log) {
        if (ev.user_id == "u1") {
            saw_u1 = true;
            CHECK_FALSE(ev.shown);
            CHECK(ev.suppressed_reason == SuppressedReason::ineligible);
        }
    }
    CHECK(saw_u1);
}

TEST_CASE("response times are clamped to the survey timeout") {
    const auto meetings = build_meeting_stream(2000, 200, 5.0, 60.0, 5);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.5;
    cfg.survey_timeout_s = 30.0;
    RespondentModel resp;
    resp.response_rate = 0.9;
    resp.response_time_log_sd = 1.5;  // fat tail to force clamping
    const auto log = run_scheduler(meetings, cfg, resp);
    bool clamped = false;
    for (const auto& ev : log) {
        if (!ev.responded) continue;
        CHECK(*ev.response_time_s <= 30.0);
        clamped = clamped || *ev.response_time_s == 30.0;
    }
    CHECK(clamped);
}

TEST_CASE("unordered meeting streams are rejected") {
    std::vector<SimMeeting> meetings{{2.0, "m1", {"u1"}}, {1.0, "m2", {"u2"}}};
    CHECK_THROWS_AS(run_scheduler(meetings, {}), DataError);
}

TEST_CASE("entropy matches known values") {
    CHECK_THAT(entropy(std::vector<double>{0.2, 0.2, 0.2, 0.2, 0.2}),
               Catch::Matchers::WithinAbs(std::log2(5.0), 1e-12));
    CHECK(entropy(std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.0}) == 0.0);
    // Star distribution (0.01, 0.01, 0.03, 0.12, 0.82):
    // -(2*0.01*log2(0.01) + 0.03*log2(0.03) + 0.12*log2(0.12) + 0.82*log2(0.82))
    // = 0.8865 bits. The rounded frequencies sum to 0.99 and are used as-is.
    CHECK_THAT(entropy(std::vector<double>{0.01, 0.01, 0.03, 0.12, 0.82}),
               Catch::Matchers::WithinAbs(0.8865, 5e-4));
    CHECK_THROWS_AS(entropy(std::vector<double>{0.0, 0.0, 0.0}), DataError);
    CHECK_THROWS_AS(entropy(std::vector<long>{1, 1, 3, 12, 82}), DataError);
}

TEST_CASE("perfect meeting rate counts only (5,5)") {
    CHECK(perfect_meeting_rate({{5, 5}, {5, 5}}) == 1.0);
    CHECK(perfect_meeting_rate({{5, 5}, {5, 4}}) == 0.5);
    CHECK(perfect_meeting_rate({{4, 4}, {1, 5}}) == 0.0);
    CHECK_THROWS_AS(perfect_meeting_rate({}), DataError);
}

TEST_CASE("scheduler PMR tracks the configured skew target") {
    const auto meetings = build_meeting_stream(8000, 2000, 5.0, 180.0, 6);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.5;
    cfg.seed = 8;
    RespondentModel resp;
    resp.response_rate = 0.8;
    resp.pmr_base = 0.50;
    const auto log = run_scheduler(meetings, cfg, resp);
    const auto rep = analyze_skew(log);
    CHECK(rep.pmr > 0.45);
    CHECK(rep.pmr < 0.55);
    CHECK(rep.responded > 2000);
}

TEST_CASE("Fisher exact test matches hand-computed tables") {
    CHECK(fisher_exact_2x2(5, 5, 5, 5) == 1.0);
    // Exhaustive hypergeometric oracle: 2 * C(10,10)*C(10,0)/C(20,10)
    // = 2/184756 = 1.0824e-5.
    CHECK_THAT(fisher_exact_2x2(10, 0, 0, 10),
               Catch::Matchers::WithinAbs(2.0 / 184756.0, 1e-12));
    CHECK_THROWS_AS(fisher_exact_2x2(0, 0, 3, 4), DataError);
    CHECK_THROWS_AS(fisher_exact_2x2(-1, 2, 3, 4), DataError);
}

TEST_CASE("identical 2xK rows give a near-1 Monte Carlo p") {
    const std::vector<std::vector<long>> table{{20, 30, 10, 25, 15}, {20, 30, 10, 25, 15}};
    CHECK(distribution_test_2xK(table, 20000, 1) > 0.99);
}

TEST_CASE("a shifted 2xK distribution is detected") {
    const std::vector<std::vector<long>> table{{100, 50, 10}, {10, 50, 100}};
    CHECK(distribution_test_2xK(table, 20000, 2) < 0.001);
    CHECK_THROWS_AS(distribution_test_2xK({{1, 2}}, 100), DataError);
}

TEST_CASE("Wilson intervals bracket the rate and tighten with n") {
    const auto [lo1, hi1] = wilson_interval(5, 10);
    CHECK(lo1 < 0.5);
    CHECK(hi1 > 0.5);
    const auto [lo2, hi2] = wilson_interval(500, 1000);
    CHECK(hi2 - lo2 < hi1 - lo1);
    CHECK_THROWS_AS(wilson_interval(0, 0), DataError);
}

TEST_CASE("single-group rates equal the pooled rate") {
    const auto rates = grouped_rates({{"g", true}, {"g", false}, {"g", true}, {"g", true}});
    REQUIRE(rates.groups.size() == 1);
    CHECK(rates.groups[0].rate == 0.75);
    CHECK(rates.empty_groups.empty());
}

TEST_CASE("expected groups with no rows are reported as empty") {
    const auto rates = grouped_rates({{"a", true}}, {"a", "b"});
    REQUIRE(rates.empty_groups.size() == 1);
    CHECK(rates.empty_groups[0] == "b");
}

TEST_CASE("a planted fatigue effect separates the recency buckets") {
    const auto meetings = build_meeting_stream(20000, 600, 6.0, 120.0, 10);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.6;
    cfg.cooldown_days = 0.0;  // allow close repeat exposures
    cfg.seed = 11;
    RespondentModel resp;
    resp.response_rate = 0.8;
    resp.pmr_base = 0.40;
    resp.pmr_recent_boost = 0.25;  // PMR rises for exposures < 7 days apart
    const auto log = run_scheduler(meetings, cfg, resp);
    const auto rates = pmr_by_recency(log, 7.0);
    REQUIRE(rates.empty_groups.empty());
    const GroupRate* under = nullptr;
    const GroupRate* over = nullptr;
    for (const auto& g : rates.groups) {
        (g.group == "under_threshold" ? under : over) = &g;
    }
    REQUIRE(under != nullptr);
    REQUIRE(over != nullptr);
    // Difference detected: the 95% CIs do not overlap, so the CI of the
    // difference excludes 0.
    CHECK(under->ci_low > over->ci_high);
}

TEST_CASE("equal planted behavior keeps the recency buckets overlapping") {
    int overlapping = 0;
    const int runs = 10;
    for (int run = 0; run < runs; ++run) {
        const auto meetings = build_meeting_stream(6000, 400, 6.0, 90.0, 40 + run);
        SchedulerConfig cfg;
        cfg.trigger_rate = 0.5;
        cfg.cooldown_days = 0.0;
        cfg.seed = 50 + run;
        RespondentModel resp;
        resp.response_rate = 0.8;
        resp.pmr_base = 0.45;
        const auto log = run_scheduler(meetings, cfg, resp);
        const auto rates = pmr_by_recency(log, 7.0);
        if (rates.groups.size() != 2) continue;
        const auto& a = rates.groups[0];
        const auto& b = rates.groups[1];
        overlapping += a.ci_low <= b.ci_high && b.ci_low <= a.ci_high;
    }
    CHECK(overlapping >= static_cast<int>(runs * 0.9));
}

TEST_CASE("cohort assignment follows the documented thresholds and precedence") {
    UserHistory h;
    h.rated_fraction = 0.10;
    h.meetings_count = 30;
    h.avg_meeting_size = 5.0;
    CHECK(assign_cohort(h) == Cohort::cohort0);

    h.rated_fraction = 0.50;
    CHECK(assign_cohort(h) == Cohort::cohort1);

    h.meetings_count = 100;
    h.avg_meeting_size = 15.0;
    CHECK(assign_cohort(h) == Cohort::cohort2);

    // Both cohort1 and cohort2 conditions: meeting size dominates.
    h.meetings_count = 30;
    CHECK(assign_cohort(h) == Cohort::cohort2);

    h.avg_meeting_size = 5.0;
    h.meetings_count = 100;
    CHECK(assign_cohort(h) == Cohort::other);

    // Boundaries: rated fraction 0.30 is not cohort0; size 10 is cohort2.
    h.rated_fraction = 0.30;
    h.avg_meeting_size = 10.0;
    CHECK(assign_cohort(h) == Cohort::cohort2);
}

TEST_CASE("skew analysis of an all-perfect log") {
    SimEventLog log;
    for (int i = 0; i < 10; ++i) {
        SimEvent ev;
        ev.time_days = i;
        ev.meeting_id = "m" + std::to_string(i);
        ev.user_id = "u" + std::to_string(i);
        ev.shown = true;
        ev.responded = true;
        ev.effective_stars = 5;
        ev.inclusive_stars = 5;
        log.push_back(ev);
    }
    const auto rep = analyze_skew(log);
    CHECK(rep.pmr == 1.0);
    CHECK(rep.effective_entropy_bits == 0.0);
    CHECK(rep.inclusive_entropy_bits == 0.0);
    CHECK(rep.response_rate == 1.0);
}

TEST_CASE("event logs round-trip through JSONL") {
    const auto meetings = build_meeting_stream(200, 50, 5.0, 20.0, 12);
    SchedulerConfig cfg;
    cfg.trigger_rate = 0.4;
    cfg.seed = 13;
    RespondentModel resp;
    resp.response_rate = 0.5;
    const auto log = run_scheduler(meetings, cfg, resp);
    const std::string serialized = serialize_event_log(log);
    std::istringstream stream(serialized);
    SimEventLog restored;
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty()) restored.push_back(event_from_json(nlohmann::json::parse(line)));
    }
    REQUIRE(restored.size() == log.size());
    CHECK(serialize_event_log(restored) == serialized);
}
