#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"

namespace eim {

struct SchedulerConfig {
    double trigger_rate = 0.10;
    double cooldown_days = 7.0;
    double survey_timeout_s = 30.0;
    std::function<bool(const std::string& user_id)> eligible;  // null = everyone
    std::uint64_t seed = 0;
};

// How a shown user answers: response odds and the star-pair distribution,
// with an optional recency effect (PMR boost for exposures closer together
// than fatigue_threshold_days).
struct RespondentModel {
    double response_rate = 0.25;
    double pmr_base = 0.50;           // probability of a (5,5) response
    double pmr_recent_boost = 0.0;    // added when re-surveyed within the threshold
    double fatigue_threshold_days = 7.0;
    // Star distribution for each question when the response is not (5,5).
    std::array<double, 5> star_weights{0.02, 0.03, 0.10, 0.35, 0.50};
    double response_time_log_mean = 2.2;
    double response_time_log_sd = 0.6;
};

enum class SuppressedReason { not_triggered, cooldown, ineligible };

struct SimMeeting {
    double time_days = 0.0;
    std::string meeting_id;
    std::vector<std::string> attendees;
};

struct SimEvent {
    double time_days = 0.0;
    std::string meeting_id;
    std::string user_id;
    bool shown = false;
    std::optional<SuppressedReason> suppressed_reason;
    bool responded = false;
    std::optional<int> effective_stars;
    std::optional<int> inclusive_stars;
    std::optional<double> response_time_s;
    std::optional<double> days_since_last_shown;
};

using SimEventLog = std::vector<SimEvent>;

// Meeting-level trigger decision, user-level cool-down: a triggered meeting
// shows the survey to each attendee not in cool-down and eligible.
inline SimEventLog run_scheduler(const std::vector<SimMeeting>& meetings,
                                 const SchedulerConfig& config,
                                 const RespondentModel& respondent = {}) {
    if (!(config.trigger_rate >= 0.0 && config.trigger_rate <= 1.0)) {
        throw DataError("trigger_rate must be in [0,1]");
    }
    if (config.cooldown_days < 0.0) throw DataError("cooldown_days must be >= 0");
    for (std::size_t i = 1; i < meetings.size(); ++i) {
        if (meetings[i].time_days < meetings[i - 1].time_days) {
            throw DataError("meeting stream must be time-ordered");
        }
    }

    std::mt19937_64 trigger_rng(substream_seed(config.seed, "scheduler-trigger"));
    std::mt19937_64 response_rng(substream_seed(config.seed, "scheduler-response"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::unordered_map<std::string, double> last_shown;

    SimEventLog log;
    for (const auto& meeting : meetings) {
        const bool triggered = unif(trigger_rng) < config.trigger_rate;
        for (const auto& user : meeting.attendees) {
            SimEvent ev;
            ev.time_days = meeting.time_days;
            ev.meeting_id = meeting.meeting_id;
            ev.user_id = user;
            if (!triggered) {
                ev.suppressed_reason = SuppressedReason::not_triggered;
                log.push_back(std::move(ev));
                continue;
            }
            if (config.eligible && !config.eligible(user)) {
                ev.suppressed_reason = SuppressedReason::ineligible;
                log.push_back(std::move(ev));
                continue;
            }
            const auto it = last_shown.find(user);
            if (it != last_shown.end()) {
                ev.days_since_last_shown = meeting.time_days - it->second;
                if (*ev.days_since_last_shown < config.cooldown_days) {
                    ev.suppressed_reason = SuppressedReason::cooldown;
                    log.push_back(std::move(ev));
                    continue;
                }
            }
            ev.shown = true;
            last_shown[user] = meeting.time_days;

            if (unif(response_rng) < respondent.response_rate) {
                ev.responded = true;
                double pmr = respondent.pmr_base;
                if (ev.days_since_last_shown &&
                    *ev.days_since_last_shown < respondent.fatigue_threshold_days) {
                    pmr += respondent.pmr_recent_boost;
                }
                if (unif(response_rng) < std::clamp(pmr, 0.0, 1.0)) {
                    ev.effective_stars = 5;
                    ev.inclusive_stars = 5;
                } else {
                    auto draw_star = [&]() {
                        double total = 0.0;
                        for (double w : respondent.star_weights) total += w;
                        double u = unif(response_rng) * total;
                        for (int s = 0; s < 5; ++s) {
                            u -= respondent.star_weights[static_cast<std::size_t>(s)];
                            if (u <= 0.0) return s + 1;
                        }
                        return 5;
                    };
                    do {
                        ev.effective_stars = draw_star();
                        ev.inclusive_stars = draw_star();
                    } while (*ev.effective_stars == 5 && *ev.inclusive_stars == 5);
                }
                const double t = std::exp(respondent.response_time_log_mean +
                                          respondent.response_time_log_sd * normal(response_rng));
                ev.response_time_s = std::min(t, config.survey_timeout_s);
            }
            log.push_back(std::move(ev));
        }
    }
    return log;
}

// Shannon entropy of a relative-frequency histogram, in bits. Cells are taken
// as the distribution itself (plug-in estimate); published frequencies rounded
// to a total slightly under 1 are accepted as-is rather than renormalized.
// Count histograms must be divided by their total before calling.
template <typename Cell>
double entropy(const std::vector<Cell>& histogram) {
    double total = 0.0;
    for (Cell c : histogram) {
        const double v = static_cast<double>(c);
        if (v < 0.0) throw DataError("entropy: cells must be nonnegative");
        if (v > 1.0) throw DataError("entropy: cells must be relative frequencies in [0, 1]");
        total += v;
    }
    if (total <= 0.0) throw DataError("entropy: zero total");
    double h = 0.0;
    for (Cell c : histogram) {
        const double v = static_cast<double>(c);
        if (v > 0.0) h -= v * std::log2(v);
    }
    return h;
}

// Fraction of responses rating 5 stars on both questions.
inline double perfect_meeting_rate(const std::vector<std::pair<int, int>>& responses) {
    if (responses.empty()) throw DataError("perfect_meeting_rate: no responses");
    std::size_t perfect = 0;
    for (const auto& [e, i] : responses) perfect += (e == 5 && i == 5);
    return static_cast<double>(perfect) / static_cast<double>(responses.size());
}

// Two-sided Fisher exact test on [[a,b],[c,d]]: sum of hypergeometric
// probabilities not exceeding the observed table's probability.
inline double fisher_exact_2x2(long a, long b, long c, long d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw DataError("fisher_exact_2x2: negative count");
    const long r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
        throw DataError("fisher_exact_2x2: degenerate table (zero margin)");
    }
    const long n = r1 + r2;
    auto log_prob = [&](long x) {
        // P(X = x) for X ~ Hypergeom(n, c1, r1); table [[x, r1-x],[c1-x, ...]].
        return std::lgamma(r1 + 1.0) + std::lgamma(r2 + 1.0) + std::lgamma(c1 + 1.0) +
               std::lgamma(c2 + 1.0) - std::lgamma(n + 1.0) - std::lgamma(x + 1.0) -
               std::lgamma(r1 - x + 1.0) - std::lgamma(c1 - x + 1.0) -
               std::lgamma(r2 - c1 + x + 1.0);
    };
    const double lp_obs = log_prob(a);
    const long lo = std::max(0L, c1 - r2);
    const long hi = std::min(r1, c1);
    double p = 0.0;
    for (long x = lo; x <= hi; ++x) {
        const double lp = log_prob(x);
        if (lp <= lp_obs + 1e-9) p += std::exp(lp);
    }
    return std::min(p, 1.0);
}

// Monte Carlo permutation test for a 2xK table with fixed margins; statistic
// is the conditional probability of the table (Fisher-style).
inline double distribution_test_2xK(const std::vector<std::vector<long>>& table,
                                    std::size_t mc_iterations = 100000, std::uint64_t seed = 0) {
    if (table.size() != 2 || table[0].size() != table[1].size() || table[0].size() < 2) {
        throw DataError("distribution_test_2xK: table must be 2 x K with K >= 2");
    }
    const std::size_t k = table[0].size();
    std::vector<long> col_totals(k, 0);
    long r1 = 0, total = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (table[0][j] < 0 || table[1][j] < 0) {
            throw DataError("distribution_test_2xK: negative count");
        }
        col_totals[j] = table[0][j] + table[1][j];
        r1 += table[0][j];
        total += col_totals[j];
    }
    const long r2 = total - r1;
    if (r1 == 0 || r2 == 0 || total == 0) {
        throw DataError("distribution_test_2xK: degenerate table (zero margin)");
    }

    auto log_table_prob = [&](const std::vector<long>& row1) {
        // log of prod_j C(col_j, x_j) (the total-margin terms are constant).
        double lp = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            lp += std::lgamma(col_totals[j] + 1.0) - std::lgamma(row1[j] + 1.0) -
                  std::lgamma(col_totals[j] - row1[j] + 1.0);
        }
        return lp;
    };
    const double lp_obs = log_table_prob(table[0]);

    // Pool all items with their column label, draw r1 of them for row 1.
    std::vector<std::uint16_t> pool;
    pool.reserve(static_cast<std::size_t>(total));
    for (std::size_t j = 0; j < k; ++j) {
        pool.insert(pool.end(), static_cast<std::size_t>(col_totals[j]),
                    static_cast<std::uint16_t>(j));
    }
    std::mt19937_64 rng(substream_seed(seed, "mc-permutation"));
    std::size_t at_least_as_extreme = 0;
    std::vector<long> row1(k);
    for (std::size_t it = 0; it < mc_iterations; ++it) {
        // Partial Fisher-Yates: the first r1 entries become row 1.
        for (long i = 0; i < r1; ++i) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                            pool.size() - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
        }
        std::fill(row1.begin(), row1.end(), 0L);
        for (long i = 0; i < r1; ++i) ++row1[pool[static_cast<std::size_t>(i)]];
        if (log_table_prob(row1) <= lp_obs + 1e-9) ++at_least_as_extreme;
    }
    return static_cast<double>(at_least_as_extreme + 1) / static_cast<double>(mc_iterations + 1);
}

struct GroupRate {
    std::string group;
    std::size_t n = 0;
    std::size_t successes = 0;
    double rate = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

// Wilson score interval at 95%.
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n) {
    if (n == 0) throw DataError("wilson_interval: empty group");
    const double z = 1.959963984540054;
    const double phat = static_cast<double>(successes) / static_cast<double>(n);
    const double nn = static_cast<double>(n);
    const double denom = 1.0 + z * z / nn;
    const double center = (phat + z * z / (2.0 * nn)) / denom;
    const double half =
        z * std::sqrt(phat * (1.0 - phat) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// Per-group binary metric rate with 95% Wilson intervals. Groups come from
// the supplied keys; an expected key with no rows is reported in
// `empty_groups` rather than as a rate.
struct GroupedRates {
    std::vector<GroupRate> groups;
    std::vector<std::string> empty_groups;
};

inline GroupedRates grouped_rates(const std::vector<std::pair<std::string, bool>>& observations,
                                  const std::vector<std::string>& expected_groups = {}) {
    std::map<std::string, std::pair<std::size_t, std::size_t>> acc;  // group -> (n, successes)
    for (const auto& [group, success] : observations) {
        auto& [n, s] = acc[group];
        ++n;
        s += success;
    }
    GroupedRates out;
    for (const auto& [group, ns] : acc) {
        GroupRate g;
        g.group = group;
        g.n = ns.first;
        g.successes = ns.second;
        g.rate = static_cast<double>(g.successes) / static_cast<double>(g.n);
        std::tie(g.ci_low, g.ci_high) = wilson_interval(g.successes, g.n);
        out.groups.push_back(std::move(g));
    }
    for (const auto& expected : expected_groups) {
        if (!acc.count(expected)) out.empty_groups.push_back(expected);
    }
    return out;
}

enum class Cohort { cohort0, cohort1, cohort2, other };

struct CohortThresholds {
    std::size_t meetings_count = 56;
    double rated_fraction = 0.30;
    double hosted_fraction = 0.20;
    double avg_meeting_size = 10.0;
};

struct UserHistory {
    std::size_t meetings_count = 0;
    double rated_fraction = 0.0;
    double hosted_fraction = 0.0;
    double avg_meeting_size = 0.0;
};

// Behavioral cohorts over a one-month lookback. When both the cohort1 and
// cohort2 conditions hold, meeting size dominates (cohort2).
inline Cohort assign_cohort(const UserHistory& history, const CohortThresholds& t = {}) {
    if (history.rated_fraction < t.rated_fraction) return Cohort::cohort0;
    if (history.avg_meeting_size >= t.avg_meeting_size) return Cohort::cohort2;
    if (history.meetings_count < t.meetings_count) return Cohort::cohort1;
    return Cohort::other;
}

struct SkewReport {
    std::size_t shown = 0;
    std::size_t responded = 0;
    double response_rate = 0.0;
    std::array<std::size_t, 5> effective_histogram{};
    std::array<std::size_t, 5> inclusive_histogram{};
    double pmr = 0.0;
    double effective_entropy_bits = 0.0;
    double inclusive_entropy_bits = 0.0;
    std::map<std::string, GroupedRates> grouped;
};

inline SkewReport analyze_skew(const SimEventLog& log) {
    SkewReport rep;
    std::vector<std::pair<int, int>> responses;
    for (const auto& ev : log) {
        if (!ev.shown) continue;
        ++rep.shown;
        if (!ev.responded) continue;
        ++rep.responded;
        ++rep.effective_histogram[static_cast<std::size_t>(*ev.effective_stars - 1)];
        ++rep.inclusive_histogram[static_cast<std::size_t>(*ev.inclusive_stars - 1)];
        responses.emplace_back(*ev.effective_stars, *ev.inclusive_stars);
    }
    if (rep.shown == 0) throw DataError("analyze_skew: log has no shown events");
    rep.response_rate = static_cast<double>(rep.responded) / static_cast<double>(rep.shown);
    if (!responses.empty()) {
        rep.pmr = perfect_meeting_rate(responses);
        auto frequencies = [&](const auto& hist) {
            std::vector<double> f(hist.begin(), hist.end());
            for (double& v : f) v /= static_cast<double>(responses.size());
            return f;
        };
        rep.effective_entropy_bits = entropy(frequencies(rep.effective_histogram));
        rep.inclusive_entropy_bits = entropy(frequencies(rep.inclusive_histogram));
    }
    return rep;
}

inline nlohmann::json to_json(const GroupedRates& rates) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : rates.groups) {
        groups.push_back({{"group", g.group},
                          {"n", g.n},
                          {"successes", g.successes},
                          {"rate", g.rate},
                          {"ci_low", g.ci_low},
                          {"ci_high", g.ci_high}});
    }
    return nlohmann::json{{"groups", groups}, {"empty_groups", rates.empty_groups}};
}

inline nlohmann::json to_json(const SkewReport& rep) {
    nlohmann::json grouped = nlohmann::json::object();
    for (const auto& [key, rates] : rep.grouped) grouped[key] = to_json(rates);
    return nlohmann::json{{"shown", rep.shown},
                          {"responded", rep.responded},
                          {"response_rate", rep.response_rate},
                          {"effective_histogram", rep.effective_histogram},
                          {"inclusive_histogram", rep.inclusive_histogram},
                          {"pmr", rep.pmr},
                          {"effective_entropy_bits", rep.effective_entropy_bits},
                          {"inclusive_entropy_bits", rep.inclusive_entropy_bits},
                          {"grouped", grouped}};
}

inline nlohmann::json to_json(const SimEvent& ev) {
    nlohmann::json j{{"time_days", ev.time_days},
                     {"meeting_id", ev.meeting_id},
                     {"user_id", ev.user_id},
                     {"shown", ev.shown},
                     {"responded", ev.responded}};
    if (ev.suppressed_reason) {
        const char* reason = *ev.suppressed_reason == SuppressedReason::not_triggered ? "not_triggered"
                             : *ev.suppressed_reason == SuppressedReason::cooldown    ? "cooldown"
                                                                                      : "ineligible";
        j["suppressed_reason"] = reason;
    }
    if (ev.effective_stars) j["effective_stars"] = *ev.effective_stars;
    if (ev.inclusive_stars) j["inclusive_stars"] = *ev.inclusive_stars;
    if (ev.response_time_s) j["response_time_s"] = *ev.response_time_s;
    if (ev.days_since_last_shown) j["days_since_last_shown"] = *ev.days_since_last_shown;
    return j;
}

}  // namespace eim
