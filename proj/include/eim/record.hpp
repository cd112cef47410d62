#pragma once

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"

namespace eim {

inline constexpr std::size_t kQualityStatCount = 40;

struct ReliabilityFlags {
    bool call_drop = false;
    bool one_way_audio = false;
    bool reconnect_failure = false;
    bool media_failure = false;
    bool microphone_failure = false;

    bool any() const {
        return call_drop || one_way_audio || reconnect_failure || media_failure ||
               microphone_failure;
    }
    bool operator==(const ReliabilityFlags&) const = default;
};

// One attendee's telemetry plus optional survey response for one meeting.
struct AttendeeMeetingRecord {
    std::string meeting_id;
    std::string user_id;
    std::string org_id;
    int meeting_size = 1;
    double call_duration_min = 0.0;
    bool recurring = false;
    int start_hour_local = 0;   // 0-23
    int day_of_week = 0;        // 0-6, 0 = Monday
    double nef_normalized = 0.0;
    double video_duration_fraction = 0.0;
    double screenshare_fraction = 0.0;
    bool headset = false;
    ReliabilityFlags reliability_flags;
    std::vector<double> quality_stats;  // exactly 40 entries
    std::optional<int> effective_stars;  // 1-5
    std::optional<int> inclusive_stars;  // 1-5
    std::optional<double> response_time_s;
    int calls_same_day = 1;
    double minutes_in_meetings_same_day = 0.0;

    bool responded() const { return effective_stars.has_value(); }
    bool operator==(const AttendeeMeetingRecord&) const = default;
};

// Binary outcomes derived per record. effective/inclusive are absent when the
// survey was not answered; participation is always computable from telemetry.
struct EimOutcomes {
    std::optional<int> effective;
    std::optional<int> inclusive;
    int participation = 0;

    bool operator==(const EimOutcomes&) const = default;
};

struct FilterPolicy {
    int min_participants = 3;        // keep iff meeting_size > 2
    double max_duration_min = 150.0; // keep iff call_duration_min < 150
    double min_response_time_s = 4.0;// keep iff response absent or time > 4
};

struct FilterReport {
    std::size_t kept = 0;
    std::size_t dropped_participants = 0;
    std::size_t dropped_duration = 0;
    std::size_t dropped_response_time = 0;

    std::size_t total() const {
        return kept + dropped_participants + dropped_duration + dropped_response_time;
    }
};

namespace detail {

inline void check_fraction(double v, const std::string& field, std::size_t line_no) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError("line " + std::to_string(line_no) + ": field '" + field +
                        "' out of range [0,1]: " + std::to_string(v));
    }
}

inline void check_stars(int v, const std::string& field, std::size_t line_no) {
    if (v < 1 || v > 5) {
        throw DataError("line " + std::to_string(line_no) + ": field '" + field +
                        "' must be in 1..5, got " + std::to_string(v));
    }
}

template <typename T>
T require(const nlohmann::json& j, const std::string& key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end()) {
        throw DataError("line " + std::to_string(line_no) + ": missing required field '" +
                        key + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw DataError("line " + std::to_string(line_no) + ": field '" + key +
                        "' has wrong type");
    }
}

}  // namespace detail

inline nlohmann::json to_json(const AttendeeMeetingRecord& r) {
    nlohmann::json j;
    j["meeting_id"] = r.meeting_id;
    j["user_id"] = r.user_id;
    j["org_id"] = r.org_id;
    j["meeting_size"] = r.meeting_size;
    j["call_duration_min"] = r.call_duration_min;
    j["recurring"] = r.recurring;
    j["start_hour_local"] = r.start_hour_local;
    j["day_of_week"] = r.day_of_week;
    j["nef_normalized"] = r.nef_normalized;
    j["video_duration_fraction"] = r.video_duration_fraction;
    j["screenshare_fraction"] = r.screenshare_fraction;
    j["headset"] = r.headset;
    j["reliability_flags"] = {
        {"call_drop", r.reliability_flags.call_drop},
        {"one_way_audio", r.reliability_flags.one_way_audio},
        {"reconnect_failure", r.reliability_flags.reconnect_failure},
        {"media_failure", r.reliability_flags.media_failure},
        {"microphone_failure", r.reliability_flags.microphone_failure},
    };
    j["quality_stats"] = r.quality_stats;
    if (r.effective_stars) j["effective_stars"] = *r.effective_stars;
    if (r.inclusive_stars) j["inclusive_stars"] = *r.inclusive_stars;
    if (r.response_time_s) j["response_time_s"] = *r.response_time_s;
    j["calls_same_day"] = r.calls_same_day;
    j["minutes_in_meetings_same_day"] = r.minutes_in_meetings_same_day;
    return j;
}

inline std::string serialize_record(const AttendeeMeetingRecord& r) {
    return to_json(r).dump();
}

inline AttendeeMeetingRecord parse_record_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    using detail::require;
    AttendeeMeetingRecord r;
    r.meeting_id = require<std::string>(j, "meeting_id", line_no);
    r.user_id = require<std::string>(j, "user_id", line_no);
    r.org_id = require<std::string>(j, "org_id", line_no);
    r.meeting_size = require<int>(j, "meeting_size", line_no);
    if (r.meeting_size < 1) {
        throw DataError("line " + std::to_string(line_no) + ": field 'meeting_size' must be >= 1");
    }
    r.call_duration_min = require<double>(j, "call_duration_min", line_no);
    if (r.call_duration_min < 0.0) {
        throw DataError("line " + std::to_string(line_no) +
                        ": field 'call_duration_min' must be >= 0");
    }
    r.recurring = require<bool>(j, "recurring", line_no);
    r.start_hour_local = require<int>(j, "start_hour_local", line_no);
    if (r.start_hour_local < 0 || r.start_hour_local > 23) {
        throw DataError("line " + std::to_string(line_no) +
                        ": field 'start_hour_local' must be in 0..23");
    }
    r.day_of_week = require<int>(j, "day_of_week", line_no);
    if (r.day_of_week < 0 || r.day_of_week > 6) {
        throw DataError("line " + std::to_string(line_no) + ": field 'day_of_week' must be in 0..6");
    }
    r.nef_normalized = require<double>(j, "nef_normalized", line_no);
    detail::check_fraction(r.nef_normalized, "nef_normalized", line_no);
    r.video_duration_fraction = require<double>(j, "video_duration_fraction", line_no);
    detail::check_fraction(r.video_duration_fraction, "video_duration_fraction", line_no);
    r.screenshare_fraction = require<double>(j, "screenshare_fraction", line_no);
    detail::check_fraction(r.screenshare_fraction, "screenshare_fraction", line_no);
    r.headset = require<bool>(j, "headset", line_no);
    {
        auto f = require<nlohmann::json>(j, "reliability_flags", line_no);
        r.reliability_flags.call_drop = detail::require<bool>(f, "call_drop", line_no);
        r.reliability_flags.one_way_audio = detail::require<bool>(f, "one_way_audio", line_no);
        r.reliability_flags.reconnect_failure =
            detail::require<bool>(f, "reconnect_failure", line_no);
        r.reliability_flags.media_failure = detail::require<bool>(f, "media_failure", line_no);
        r.reliability_flags.microphone_failure =
            detail::require<bool>(f, "microphone_failure", line_no);
    }
    r.quality_stats = require<std::vector<double>>(j, "quality_stats", line_no);
    if (r.quality_stats.size() != kQualityStatCount) {
        throw DataError("line " + std::to_string(line_no) + ": field 'quality_stats' must have " +
                        std::to_string(kQualityStatCount) + " entries, got " +
                        std::to_string(r.quality_stats.size()));
    }
    if (j.contains("effective_stars")) {
        int s = require<int>(j, "effective_stars", line_no);
        detail::check_stars(s, "effective_stars", line_no);
        r.effective_stars = s;
    }
    if (j.contains("inclusive_stars")) {
        int s = require<int>(j, "inclusive_stars", line_no);
        detail::check_stars(s, "inclusive_stars", line_no);
        r.inclusive_stars = s;
    }
    if (r.effective_stars.has_value() != r.inclusive_stars.has_value()) {
        throw DataError("line " + std::to_string(line_no) +
                        ": effective_stars and inclusive_stars must be both present or both absent");
    }
    if (j.contains("response_time_s")) {
        double t = require<double>(j, "response_time_s", line_no);
        if (t < 0.0) {
            throw DataError("line " + std::to_string(line_no) +
                            ": field 'response_time_s' must be >= 0");
        }
        r.response_time_s = t;
    }
    r.calls_same_day = require<int>(j, "calls_same_day", line_no);
    if (r.calls_same_day < 1) {
        throw DataError("line " + std::to_string(line_no) + ": field 'calls_same_day' must be >= 1");
    }
    r.minutes_in_meetings_same_day = require<double>(j, "minutes_in_meetings_same_day", line_no);
    if (r.minutes_in_meetings_same_day < 0.0) {
        throw DataError("line " + std::to_string(line_no) +
                        ": field 'minutes_in_meetings_same_day' must be >= 0");
    }
    return r;
}

// Reads JSON Lines; blank lines are skipped. Errors carry 1-based line numbers.
inline std::vector<AttendeeMeetingRecord> parse_records(std::istream& in) {
    std::vector<AttendeeMeetingRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        out.push_back(parse_record_line(line, line_no));
    }
    return out;
}

// Keeps records passing all filters; a dropped record is counted under its first
// failing filter in the order participants -> duration -> response_time.
inline std::pair<std::vector<AttendeeMeetingRecord>, FilterReport> apply_filters(
    const std::vector<AttendeeMeetingRecord>& records, const FilterPolicy& policy = {}) {
    std::vector<AttendeeMeetingRecord> kept;
    FilterReport report;
    for (const auto& r : records) {
        if (r.meeting_size < policy.min_participants) {
            ++report.dropped_participants;
        } else if (r.call_duration_min >= policy.max_duration_min) {
            ++report.dropped_duration;
        } else if (r.response_time_s && *r.response_time_s <= policy.min_response_time_s) {
            ++report.dropped_response_time;
        } else {
            kept.push_back(r);
        }
    }
    report.kept = kept.size();
    return {std::move(kept), report};
}

inline nlohmann::json to_json(const FilterReport& rep) {
    return nlohmann::json{
        {"kept", rep.kept},
        {"dropped",
         {{"participants", rep.dropped_participants},
          {"duration", rep.dropped_duration},
          {"response_time", rep.dropped_response_time}}},
    };
}

// Effective/Inclusive are 1 for a 4- or 5-star rating, absent for non-response.
// Participation is 1 when the normalized speaking proxy exceeds 10%.
inline EimOutcomes derive_outcomes(const AttendeeMeetingRecord& r) {
    EimOutcomes o;
    if (r.effective_stars) o.effective = (*r.effective_stars >= 4) ? 1 : 0;
    if (r.inclusive_stars) o.inclusive = (*r.inclusive_stars >= 4) ? 1 : 0;
    o.participation = (r.nef_normalized > 0.10) ? 1 : 0;
    return o;
}

}  // namespace eim
