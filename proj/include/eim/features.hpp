#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/record.hpp"

namespace eim {

// Canonical binary feature names (graph-model vocabulary).
inline const std::string kSmallMeeting = "Small Meeting (8 or less)";
inline const std::string kShortCall = "Short Call (10min. or less)";
inline const std::string kVideoOver30 = "Video Duration > 30%";
inline const std::string kScreenShare = "ScreenShare";
inline const std::string kHeadset = "Headset";
inline const std::string kRecurring = "Recurring";
inline const std::string kQualityIssues = "Quality Issues";
inline const std::string kReliabilityIssues = "Reliability Issues";

enum class ThresholdDirection { greater, less_or_equal };

struct BinarizationRule {
    std::string source_field;
    double threshold = 0.0;
    ThresholdDirection direction = ThresholdDirection::greater;
    std::string feature_name;

    int apply(double value) const {
        return (direction == ThresholdDirection::greater ? value > threshold
                                                         : value <= threshold)
                   ? 1
                   : 0;
    }
};

// Per-record map feature name -> {0,1}; every record carries every feature.
struct BinaryFeatureSet {
    std::vector<std::string> feature_names;
    std::vector<std::vector<int>> values;  // values[row][feature]

    std::size_t rows() const { return values.size(); }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < feature_names.size(); ++i) {
            if (feature_names[i] == name) return i;
        }
        throw DataError("no feature named '" + name + "'");
    }

    std::vector<int> column(const std::string& name) const {
        const std::size_t j = index_of(name);
        std::vector<int> out(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i][j];
        return out;
    }
};

enum class ParticipationBin { all_100, mid_40_99, low_under_40 };

struct MeetingAggregate {
    std::string meeting_id;
    ParticipationBin participation_bin = ParticipationBin::low_under_40;
    std::optional<double> mean_effective;
    std::optional<double> mean_inclusive;
    int meeting_size = 0;
};

// Lift of x by y: P(x=1 | y=1) / P(x=1).
inline double compute_lift(const std::vector<int>& x, const std::vector<int>& y) {
    if (x.size() != y.size() || x.empty()) {
        throw DataError("compute_lift: series must be nonempty and equal length");
    }
    std::size_t nx = 0, ny = 0, nxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        nx += x[i] != 0;
        ny += y[i] != 0;
        nxy += (x[i] != 0 && y[i] != 0);
    }
    if (nx == 0 || ny == 0) {
        throw NumericalError("compute_lift: undefined lift, zero base rate");
    }
    const double p_x = static_cast<double>(nx) / static_cast<double>(x.size());
    const double p_x_given_y = static_cast<double>(nxy) / static_cast<double>(ny);
    return p_x_given_y / p_x;
}

// Picks the grid threshold whose induced indicator maximizes lift of the
// outcome. Ties go to the value closest to the grid median, then to the
// smaller threshold.
inline BinarizationRule scan_threshold(const std::vector<double>& values,
                                       const std::vector<int>& outcome,
                                       const std::vector<double>& grid,
                                       ThresholdDirection direction,
                                       const std::string& source_field = "",
                                       const std::string& feature_name = "") {
    if (grid.empty()) throw DataError("scan_threshold: empty grid");
    if (values.size() != outcome.size() || values.empty()) {
        throw DataError("scan_threshold: series must be nonempty and equal length");
    }
    for (std::size_t k = 1; k < grid.size(); ++k) {
        if (grid[k] <= grid[k - 1]) throw DataError("scan_threshold: grid must be ascending");
    }
    const double median = grid[grid.size() / 2];

    double best_lift = -1.0;
    double best_t = 0.0;
    bool found = false;
    for (double t : grid) {
        BinarizationRule candidate{source_field, t, direction, feature_name};
        std::vector<int> indicator(values.size());
        std::size_t ones = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            indicator[i] = candidate.apply(values[i]);
            ones += indicator[i];
        }
        if (ones == 0 || ones == values.size()) continue;  // degenerate indicator
        double lift;
        try {
            lift = compute_lift(outcome, indicator);
        } catch (const NumericalError&) {
            continue;
        }
        bool better = false;
        if (!found || lift > best_lift + 1e-12) {
            better = true;
        } else if (lift > best_lift - 1e-12) {
            const double d_new = std::abs(t - median);
            const double d_old = std::abs(best_t - median);
            if (d_new < d_old - 1e-12) better = true;
            // equal distance: keep the smaller t (grid is ascending, so the
            // incumbent is already the smaller one)
        }
        if (better) {
            best_lift = lift;
            best_t = t;
            found = true;
        }
    }
    if (!found) {
        throw NumericalError("scan_threshold: all grid points yield degenerate indicators");
    }
    return BinarizationRule{source_field, best_t, direction, feature_name};
}

// 1 if the call involves any reliability problem.
inline int composite_reliability(const AttendeeMeetingRecord& r) {
    return r.reliability_flags.any() ? 1 : 0;
}

// Pluggable probability model over the 40 telemetry quality statistics.
class QualityModel {
public:
    virtual ~QualityModel() = default;
    virtual double predict_probability(const std::vector<double>& quality_stats) const = 0;
};

// Fallback used when no trained classifier is supplied: thresholds one stat.
class ThresholdQualityModel : public QualityModel {
public:
    ThresholdQualityModel(std::size_t stat_index, double threshold)
        : stat_index_(stat_index), threshold_(threshold) {}
    double predict_probability(const std::vector<double>& stats) const override {
        if (stat_index_ >= stats.size()) throw DataError("quality stat index out of range");
        return stats[stat_index_] > threshold_ ? 1.0 : 0.0;
    }

private:
    std::size_t stat_index_;
    double threshold_;
};

inline double quality_issue_probability(const AttendeeMeetingRecord& r, const QualityModel& model) {
    if (r.quality_stats.size() != kQualityStatCount) {
        throw DataError("record quality_stats must have 40 entries");
    }
    return model.predict_probability(r.quality_stats);
}

inline int quality_issue_flag(const AttendeeMeetingRecord& r, const QualityModel& model,
                              double cutoff = 0.5) {
    return quality_issue_probability(r, model) > cutoff ? 1 : 0;
}

// Meeting-level aggregate: participation bin over attendees plus mean ratings
// over available responses.
inline MeetingAggregate aggregate_meeting(const std::vector<AttendeeMeetingRecord>& group) {
    if (group.empty()) throw DataError("aggregate_meeting: empty group");
    MeetingAggregate agg;
    agg.meeting_id = group.front().meeting_id;
    agg.meeting_size = group.front().meeting_size;
    std::size_t participated = 0;
    double sum_eff = 0.0, sum_inc = 0.0;
    std::size_t n_rated = 0;
    for (const auto& r : group) {
        if (r.meeting_id != agg.meeting_id) {
            throw DataError("aggregate_meeting: records span multiple meetings");
        }
        const auto outcomes = derive_outcomes(r);
        participated += outcomes.participation;
        if (outcomes.effective) {
            sum_eff += *outcomes.effective;
            sum_inc += *outcomes.inclusive;
            ++n_rated;
        }
    }
    const double fraction = static_cast<double>(participated) / static_cast<double>(group.size());
    if (fraction >= 1.0) {
        agg.participation_bin = ParticipationBin::all_100;
    } else if (fraction >= 0.40) {
        agg.participation_bin = ParticipationBin::mid_40_99;
    } else {
        agg.participation_bin = ParticipationBin::low_under_40;
    }
    if (n_rated > 0) {
        agg.mean_effective = sum_eff / static_cast<double>(n_rated);
        agg.mean_inclusive = sum_inc / static_cast<double>(n_rated);
    }
    return agg;
}

struct FeaturizerOptions {
    double video_threshold = 0.30;
    double screenshare_threshold = 0.10;
    int small_meeting_max = 8;
    double short_call_max_min = 10.0;
    double quality_cutoff = 0.5;
};

// Builds the canonical binary feature set for the graph model. The quality
// model is optional; without it the Quality Issues feature is omitted.
inline BinaryFeatureSet featurize(const std::vector<AttendeeMeetingRecord>& records,
                                  const QualityModel* quality_model = nullptr,
                                  const FeaturizerOptions& opt = {}) {
    BinaryFeatureSet fs;
    fs.feature_names = {kSmallMeeting, kShortCall, kVideoOver30, kScreenShare,
                        kHeadset,      kRecurring, kReliabilityIssues};
    if (quality_model) fs.feature_names.push_back(kQualityIssues);
    fs.values.reserve(records.size());
    for (const auto& r : records) {
        std::vector<int> row;
        row.reserve(fs.feature_names.size());
        row.push_back(r.meeting_size <= opt.small_meeting_max ? 1 : 0);
        row.push_back(r.call_duration_min <= opt.short_call_max_min ? 1 : 0);
        row.push_back(r.video_duration_fraction > opt.video_threshold ? 1 : 0);
        row.push_back(r.screenshare_fraction > opt.screenshare_threshold ? 1 : 0);
        row.push_back(r.headset ? 1 : 0);
        row.push_back(r.recurring ? 1 : 0);
        row.push_back(composite_reliability(r));
        if (quality_model) row.push_back(quality_issue_flag(r, *quality_model, opt.quality_cutoff));
        fs.values.push_back(std::move(row));
    }
    return fs;
}

inline nlohmann::json to_json(const BinarizationRule& rule) {
    return nlohmann::json{
        {"source_field", rule.source_field},
        {"threshold", rule.threshold},
        {"direction", rule.direction == ThresholdDirection::greater ? "greater" : "less_or_equal"},
        {"feature_name", rule.feature_name}};
}

inline BinarizationRule binarization_rule_from_json(const nlohmann::json& j) {
    BinarizationRule rule;
    rule.source_field = j.at("source_field").get<std::string>();
    rule.threshold = j.at("threshold").get<double>();
    const auto dir = j.at("direction").get<std::string>();
    if (dir == "greater") {
        rule.direction = ThresholdDirection::greater;
    } else if (dir == "less_or_equal") {
        rule.direction = ThresholdDirection::less_or_equal;
    } else {
        throw DataError("unknown binarization direction '" + dir + "'");
    }
    rule.feature_name = j.at("feature_name").get<std::string>();
    return rule;
}

}  // namespace eim
