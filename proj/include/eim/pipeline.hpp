#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/features.hpp"
#include "eim/gbdt.hpp"
#include "eim/graph.hpp"
#include "eim/record.hpp"
#include "eim/survey.hpp"
#include "eim/synthgen.hpp"

namespace eim {

// Writes via a temp file in the same directory, then renames into place.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename to '" + path.string() + "' failed: " + ec.message());
}

inline std::vector<AttendeeMeetingRecord> load_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open records file '" + path.string() + "'");
    return parse_records(in);
}

// Quality classifier backed by the boosted-tree model, over the 40 telemetry
// statistics.
class BoostedQualityModel : public QualityModel {
public:
    explicit BoostedQualityModel(GbdtModel model) : model_(std::move(model)) {}

    double predict_probability(const std::vector<double>& stats) const override {
        return eim::predict_probability(model_, stats);
    }

    static BoostedQualityModel train_on(const std::vector<AttendeeMeetingRecord>& records,
                                        const std::vector<int>& labels, std::uint64_t seed) {
        if (records.size() != labels.size()) {
            throw DataError("quality training labels do not match record count");
        }
        TabularDataset data;
        for (std::size_t s = 0; s < kQualityStatCount; ++s) {
            data.feature_names.push_back("quality stat " + std::to_string(s));
        }
        data.columns.resize(kQualityStatCount);
        for (std::size_t i = 0; i < records.size(); ++i) {
            for (std::size_t s = 0; s < kQualityStatCount; ++s) {
                data.columns[s].push_back(records[i].quality_stats[s]);
            }
            data.labels.push_back(labels[i]);
        }
        GbdtParams params;
        params.tree_count = 60;
        params.max_depth = 3;
        params.seed = substream_seed(seed, "quality-model");
        return BoostedQualityModel(train(data, params));
    }

private:
    GbdtModel model_;
};

struct PipelineGenerateResult {
    std::size_t n_records = 0;
    std::size_t n_responded = 0;
};

inline PipelineGenerateResult pipeline_generate(const GeneratorSpec& spec,
                                                const std::filesystem::path& records_path,
                                                const std::filesystem::path& truth_path) {
    auto [records, truth] = generate(spec);
    std::ostringstream lines;
    PipelineGenerateResult result;
    for (const auto& r : records) {
        lines << serialize_record(r) << "\n";
        result.n_responded += r.responded();
    }
    result.n_records = records.size();
    atomic_write(records_path, lines.str());
    atomic_write(truth_path, to_json(truth).dump(2) + "\n");
    return result;
}

struct GraphFitResult {
    EimGraph graph;
    FilterReport filter_report;
};

// Full fit-graph stage: filter, train the quality classifier from the
// ground-truth sidecar labels when available, featurize, derive outcomes, fit.
inline GraphFitResult pipeline_fit_graph(const std::vector<AttendeeMeetingRecord>& records,
                                         const std::vector<int>* quality_labels, double alpha,
                                         std::uint64_t seed,
                                         const FilterPolicy& policy = {}) {
    std::unique_ptr<QualityModel> quality;
    if (quality_labels) {
        quality = std::make_unique<BoostedQualityModel>(
            BoostedQualityModel::train_on(records, *quality_labels, seed));
    }

    auto [kept, report] = apply_filters(records, policy);
    if (kept.empty()) throw DataError("no records after filters");
    const BinaryFeatureSet features = featurize(kept, quality.get());
    std::vector<EimOutcomes> outcomes;
    outcomes.reserve(kept.size());
    for (const auto& r : kept) outcomes.push_back(derive_outcomes(r));
    GraphFitResult result;
    result.graph = fit_graph(features, outcomes, {}, alpha);
    result.filter_report = report;
    return result;
}

inline std::vector<int> load_quality_labels(const std::filesystem::path& truth_path) {
    std::ifstream in(truth_path);
    if (!in) throw IoError("cannot open ground-truth file '" + truth_path.string() + "'");
    nlohmann::json j;
    in >> j;
    return j.at("quality_labels").get<std::vector<int>>();
}

// Synthetic time-ordered meeting stream for the survey scheduler.
inline std::vector<SimMeeting> build_meeting_stream(std::size_t n_meetings, std::size_t n_users,
                                                    double mean_attendees, double horizon_days,
                                                    std::uint64_t seed) {
    if (n_meetings == 0 || n_users == 0) throw DataError("meeting stream needs meetings and users");
    std::mt19937_64 rng(substream_seed(seed, "meeting-stream"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::poisson_distribution<int> attendees(std::max(mean_attendees - 2.0, 1.0));
    std::vector<SimMeeting> meetings(n_meetings);
    for (std::size_t i = 0; i < n_meetings; ++i) {
        meetings[i].time_days = unif(rng) * horizon_days;
        meetings[i].meeting_id = "sm" + std::to_string(i);
        const int count = 2 + attendees(rng);
        std::vector<std::string> users;
        for (int a = 0; a < count; ++a) {
            users.push_back("u" + std::to_string(static_cast<std::size_t>(unif(rng) * n_users)));
        }
        std::sort(users.begin(), users.end());
        users.erase(std::unique(users.begin(), users.end()), users.end());
        meetings[i].attendees = std::move(users);
    }
    std::sort(meetings.begin(), meetings.end(),
              [](const SimMeeting& a, const SimMeeting& b) { return a.time_days < b.time_days; });
    return meetings;
}

inline std::string serialize_event_log(const SimEventLog& log) {
    std::ostringstream os;
    for (const auto& ev : log) os << to_json(ev).dump() << "\n";
    return os.str();
}

inline SimEvent event_from_json(const nlohmann::json& j) {
    SimEvent ev;
    ev.time_days = j.at("time_days").get<double>();
    ev.meeting_id = j.at("meeting_id").get<std::string>();
    ev.user_id = j.at("user_id").get<std::string>();
    ev.shown = j.at("shown").get<bool>();
    ev.responded = j.at("responded").get<bool>();
    if (j.contains("suppressed_reason")) {
        const auto reason = j.at("suppressed_reason").get<std::string>();
        if (reason == "not_triggered") {
            ev.suppressed_reason = SuppressedReason::not_triggered;
        } else if (reason == "cooldown") {
            ev.suppressed_reason = SuppressedReason::cooldown;
        } else if (reason == "ineligible") {
            ev.suppressed_reason = SuppressedReason::ineligible;
        } else {
            throw DataError("unknown suppressed_reason '" + reason + "'");
        }
    }
    if (j.contains("effective_stars")) ev.effective_stars = j.at("effective_stars").get<int>();
    if (j.contains("inclusive_stars")) ev.inclusive_stars = j.at("inclusive_stars").get<int>();
    if (j.contains("response_time_s")) ev.response_time_s = j.at("response_time_s").get<double>();
    if (j.contains("days_since_last_shown")) {
        ev.days_since_last_shown = j.at("days_since_last_shown").get<double>();
    }
    return ev;
}

inline SimEventLog load_event_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open event log '" + path.string() + "'");
    SimEventLog log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            log.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("event log line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return log;
}

// PMR by exposure-recency bucket; the bucket boundary is the fatigue
// threshold under study.
inline GroupedRates pmr_by_recency(const SimEventLog& log, double threshold_days = 7.0) {
    std::vector<std::pair<std::string, bool>> obs;
    for (const auto& ev : log) {
        if (!ev.responded || !ev.days_since_last_shown) continue;
        const bool recent = *ev.days_since_last_shown < threshold_days;
        const bool perfect = *ev.effective_stars == 5 && *ev.inclusive_stars == 5;
        obs.emplace_back(recent ? "under_threshold" : "over_threshold", perfect);
    }
    return grouped_rates(obs, {"under_threshold", "over_threshold"});
}

}  // namespace eim
