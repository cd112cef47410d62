#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/record.hpp"

namespace eim {

// Structural logistic equation: logit = intercept + sum coef[name] * column.
// Names resolve to the generated binary columns (attributes and upstream
// outcomes); an unknown name is an error at generation time.
struct StructuralEquation {
    double intercept = 0.0;
    std::map<std::string, double> coefficients;  // name -> log odds ratio
};

struct OrgEffect {
    std::string org_id;
    double weight = 1.0;
    double video_rate_shift = 0.0;    // additive shift on P(video > 30%)
    double headset_rate_shift = 0.0;  // additive shift on P(headset)
    // Multiplies every non-intercept structural coefficient for records of
    // this org; 1.0 means the org follows the global model.
    double participation_coef_scale = 1.0;
    double inclusive_coef_scale = 1.0;
    double effective_coef_scale = 1.0;
};

struct AttributeMarginals {
    double small_meeting_geometric_p = 0.109;  // size = 3 + Geom(p), clipped to 50
    double duration_log_mean = std::log(25.0);
    double duration_log_sd = 1.0;  // clipped to (0, 150)
    double video_over30_rate = 0.40;
    double screenshare_over10_rate = 0.30;
    double headset_rate = 0.40;
    double recurring_rate = 0.50;
    double reliability_rate = 0.15;
    double quality_issue_rate = 0.15;
};

struct ResponseModel {
    double response_rate = 0.70;
    double star5_given_positive = 0.88;  // rest of the mass goes to 4 stars
    // Star weights for a negative outcome over {1,2,3}. Mass on 4 stars would
    // flip the derived binary outcome, so the negative branch stays below 4.
    std::array<double, 3> negative_star_weights{0.10, 0.20, 0.70};
    double response_time_log_mean = 2.2;
    double response_time_log_sd = 0.5;
};

struct GeneratorSpec {
    std::size_t n_records = 10000;
    std::vector<OrgEffect> orgs{{"org-a", 1.0}};
    AttributeMarginals marginals;
    StructuralEquation participation_eq;
    StructuralEquation inclusive_eq;
    StructuralEquation effective_eq;
    ResponseModel response;
    std::uint64_t seed = 0;
    std::size_t user_pool = 2000;
};

struct PlantedEdge {
    std::string source;
    std::string target;
    double odds_ratio;
};

struct GroundTruth {
    std::vector<PlantedEdge> edges;
    std::string generative_direction;  // "inclusive_predicts_effective" by construction
    std::vector<std::string> shifted_orgs;
    std::vector<int> quality_labels;  // planted per-record quality-issue flags
};

// Combined-column planted ORs plus marginals chosen so every contingency cell
// is populated at desk scale.
inline GeneratorSpec default_eim_spec() {
    GeneratorSpec spec;
    spec.orgs = {{"org-a", 0.30, 0.05, 0.0},
                 {"org-b", 0.30, -0.05, 0.0},
                 {"org-c", 0.20, 0.0, 0.05},
                 {"org-d", 0.20, 0.0, -0.05}};

    spec.participation_eq.intercept = -0.55;
    spec.participation_eq.coefficients = {
        {"Small Meeting (8 or less)", std::log(7.13)},
        {"Short Call (10min. or less)", std::log(0.72)},
        {"Recurring", std::log(0.82)},
        {"ScreenShare", std::log(0.71)},
        {"Headset", std::log(1.16)},
        {"Video Duration > 30%", std::log(1.17)},
        {"Reliability Issues", std::log(0.13)},
    };
    spec.inclusive_eq.intercept = 0.85;
    spec.inclusive_eq.coefficients = {
        {"Participation", std::log(4.05)},
        {"Quality Issues", std::log(0.35)},
        {"Reliability Issues", std::log(0.49)},
        {"Small Meeting (8 or less)", std::log(1.51)},
        {"Short Call (10min. or less)", std::log(0.61)},
    };
    // The intercept keeps Effective more skewed (hence more predictable) than
    // Inclusive, which is what makes the AIC direction point downstream.
    spec.effective_eq.intercept = -1.0;
    spec.effective_eq.coefficients = {
        {"Inclusive", std::log(45.48)},
        {"Quality Issues", std::log(0.14)},
        {"ScreenShare", std::log(1.39)},
        {"Small Meeting (8 or less)", std::log(1.29)},
    };
    return spec;
}

namespace detail {

inline double resolve_logit(const StructuralEquation& eq, double scale,
                            const std::map<std::string, double>& columns) {
    double z = eq.intercept;
    for (const auto& [name, coef] : eq.coefficients) {
        auto it = columns.find(name);
        if (it == columns.end()) {
            throw DataError("structural coefficient names unknown column '" + name + "'");
        }
        z += scale * coef * it->second;
    }
    return z;
}

}  // namespace detail

// Samples attendee-meeting records from the planted structural hierarchy:
// attributes -> Participation -> Inclusive -> Effective. Fully reproducible
// per seed.
inline std::pair<std::vector<AttendeeMeetingRecord>, GroundTruth> generate(
    const GeneratorSpec& spec) {
    double weight_sum = 0.0;
    for (const auto& org : spec.orgs) weight_sum += org.weight;
    if (spec.orgs.empty() || weight_sum <= 0.0) {
        throw DataError("generator spec needs at least one org with positive weight");
    }

    std::mt19937_64 rng(substream_seed(spec.seed, "generator"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<AttendeeMeetingRecord> records;
    records.reserve(spec.n_records);
    GroundTruth truth;
    truth.generative_direction = "inclusive_predicts_effective";
    truth.quality_labels.reserve(spec.n_records);
    for (const auto& [name, coef] : spec.participation_eq.coefficients) {
        truth.edges.push_back({name, "Participation", std::exp(coef)});
    }
    for (const auto& [name, coef] : spec.inclusive_eq.coefficients) {
        truth.edges.push_back({name, "Inclusive", std::exp(coef)});
    }
    for (const auto& [name, coef] : spec.effective_eq.coefficients) {
        truth.edges.push_back({name, "Effective", std::exp(coef)});
    }
    for (const auto& org : spec.orgs) {
        if (org.participation_coef_scale != 1.0 || org.inclusive_coef_scale != 1.0 ||
            org.effective_coef_scale != 1.0 || org.video_rate_shift != 0.0 ||
            org.headset_rate_shift != 0.0) {
            truth.shifted_orgs.push_back(org.org_id);
        }
    }

    const auto& m = spec.marginals;
    for (std::size_t i = 0; i < spec.n_records; ++i) {
        // Org assignment by weight.
        const OrgEffect* org = &spec.orgs.back();
        {
            double u = unif(rng) * weight_sum;
            for (const auto& candidate : spec.orgs) {
                u -= candidate.weight;
                if (u <= 0.0) {
                    org = &candidate;
                    break;
                }
            }
        }

        AttendeeMeetingRecord r;
        r.meeting_id = "m" + std::to_string(i);
        r.user_id = "u" + std::to_string(static_cast<std::size_t>(unif(rng) * spec.user_pool));
        r.org_id = org->org_id;

        // Attributes from marginals (with per-org rate shifts).
        {
            std::geometric_distribution<int> geom(m.small_meeting_geometric_p);
            r.meeting_size = std::min(3 + geom(rng), 50);
        }
        r.call_duration_min =
            std::clamp(std::exp(m.duration_log_mean + m.duration_log_sd * normal(rng)), 0.5, 149.0);
        const double video_rate = std::clamp(m.video_over30_rate + org->video_rate_shift, 0.0, 1.0);
        const bool video_over30 = unif(rng) < video_rate;
        r.video_duration_fraction =
            video_over30 ? 0.30 + 0.70 * unif(rng) + 1e-9 : 0.30 * unif(rng);
        r.video_duration_fraction = std::min(r.video_duration_fraction, 1.0);
        const bool screenshare = unif(rng) < m.screenshare_over10_rate;
        r.screenshare_fraction = screenshare ? 0.10 + 0.90 * unif(rng) : 0.10 * unif(rng);
        r.screenshare_fraction = std::min(r.screenshare_fraction, 1.0);
        const double headset_rate = std::clamp(m.headset_rate + org->headset_rate_shift, 0.0, 1.0);
        r.headset = unif(rng) < headset_rate;
        r.recurring = unif(rng) < m.recurring_rate;
        r.start_hour_local = 8 + static_cast<int>(unif(rng) * 10.0);
        r.day_of_week = static_cast<int>(unif(rng) * 7.0);
        {
            std::poisson_distribution<int> pois(3.0);
            r.calls_same_day = 1 + pois(rng);
        }
        r.minutes_in_meetings_same_day =
            r.call_duration_min + 25.0 * (r.calls_same_day - 1) * (0.5 + unif(rng));

        const bool reliability = unif(rng) < m.reliability_rate;
        if (reliability) {
            const int which = static_cast<int>(unif(rng) * 5.0);
            auto& f = r.reliability_flags;
            (which == 0   ? f.call_drop
             : which == 1 ? f.one_way_audio
             : which == 2 ? f.reconnect_failure
             : which == 3 ? f.media_failure
                          : f.microphone_failure) = true;
            if (unif(rng) < 0.2) f.one_way_audio = true;
        }

        const bool quality_issue = unif(rng) < m.quality_issue_rate;
        r.quality_stats.resize(kQualityStatCount);
        r.quality_stats[0] = (quality_issue ? 1.5 : -1.5) + 0.5 * normal(rng);
        for (std::size_t s = 1; s < kQualityStatCount; ++s) {
            const double shift = s <= 5 ? (quality_issue ? 0.5 : 0.0) : 0.0;
            r.quality_stats[s] = shift + normal(rng);
        }
        truth.quality_labels.push_back(quality_issue ? 1 : 0);

        std::map<std::string, double> columns = {
            {"Small Meeting (8 or less)", r.meeting_size <= 8 ? 1.0 : 0.0},
            {"Short Call (10min. or less)", r.call_duration_min <= 10.0 ? 1.0 : 0.0},
            {"Video Duration > 30%", video_over30 ? 1.0 : 0.0},
            {"ScreenShare", screenshare ? 1.0 : 0.0},
            {"Headset", r.headset ? 1.0 : 0.0},
            {"Recurring", r.recurring ? 1.0 : 0.0},
            {"Reliability Issues", reliability ? 1.0 : 0.0},
            {"Quality Issues", quality_issue ? 1.0 : 0.0},
        };

        const bool participation =
            unif(rng) <
            sigmoid(detail::resolve_logit(spec.participation_eq, org->participation_coef_scale,
                                          columns));
        columns["Participation"] = participation ? 1.0 : 0.0;
        // NEF consistent with the planted Participation value; the 10% boundary
        // itself falls on the non-participating side.
        r.nef_normalized = participation ? 0.101 + 0.499 * unif(rng) : 0.10 * unif(rng);

        const bool inclusive =
            unif(rng) < sigmoid(detail::resolve_logit(spec.inclusive_eq,
                                                      org->inclusive_coef_scale, columns));
        columns["Inclusive"] = inclusive ? 1.0 : 0.0;
        const bool effective =
            unif(rng) < sigmoid(detail::resolve_logit(spec.effective_eq,
                                                      org->effective_coef_scale, columns));

        if (unif(rng) < spec.response.response_rate) {
            auto draw_stars = [&](bool positive) {
                if (positive) {
                    return unif(rng) < spec.response.star5_given_positive ? 5 : 4;
                }
                const auto& w = spec.response.negative_star_weights;
                const double total = w[0] + w[1] + w[2];
                double u = unif(rng) * total;
                if ((u -= w[0]) <= 0.0) return 1;
                if ((u -= w[1]) <= 0.0) return 2;
                return 3;
            };
            r.effective_stars = draw_stars(effective);
            r.inclusive_stars = draw_stars(inclusive);
            r.response_time_s = std::exp(spec.response.response_time_log_mean +
                                         spec.response.response_time_log_sd * normal(rng));
        }
        records.push_back(std::move(r));
    }
    return {std::move(records), std::move(truth)};
}

inline nlohmann::json to_json(const GroundTruth& truth) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : truth.edges) {
        edges.push_back({{"source", e.source}, {"target", e.target}, {"or", e.odds_ratio}});
    }
    return nlohmann::json{{"edges", edges},
                          {"generative_direction", truth.generative_direction},
                          {"shifted_orgs", truth.shifted_orgs},
                          {"quality_labels", truth.quality_labels}};
}

}  // namespace eim
