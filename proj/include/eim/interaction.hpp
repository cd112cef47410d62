#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/glm.hpp"
#include "eim/record.hpp"

namespace eim {

// A model term is a single column name or a product of column names
// (rendered "A : B").
struct ModelTerm {
    std::vector<std::string> columns;

    std::string name() const {
        std::string out;
        for (const auto& c : columns) {
            if (!out.empty()) out += " : ";
            out += c;
        }
        return out;
    }
};

struct ModelSpec {
    std::string outcome;  // Effective | Inclusive | Participation
    std::vector<ModelTerm> terms;
    std::map<std::string, std::map<std::string, double>> scenarios;
};

// Numeric value of a named analysis column for one record.
inline double record_column(const AttendeeMeetingRecord& r, const std::string& name) {
    if (name == "Meeting Size") return static_cast<double>(r.meeting_size);
    if (name == "CallDuration") return r.call_duration_min;
    if (name == "Recurring") return r.recurring ? 1.0 : 0.0;
    if (name == "Headset") return r.headset ? 1.0 : 0.0;
    if (name == "Short Call (30min or less)") return r.call_duration_min <= 30.0 ? 1.0 : 0.0;
    if (name == "Short Call (10min. or less)") return r.call_duration_min <= 10.0 ? 1.0 : 0.0;
    if (name == "Meeting Size (8 or less)") return r.meeting_size <= 8 ? 1.0 : 0.0;
    if (name == "Video Duration > 30%") return r.video_duration_fraction > 0.30 ? 1.0 : 0.0;
    if (name == "ScreenShare") return r.screenshare_fraction > 0.10 ? 1.0 : 0.0;
    throw DataError("unknown analysis column '" + name + "'");
}

inline double outcome_column(const AttendeeMeetingRecord& r, const std::string& outcome) {
    const EimOutcomes o = derive_outcomes(r);
    if (outcome == "Participation") return static_cast<double>(o.participation);
    if (outcome == "Effective") {
        if (!o.effective) throw DataError("record has no survey response for Effective");
        return static_cast<double>(*o.effective);
    }
    if (outcome == "Inclusive") {
        if (!o.inclusive) throw DataError("record has no survey response for Inclusive");
        return static_cast<double>(*o.inclusive);
    }
    throw DataError("unknown outcome '" + outcome + "'");
}

// Fits the spec's GLM (intercept implied). Rated outcomes use responded
// records only.
inline FittedGlm fit_spec(const std::vector<AttendeeMeetingRecord>& records,
                          const ModelSpec& spec) {
    std::vector<const AttendeeMeetingRecord*> rows;
    for (const auto& r : records) {
        if (spec.outcome != "Participation" && !r.responded()) continue;
        rows.push_back(&r);
    }
    const std::size_t n = rows.size();
    if (n == 0) throw DataError("fit_spec: no usable records");

    DesignMatrix design = DesignMatrix::with_rows(n);
    design.add_intercept();
    for (const auto& term : spec.terms) {
        if (term.columns.empty()) throw DataError("fit_spec: empty model term");
        Eigen::VectorXd col = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
        for (const auto& column : term.columns) {
            for (std::size_t i = 0; i < n; ++i) {
                col[static_cast<Eigen::Index>(i)] *= record_column(*rows[i], column);
            }
        }
        design.add_column(term.name(), col);
    }
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[static_cast<Eigen::Index>(i)] = outcome_column(*rows[i], spec.outcome);
    }
    return fit_logistic_irls(design, y);
}

// sigmoid(beta . x) for a scenario assigning every base column. Interaction
// columns are evaluated as products of the assigned values.
inline double predict_scenario(const FittedGlm& fit,
                               const std::map<std::string, double>& scenario) {
    double z = 0.0;
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        const std::string& name = fit.names[j];
        double x;
        if (name == "Intercept") {
            x = 1.0;
        } else {
            x = 1.0;
            std::size_t start = 0;
            while (true) {
                const std::size_t sep = name.find(" : ", start);
                const std::string column =
                    sep == std::string::npos ? name.substr(start) : name.substr(start, sep - start);
                const auto it = scenario.find(column);
                if (it == scenario.end()) {
                    throw DataError("scenario is missing column '" + column + "'");
                }
                x *= it->second;
                if (sep == std::string::npos) break;
                start = sep + 3;
            }
        }
        z += fit.beta[static_cast<Eigen::Index>(j)] * x;
    }
    return sigmoid(z);
}

inline double scenario_delta(const FittedGlm& fit, const std::map<std::string, double>& scenario_a,
                             const std::map<std::string, double>& scenario_b) {
    return predict_scenario(fit, scenario_b) - predict_scenario(fit, scenario_a);
}

// Canned spec: numeric meeting size with recurring and short-call (30 min)
// interactions on Effective. The zero-coefficient short-call interaction is
// kept in the spec deliberately.
inline ModelSpec effective_size_recurring_spec() {
    ModelSpec spec;
    spec.outcome = "Effective";
    spec.terms = {
        {{"Short Call (30min or less)"}},
        {{"Meeting Size"}},
        {{"Short Call (30min or less)", "Meeting Size"}},
        {{"Recurring"}},
        {{"Recurring", "Meeting Size"}},
    };
    spec.scenarios = {
        {"small one-off", {{"Meeting Size", 2.0}, {"Recurring", 0.0},
                           {"Short Call (30min or less)", 0.0}}},
        {"large one-off", {{"Meeting Size", 14.0}, {"Recurring", 0.0},
                           {"Short Call (30min or less)", 0.0}}},
    };
    return spec;
}

// Canned spec: small-meeting x video x duration effects on Participation.
// The source table lists the small-meeting/video interaction twice; the
// second row is interpreted here as the small-meeting/duration term.
inline ModelSpec participation_video_spec() {
    ModelSpec spec;
    spec.outcome = "Participation";
    spec.terms = {
        {{"Meeting Size (8 or less)"}},
        {{"Video Duration > 30%"}},
        {{"CallDuration"}},
        {{"Meeting Size (8 or less)", "Video Duration > 30%"}},
        {{"Video Duration > 30%", "CallDuration"}},
        {{"Meeting Size (8 or less)", "CallDuration"}},
    };
    return spec;
}

inline nlohmann::json to_json(const ModelSpec& spec) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : spec.terms) terms.push_back(t.columns);
    nlohmann::json scenarios = nlohmann::json::object();
    for (const auto& [name, assignment] : spec.scenarios) scenarios[name] = assignment;
    return nlohmann::json{{"outcome", spec.outcome}, {"terms", terms}, {"scenarios", scenarios}};
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j) {
    ModelSpec spec;
    spec.outcome = j.at("outcome").get<std::string>();
    for (const auto& t : j.at("terms")) {
        spec.terms.push_back({t.get<std::vector<std::string>>()});
    }
    if (j.contains("scenarios")) {
        for (const auto& [name, assignment] : j.at("scenarios").items()) {
            spec.scenarios[name] = assignment.get<std::map<std::string, double>>();
        }
    }
    return spec;
}

}  // namespace eim
