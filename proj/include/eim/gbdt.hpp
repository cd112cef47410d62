#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/features.hpp"
#include "eim/record.hpp"

namespace eim {

struct GbdtParams {
    int tree_count = 200;
    int max_depth = 4;
    double learning_rate = 0.05;
    int min_leaf_count = 20;
    double row_subsample = 0.8;
    std::uint64_t seed = 0;

    void validate() const {
        if (tree_count < 0) throw DataError("tree_count must be >= 0");
        if (max_depth < 1) throw DataError("max_depth must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
            throw DataError("learning_rate must be in (0,1]");
        }
        if (min_leaf_count < 1) throw DataError("min_leaf_count must be >= 1");
        if (!(row_subsample > 0.0 && row_subsample <= 1.0)) {
            throw DataError("row_subsample must be in (0,1]");
        }
    }
};

// Column-major numeric dataset for the predictive models.
struct TabularDataset {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> columns;  // columns[feature][row]
    std::vector<int> labels;
    std::vector<std::string> org_ids;

    std::size_t rows() const { return labels.size(); }
    std::size_t cols() const { return columns.size(); }

    TabularDataset subset(const std::vector<std::size_t>& idx) const {
        TabularDataset out;
        out.feature_names = feature_names;
        out.columns.resize(columns.size());
        for (std::size_t j = 0; j < columns.size(); ++j) {
            out.columns[j].reserve(idx.size());
            for (std::size_t i : idx) out.columns[j].push_back(columns[j][i]);
        }
        out.labels.reserve(idx.size());
        for (std::size_t i : idx) out.labels.push_back(labels[i]);
        if (!org_ids.empty()) {
            out.org_ids.reserve(idx.size());
            for (std::size_t i : idx) out.org_ids.push_back(org_ids[i]);
        }
        return out;
    }
};

struct GbdtNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output (already scaled by learning rate)
};

struct GbdtModel {
    std::vector<std::string> feature_names;
    double base_score = 0.0;  // log-odds offset
    std::vector<std::vector<GbdtNode>> trees;

    double score(const std::vector<double>& row) const {
        if (row.size() != feature_names.size()) {
            throw DataError("feature row length does not match training vocabulary");
        }
        double s = base_score;
        for (const auto& tree : trees) {
            int node = 0;
            while (tree[node].feature >= 0) {
                node = row[tree[node].feature] <= tree[node].threshold ? tree[node].left
                                                                       : tree[node].right;
            }
            s += tree[node].value;
        }
        return s;
    }
};

// Sigmoid of the ensemble score.
inline double predict_probability(const GbdtModel& model, const std::vector<double>& row) {
    return sigmoid(model.score(row));
}

namespace detail {

struct SplitCandidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

}  // namespace detail

// Newton gradient boosting with exact sorted-scan splits on logistic loss.
// Deterministic given params.seed.
inline GbdtModel train(const TabularDataset& data, const GbdtParams& params) {
    params.validate();
    const std::size_t n = data.rows();
    const std::size_t m = data.cols();
    if (n == 0) throw DataError("train: empty dataset");
    for (std::size_t j = 0; j < m; ++j) {
        for (double v : data.columns[j]) {
            if (std::isnan(v)) {
                throw DataError("NaN feature value in column '" + data.feature_names[j] + "'");
            }
        }
    }
    const double ybar =
        std::accumulate(data.labels.begin(), data.labels.end(), 0.0) / static_cast<double>(n);
    if (ybar <= 0.0 || ybar >= 1.0) throw DataError("train: labels are constant");

    GbdtModel model;
    model.feature_names = data.feature_names;
    model.base_score = std::log(ybar / (1.0 - ybar));

    // One presort per feature, reused by every tree.
    std::vector<std::vector<std::uint32_t>> sorted(m);
    for (std::size_t j = 0; j < m; ++j) {
        sorted[j].resize(n);
        std::iota(sorted[j].begin(), sorted[j].end(), 0u);
        const auto& col = data.columns[j];
        std::stable_sort(sorted[j].begin(), sorted[j].end(),
                         [&col](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
    }

    std::vector<double> score(n, model.base_score);
    std::vector<double> grad(n), hess(n);
    std::vector<int> node_of(n);
    std::vector<char> in_sample(n);
    std::mt19937_64 rng(mix64(params.seed));
    const double kRidge = 1e-6;

    for (int t = 0; t < params.tree_count; ++t) {
        if (params.row_subsample < 1.0) {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            for (std::size_t i = 0; i < n; ++i) in_sample[i] = unif(rng) < params.row_subsample;
        } else {
            std::fill(in_sample.begin(), in_sample.end(), 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(score[i]);
            grad[i] = p - data.labels[i];
            hess[i] = std::max(p * (1.0 - p), 1e-12);
        }

        std::vector<GbdtNode> tree(1);
        std::fill(node_of.begin(), node_of.end(), 0);
        std::vector<int> active{0};

        for (int depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
            const std::size_t n_nodes = tree.size();
            std::vector<double> g_total(n_nodes, 0.0), h_total(n_nodes, 0.0);
            std::vector<std::size_t> count_total(n_nodes, 0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!in_sample[i] || node_of[i] < 0) continue;
                g_total[node_of[i]] += grad[i];
                h_total[node_of[i]] += hess[i];
                ++count_total[node_of[i]];
            }
            std::vector<detail::SplitCandidate> best(n_nodes);
            std::vector<char> is_active(n_nodes, 0);
            for (int k : active) is_active[k] = 1;

            std::vector<double> g_left(n_nodes), h_left(n_nodes), last_value(n_nodes);
            std::vector<std::size_t> count_left(n_nodes);
            std::vector<char> seen(n_nodes);
            for (std::size_t j = 0; j < m; ++j) {
                std::fill(g_left.begin(), g_left.end(), 0.0);
                std::fill(h_left.begin(), h_left.end(), 0.0);
                std::fill(count_left.begin(), count_left.end(), 0);
                std::fill(seen.begin(), seen.end(), 0);
                const auto& col = data.columns[j];
                for (std::uint32_t row : sorted[j]) {
                    if (!in_sample[row]) continue;
                    const int k = node_of[row];
                    if (k < 0 || !is_active[k]) continue;
                    const double v = col[row];
                    if (seen[k] && v > last_value[k]) {
                        const std::size_t cl = count_left[k];
                        const std::size_t cr = count_total[k] - cl;
                        if (cl >= static_cast<std::size_t>(params.min_leaf_count) &&
                            cr >= static_cast<std::size_t>(params.min_leaf_count)) {
                            const double gl = g_left[k], hl = h_left[k];
                            const double gr = g_total[k] - gl, hr = h_total[k] - hl;
                            const double gain = gl * gl / (hl + kRidge) + gr * gr / (hr + kRidge) -
                                                g_total[k] * g_total[k] / (h_total[k] + kRidge);
                            if (gain > best[k].gain + 1e-12) {
                                best[k] = {gain, static_cast<int>(j),
                                           0.5 * (last_value[k] + v)};
                            }
                        }
                    }
                    g_left[k] += grad[row];
                    h_left[k] += hess[row];
                    ++count_left[k];
                    last_value[k] = v;
                    seen[k] = 1;
                }
            }

            std::vector<int> next_active;
            for (int k : active) {
                if (best[k].feature < 0) continue;
                tree[k].feature = best[k].feature;
                tree[k].threshold = best[k].threshold;
                tree[k].left = static_cast<int>(tree.size());
                tree[k].right = static_cast<int>(tree.size()) + 1;
                tree.emplace_back();
                tree.emplace_back();
                next_active.push_back(tree[k].left);
                next_active.push_back(tree[k].right);
            }
            if (next_active.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const int k = node_of[i];
                if (k < 0 || tree[k].feature < 0) continue;
                node_of[i] = data.columns[tree[k].feature][i] <= tree[k].threshold ? tree[k].left
                                                                                  : tree[k].right;
            }
            active = std::move(next_active);
        }

        // Leaf values from the full in-sample gradient statistics.
        {
            const std::size_t n_nodes = tree.size();
            std::vector<double> g_leaf(n_nodes, 0.0), h_leaf(n_nodes, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                if (!in_sample[i]) continue;
                // Rows may have stopped at an unsplit node mid-way; node_of is
                // kept current through every split round.
                g_leaf[node_of[i]] += grad[i];
                h_leaf[node_of[i]] += hess[i];
            }
            for (std::size_t k = 0; k < n_nodes; ++k) {
                if (tree[k].feature < 0) {
                    tree[k].value = -params.learning_rate * g_leaf[k] / (h_leaf[k] + kRidge);
                }
            }
        }

        for (std::size_t i = 0; i < n; ++i) {
            int node = 0;
            while (tree[node].feature >= 0) {
                node = data.columns[tree[node].feature][i] <= tree[node].threshold
                           ? tree[node].left
                           : tree[node].right;
            }
            score[i] += tree[node].value;
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline double training_log_loss(const GbdtModel& model, const TabularDataset& data) {
    double loss = 0.0;
    std::vector<double> row(data.cols());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) row[j] = data.columns[j][i];
        const double s = model.score(row);
        loss += log1pexp(s) - data.labels[i] * s;
    }
    return loss / static_cast<double>(data.rows());
}

// Rank (Mann-Whitney) AUC; ties count half.
inline double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size() || scores.empty()) {
        throw DataError("auc: scores and labels must be nonempty and equal length");
    }
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += y != 0;
    const std::size_t n_neg = labels.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw DataError("auc: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] != 0) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

struct EvalReport {
    std::string split_descriptor;
    std::vector<double> per_split_auc;
    double mean_auc = 0.0;
    double auc_stddev = 0.0;

    void finalize() {
        mean_auc = std::accumulate(per_split_auc.begin(), per_split_auc.end(), 0.0) /
                   static_cast<double>(per_split_auc.size());
        double ss = 0.0;
        for (double a : per_split_auc) ss += (a - mean_auc) * (a - mean_auc);
        auc_stddev = per_split_auc.size() > 1
                         ? std::sqrt(ss / static_cast<double>(per_split_auc.size() - 1))
                         : 0.0;
    }
};

inline nlohmann::json to_json(const EvalReport& rep) {
    return nlohmann::json{{"split", rep.split_descriptor},
                          {"mean_auc", rep.mean_auc},
                          {"auc_stddev", rep.auc_stddev},
                          {"per_split_auc", rep.per_split_auc}};
}

namespace detail {

inline std::vector<double> predict_all(const GbdtModel& model, const TabularDataset& data) {
    std::vector<double> out(data.rows());
    std::vector<double> row(data.cols());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) row[j] = data.columns[j][i];
        out[i] = sigmoid(model.score(row));
    }
    return out;
}

inline std::vector<int> subset_labels(const TabularDataset& data,
                                      const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(data.labels[i]);
    return out;
}

inline bool both_classes(const std::vector<int>& labels) {
    bool has0 = false, has1 = false;
    for (int y : labels) (y != 0 ? has1 : has0) = true;
    return has0 && has1;
}

}  // namespace detail

// Repeated random train/test splits at the row level; per-split AUC recorded.
inline EvalReport cross_validate(const TabularDataset& data, const GbdtParams& params,
                                 int split_count = 50, double test_fraction = 0.2,
                                 std::uint64_t seed = 0) {
    if (split_count < 1) throw DataError("cross_validate: split_count must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw DataError("cross_validate: test_fraction must be in (0,1)");
    }
    const std::size_t n = data.rows();
    const std::size_t n_test = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                            std::floor(test_fraction * n)));
    EvalReport report;
    report.split_descriptor = "random";
    for (int s = 0; s < split_count; ++s) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0u);
        std::vector<std::size_t> test_idx, train_idx;
        for (int attempt = 0;; ++attempt) {
            std::mt19937_64 rng(substream_seed(seed, "cv-split-" + std::to_string(s) +
                                                         "-attempt-" + std::to_string(attempt)));
            std::shuffle(idx.begin(), idx.end(), rng);
            test_idx.assign(idx.begin(), idx.begin() + n_test);
            train_idx.assign(idx.begin() + n_test, idx.end());
            if (detail::both_classes(detail::subset_labels(data, test_idx)) &&
                detail::both_classes(detail::subset_labels(data, train_idx))) {
                break;
            }
            if (attempt >= 1) {
                throw DataError("cross_validate: degenerate split after resampling");
            }
        }
        GbdtParams p = params;
        p.seed = substream_seed(seed, "cv-train-" + std::to_string(s));
        const GbdtModel model = train(data.subset(train_idx), p);
        const TabularDataset test = data.subset(test_idx);
        report.per_split_auc.push_back(auc(detail::predict_all(model, test), test.labels));
    }
    report.finalize();
    return report;
}

struct HoldoutReport {
    EvalReport in_train_cv;
    EvalReport unseen_org;
};

// Trains on all organizations except one; reports internal CV on the training
// orgs alongside the single evaluation on the held-out organization.
inline HoldoutReport holdout_by_org(const TabularDataset& data, const GbdtParams& params,
                                    const std::string& held_out_org, int split_count = 10,
                                    double test_fraction = 0.2, std::uint64_t seed = 0) {
    if (data.org_ids.size() != data.rows()) {
        throw DataError("holdout_by_org: dataset lacks org labels");
    }
    std::vector<std::size_t> held, rest;
    bool other_org_present = false;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        if (data.org_ids[i] == held_out_org) {
            held.push_back(i);
        } else {
            rest.push_back(i);
            other_org_present = true;
        }
    }
    if (held.empty()) throw DataError("holdout_by_org: unknown org '" + held_out_org + "'");
    if (!other_org_present) throw DataError("holdout_by_org: need at least 2 organizations");
    if (!detail::both_classes(detail::subset_labels(data, held))) {
        throw DataError("holdout_by_org: held-out org must contain both classes");
    }

    const TabularDataset train_data = data.subset(rest);
    HoldoutReport report;
    report.in_train_cv = cross_validate(train_data, params, split_count, test_fraction,
                                        substream_seed(seed, "holdout-cv"));
    GbdtParams p = params;
    p.seed = substream_seed(seed, "holdout-train");
    const GbdtModel model = train(train_data, p);
    const TabularDataset held_data = data.subset(held);
    EvalReport unseen;
    unseen.split_descriptor = "org-holdout:" + held_out_org;
    unseen.per_split_auc.push_back(auc(detail::predict_all(model, held_data), held_data.labels));
    unseen.finalize();
    report.unseen_org = unseen;
    return report;
}

inline nlohmann::json to_json(const GbdtModel& model) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& node : tree) {
            nodes.push_back({{"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", node.left},
                             {"right", node.right},
                             {"value", node.value}});
        }
        trees.push_back(std::move(nodes));
    }
    return nlohmann::json{{"feature_names", model.feature_names},
                          {"base_score", model.base_score},
                          {"trees", trees}};
}

enum class PredictiveTarget { effective, inclusive };

// Telemetry-only feature vocabulary for the predictive models. Survey-derived
// signals never appear; Inclusive in particular is excluded by construction.
inline TabularDataset build_predictive_dataset(const std::vector<AttendeeMeetingRecord>& records,
                                               PredictiveTarget target,
                                               const QualityModel* quality_model = nullptr) {
    TabularDataset data;
    const ThresholdQualityModel fallback(0, 0.0);
    const QualityModel& qm = quality_model ? *quality_model : fallback;

    data.feature_names = {
        "call drop",
        "one-way audio",
        "reconnect failure",
        "media failure",
        "microphone failure",
        "video duration fraction",
        "screenshare fraction",
        "audio participation rate",
        "is friday",
        "is monday",
        "meeting size",
        "call duration",
        "predicted call quality issue probability",
        "total minutes in meetings same day",
        "total calls same day",
        "screenshare > 10%",
        "quality issues",
        "reliability issues",
        "participation",
        "video duration > 30%",
        "recurring",
        "screenshare used",
        "small meeting (8 or less)",
        "short call (10min or less)",
        "long call (1hr or more)",
        "headset",
        "busy day (10 or more calls)",
        "short hours in meetings (< 1hr same day)",
        "audio only",
        "video only",
        "video or screenshare",
        "screenshare only",
        "start hour",
        "media ever flowed",
    };
    for (int s = 0; s < 6; ++s) {
        data.feature_names.push_back("quality stat " + std::to_string(s));
    }
    data.columns.resize(data.feature_names.size());

    for (const auto& r : records) {
        if (!r.responded()) continue;  // only rated rows carry a label
        const auto outcomes = derive_outcomes(r);
        const int label =
            target == PredictiveTarget::effective ? *outcomes.effective : *outcomes.inclusive;
        std::size_t j = 0;
        auto push = [&](double v) { data.columns[j++].push_back(v); };
        push(r.reliability_flags.call_drop);
        push(r.reliability_flags.one_way_audio);
        push(r.reliability_flags.reconnect_failure);
        push(r.reliability_flags.media_failure);
        push(r.reliability_flags.microphone_failure);
        push(r.video_duration_fraction);
        push(r.screenshare_fraction);
        push(r.nef_normalized);
        push(r.day_of_week == 4);
        push(r.day_of_week == 0);
        push(r.meeting_size);
        push(r.call_duration_min);
        push(quality_issue_probability(r, qm));
        push(r.minutes_in_meetings_same_day);
        push(r.calls_same_day);
        push(r.screenshare_fraction > 0.10);
        push(quality_issue_flag(r, qm));
        push(composite_reliability(r));
        push(outcomes.participation);
        push(r.video_duration_fraction > 0.30);
        push(r.recurring);
        push(r.screenshare_fraction > 0.0);
        push(r.meeting_size <= 8);
        push(r.call_duration_min <= 10.0);
        push(r.call_duration_min >= 60.0);
        push(r.headset);
        push(r.calls_same_day >= 10);
        push(r.minutes_in_meetings_same_day < 60.0);
        push(r.video_duration_fraction == 0.0 && r.screenshare_fraction == 0.0);
        push(r.video_duration_fraction > 0.0 && r.screenshare_fraction == 0.0);
        push(r.video_duration_fraction > 0.0 || r.screenshare_fraction > 0.0);
        push(r.screenshare_fraction > 0.0 && r.video_duration_fraction == 0.0);
        push(r.start_hour_local);
        push(!r.reliability_flags.media_failure);
        for (int s = 0; s < 6; ++s) push(r.quality_stats[static_cast<std::size_t>(s)]);
        data.labels.push_back(label);
        data.org_ids.push_back(r.org_id);
    }
    return data;
}

}  // namespace eim
