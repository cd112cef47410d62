#pragma once

#include <algorithm>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eim/common.hpp"
#include "eim/features.hpp"
#include "eim/glm.hpp"
#include "eim/l1.hpp"
#include "eim/record.hpp"

namespace eim {

// Fixed outcome hierarchy; each outcome's candidate predictors are all binary
// attributes plus every outcome earlier in the order.
struct HierarchyConfig {
    std::vector<std::string> outcomes{"Participation", "Inclusive", "Effective"};
};

struct GraphEdge {
    std::string source;
    std::string target;
    double adjusted_or = 1.0;
    double p_value = 1.0;
    std::size_t n_used = 0;
};

struct EimGraph {
    std::vector<std::string> nodes;  // outcomes + attributes
    std::vector<GraphEdge> edges;

    bool has_edge(const std::string& source, const std::string& target) const {
        return find_edge(source, target) != nullptr;
    }
    const GraphEdge* find_edge(const std::string& source, const std::string& target) const {
        for (const auto& e : edges) {
            if (e.source == source && e.target == target) return &e;
        }
        return nullptr;
    }
};

namespace detail {

inline std::optional<int> outcome_value(const EimOutcomes& o, const std::string& name) {
    if (name == "Participation") return o.participation;
    if (name == "Inclusive") return o.inclusive;
    if (name == "Effective") return o.effective;
    throw DataError("unknown outcome '" + name + "'");
}

}  // namespace detail

// Two-step fit per outcome node: l1 neighborhood selection (BIC lambda), then
// an unregularized GLM refit with backward elimination at level alpha. Records
// missing a survey response are used for the Participation node only.
inline EimGraph fit_graph(const BinaryFeatureSet& features, const std::vector<EimOutcomes>& outcomes,
                          const HierarchyConfig& hierarchy = {}, double alpha = 0.05) {
    if (features.rows() != outcomes.size()) {
        throw DataError("fit_graph: feature rows and outcome rows differ");
    }
    EimGraph graph;
    graph.nodes = hierarchy.outcomes;
    for (const auto& name : features.feature_names) graph.nodes.push_back(name);

    std::vector<std::string> earlier;
    for (const auto& target : hierarchy.outcomes) {
        // Row mask: target (and all earlier outcomes) must be present.
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < outcomes.size(); ++i) {
            bool usable = detail::outcome_value(outcomes[i], target).has_value();
            for (const auto& e : earlier) {
                usable = usable && detail::outcome_value(outcomes[i], e).has_value();
            }
            if (usable) rows.push_back(i);
        }
        const std::size_t n = rows.size();
        std::vector<std::string> candidates = features.feature_names;
        candidates.insert(candidates.end(), earlier.begin(), earlier.end());
        if (n < 10 * candidates.size()) {
            throw DataError("fit_graph: node '" + target + "' has " + std::to_string(n) +
                            " usable rows for " + std::to_string(candidates.size()) +
                            " candidates (need 10x)");
        }

        DesignMatrix cand = DesignMatrix::with_rows(n);
        for (const auto& name : features.feature_names) {
            const std::size_t j = features.index_of(name);
            Eigen::VectorXd col(n);
            for (std::size_t i = 0; i < n; ++i) col[i] = features.values[rows[i]][j];
            cand.add_column(name, col);
        }
        for (const auto& name : earlier) {
            Eigen::VectorXd col(n);
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = static_cast<double>(*detail::outcome_value(outcomes[rows[i]], name));
            }
            cand.add_column(name, col);
        }
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<double>(*detail::outcome_value(outcomes[rows[i]], target));
        }

        // Step 1: neighborhood by l1 regularization, lambda chosen by BIC.
        std::vector<std::string> support;
        try {
            const L1Path path = fit_l1_logistic(cand, y);
            support = select_lambda(path, cand, y).support;
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("node '") + target + "': " + e.what());
        } catch (const DataError& e) {
            throw DataError(std::string("node '") + target + "': " + e.what());
        }
        if (support.empty()) {
            earlier.push_back(target);
            continue;  // node retained with no incoming edges
        }

        // Step 2: unregularized refit with backward elimination.
        auto refit = [&](const std::vector<std::string>& cols) {
            DesignMatrix d = DesignMatrix::with_rows(n);
            d.add_intercept();
            for (const auto& c : cols) d.add_column(c, cand.X.col(cand.index_of(c)));
            return fit_logistic_irls(d, y);
        };
        FittedGlm fit;
        try {
            fit = refit(support);
            while (!support.empty()) {
                // Worst coefficient: largest p, ties broken by column name.
                std::size_t worst = 0;
                bool any = false;
                for (std::size_t j = 1; j < fit.names.size(); ++j) {  // skip intercept
                    if (!any || fit.p_values[static_cast<Eigen::Index>(j)] >
                                    fit.p_values[static_cast<Eigen::Index>(worst)] + 1e-15 ||
                        (std::abs(fit.p_values[static_cast<Eigen::Index>(j)] -
                                  fit.p_values[static_cast<Eigen::Index>(worst)]) <= 1e-15 &&
                         fit.names[j] < fit.names[worst])) {
                        worst = j;
                        any = true;
                    }
                }
                if (!any || fit.p_values[static_cast<Eigen::Index>(worst)] < alpha) break;
                support.erase(std::find(support.begin(), support.end(), fit.names[worst]));
                if (support.empty()) break;
                fit = refit(support);
            }
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("node '") + target + "': " + e.what());
        }

        for (std::size_t j = 1; j < fit.names.size() && !support.empty(); ++j) {
            GraphEdge edge;
            edge.source = fit.names[j];
            edge.target = target;
            edge.adjusted_or = odds_ratio(fit, j);
            edge.p_value = fit.p_values[static_cast<Eigen::Index>(j)];
            edge.n_used = n;
            graph.edges.push_back(edge);
        }
        earlier.push_back(target);
    }
    return graph;
}

enum class AicDirection { first_predicts_second, second_predicts_first, undetermined };

// Determines the order between two outcomes by fitting each as the response
// with the other (plus all attributes) as predictors; lower AIC wins.
inline AicDirection order_outcomes_by_aic(const BinaryFeatureSet& features,
                                          const std::vector<EimOutcomes>& outcomes,
                                          const std::string& outcome_a,
                                          const std::string& outcome_b, double tie_tol = 1e-6) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (detail::outcome_value(outcomes[i], outcome_a) &&
            detail::outcome_value(outcomes[i], outcome_b)) {
            rows.push_back(i);
        }
    }
    const std::size_t n = rows.size();
    if (n == 0) throw DataError("order_outcomes_by_aic: no rows with both outcomes");

    auto build = [&](const std::string& response, const std::string& predictor) {
        DesignMatrix d = DesignMatrix::with_rows(n);
        d.add_intercept();
        Eigen::VectorXd col(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = static_cast<double>(*detail::outcome_value(outcomes[rows[i]], predictor));
        }
        d.add_column(predictor, col);
        for (const auto& name : features.feature_names) {
            const std::size_t j = features.index_of(name);
            Eigen::VectorXd fcol(n);
            for (std::size_t i = 0; i < n; ++i) fcol[i] = features.values[rows[i]][j];
            d.add_column(name, fcol);
        }
        Eigen::VectorXd y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<double>(*detail::outcome_value(outcomes[rows[i]], response));
        }
        return fit_logistic_irls(d, y);
    };

    // "a predicts b" means b is the response.
    const FittedGlm a_predicts_b = build(outcome_b, outcome_a);
    const FittedGlm b_predicts_a = build(outcome_a, outcome_b);
    if (std::abs(a_predicts_b.aic - b_predicts_a.aic) <= tie_tol) {
        return AicDirection::undetermined;
    }
    return a_predicts_b.aic < b_predicts_a.aic ? AicDirection::first_predicts_second
                                               : AicDirection::second_predicts_first;
}

struct ComparisonRow {
    std::string target;
    std::string input;
    // graph name -> (OR, p); absent entry means no edge in that graph.
    std::map<std::string, std::pair<double, double>> per_graph;
};

struct GraphComparison {
    std::vector<std::string> graph_names;
    std::vector<ComparisonRow> rows;
    // Inputs whose edges point at different targets across graphs (a
    // neighborhood migration): an input with an edge into T in one graph,
    // missing there in another graph that instead connects it elsewhere.
    std::vector<std::string> migrations;
};

inline GraphComparison compare_graphs(
    const std::vector<std::pair<std::string, EimGraph>>& graphs) {
    if (graphs.empty()) throw DataError("compare_graphs: no graphs");
    const std::set<std::string> vocab(graphs.front().second.nodes.begin(),
                                      graphs.front().second.nodes.end());
    for (const auto& [name, g] : graphs) {
        const std::set<std::string> other(g.nodes.begin(), g.nodes.end());
        if (other != vocab) {
            std::string unshared;
            std::set<std::string> sym;
            std::set_symmetric_difference(vocab.begin(), vocab.end(), other.begin(), other.end(),
                                          std::inserter(sym, sym.end()));
            for (const auto& s : sym) {
                if (!unshared.empty()) unshared += ", ";
                unshared += s;
            }
            throw DataError("compare_graphs: vocabulary mismatch, unshared nodes: " + unshared);
        }
    }

    GraphComparison cmp;
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& [name, g] : graphs) {
        cmp.graph_names.push_back(name);
        for (const auto& e : g.edges) keys.insert({e.target, e.source});
    }
    for (const auto& [target, input] : keys) {
        ComparisonRow row{target, input, {}};
        for (const auto& [name, g] : graphs) {
            if (const GraphEdge* e = g.find_edge(input, target)) {
                row.per_graph[name] = {e->adjusted_or, e->p_value};
            }
        }
        cmp.rows.push_back(std::move(row));
    }

    // Migration: input X has edge X->T in graph A and edges in graph B, but
    // X->T is not among them and B has some X->T' that A lacks.
    std::set<std::string> migrated;
    for (const auto& [name_a, ga] : graphs) {
        for (const auto& [name_b, gb] : graphs) {
            if (name_a == name_b) continue;
            for (const auto& ea : ga.edges) {
                if (gb.has_edge(ea.source, ea.target)) continue;
                bool b_has_elsewhere = false;
                for (const auto& eb : gb.edges) {
                    if (eb.source == ea.source && !ga.has_edge(eb.source, eb.target)) {
                        b_has_elsewhere = true;
                        break;
                    }
                }
                if (b_has_elsewhere) migrated.insert(ea.source);
            }
        }
    }
    cmp.migrations.assign(migrated.begin(), migrated.end());
    return cmp;
}

inline nlohmann::json to_json(const EimGraph& graph) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : graph.edges) {
        edges.push_back({{"source", e.source},
                         {"target", e.target},
                         {"or", e.adjusted_or},
                         {"p", e.p_value},
                         {"n", e.n_used}});
    }
    return nlohmann::json{{"nodes", graph.nodes}, {"edges", edges}};
}

inline EimGraph graph_from_json(const nlohmann::json& j) {
    EimGraph g;
    g.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
        g.edges.push_back({e.at("source").get<std::string>(), e.at("target").get<std::string>(),
                           e.at("or").get<double>(), e.at("p").get<double>(),
                           e.at("n").get<std::size_t>()});
    }
    return g;
}

// Human-readable table: Target, Input, OR (p).
inline std::string render_graph_table(const EimGraph& graph) {
    std::ostringstream os;
    os << std::left << std::setw(16) << "Target" << std::setw(30) << "Input"
       << "OR (p)\n";
    os << std::string(56, '-') << "\n";
    for (const auto& e : graph.edges) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(2) << e.adjusted_or << " (";
        if (e.p_value < 0.01) {
            cell << "<0.01";
        } else {
            cell << std::fixed << std::setprecision(2) << e.p_value;
        }
        cell << ")";
        os << std::left << std::setw(16) << e.target << std::setw(30) << e.source << cell.str()
           << "\n";
    }
    return os.str();
}

}  // namespace eim
