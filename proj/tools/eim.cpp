// Command-line front door: generate -> filter -> featurize -> fit/evaluate ->
// report, with every stochastic stage driven by one --seed through named
// sub-streams.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "eim/interaction.hpp"
#include "eim/pipeline.hpp"

namespace {

using nlohmann::json;

json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw eim::IoError("cannot open '" + path.string() + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw eim::DataError("invalid JSON in '" + path.string() + "': " + e.what());
    }
    return j;
}

// Config-file fallback for flags the user did not pass; flags win.
template <typename T>
void fallback(const CLI::Option* opt, T& value, const json& config, const std::string& key) {
    if (opt->count() == 0 && config.contains(key)) value = config.at(key).get<T>();
}

eim::GeneratorSpec spec_from_config(const json& config) {
    eim::GeneratorSpec spec = eim::default_eim_spec();
    if (!config.contains("generator")) return spec;
    const json& g = config.at("generator");
    if (g.contains("n_records")) spec.n_records = g.at("n_records").get<std::size_t>();
    if (g.contains("user_pool")) spec.user_pool = g.at("user_pool").get<std::size_t>();
    if (g.contains("response_rate")) {
        spec.response.response_rate = g.at("response_rate").get<double>();
    }
    auto load_eq = [&](const char* key, eim::StructuralEquation& eq) {
        if (!g.contains(key)) return;
        eq.coefficients.clear();
        const json& e = g.at(key);
        eq.intercept = e.value("intercept", 0.0);
        if (e.contains("odds_ratios")) {
            for (const auto& [name, value] : e.at("odds_ratios").items()) {
                eq.coefficients[name] = std::log(value.get<double>());
            }
        }
    };
    load_eq("participation", spec.participation_eq);
    load_eq("inclusive", spec.inclusive_eq);
    load_eq("effective", spec.effective_eq);
    return spec;
}

int cmd_generate(const json& config, std::size_t n, std::uint64_t seed,
                 const std::string& output, bool use_default, bool verbose) {
    if (n == 0) throw eim::UsageError("--n must be positive");
    eim::GeneratorSpec spec = use_default ? eim::default_eim_spec() : spec_from_config(config);
    spec.n_records = n;
    spec.seed = seed;
    const auto result = eim::pipeline_generate(spec, output, output + ".truth.json");
    std::cout << "wrote " << result.n_records << " records to " << output << "\n"
              << "wrote ground truth to " << output << ".truth.json\n";
    if (verbose) {
        std::cout << "responded: " << result.n_responded << "\n";
    }
    return 0;
}

int cmd_fit_graph(const std::string& input, const std::string& truth_path, double alpha,
                  std::uint64_t seed, const std::string& output, bool verbose) {
    const auto records = eim::load_records(input);
    std::optional<std::vector<int>> labels;
    if (!truth_path.empty()) labels = eim::load_quality_labels(truth_path);
    const auto result =
        eim::pipeline_fit_graph(records, labels ? &*labels : nullptr, alpha, seed);
    if (!output.empty()) eim::atomic_write(output, to_json(result.graph).dump(2) + "\n");
    if (verbose) {
        std::cout << to_json(result.filter_report).dump() << "\n";
    }
    std::cout << eim::render_graph_table(result.graph);
    return 0;
}

int cmd_fit_glm(const json& config, const std::string& input, const std::string& spec_name,
                const std::string& output, const std::string& csv_output) {
    eim::ModelSpec spec;
    if (spec_name == "effective-size-recurring") {
        spec = eim::effective_size_recurring_spec();
    } else if (spec_name == "participation-video") {
        spec = eim::participation_video_spec();
    } else if (spec_name.empty() && config.contains("model_spec")) {
        spec = eim::model_spec_from_json(config.at("model_spec"));
    } else {
        throw eim::UsageError(
            "need --spec effective-size-recurring|participation-video or a "
            "model_spec config block");
    }
    const auto records = eim::load_records(input);
    const auto fit = eim::fit_spec(records, spec);
    const json result{{"fit", to_json(fit)}, {"spec", to_json(spec)}};
    if (!output.empty()) eim::atomic_write(output, result.dump(2) + "\n");
    std::cout << result["fit"].dump(2) << "\n";
    if (!spec.scenarios.empty() && !csv_output.empty()) {
        std::ostringstream csv;
        csv << "scenario,predicted_probability\n";
        for (const auto& [name, assignment] : spec.scenarios) {
            csv << name << "," << eim::predict_scenario(fit, assignment) << "\n";
        }
        eim::atomic_write(csv_output, csv.str());
    }
    return 0;
}

int cmd_evaluate(const std::string& input, const std::string& target, int splits,
                 const std::string& holdout_org, std::uint64_t seed, int trees, int depth,
                 const std::string& output) {
    if (target != "effective" && target != "inclusive") {
        throw eim::UsageError("--target must be effective or inclusive");
    }
    const auto records = eim::load_records(input);
    const auto data = eim::build_predictive_dataset(
        records, target == "effective" ? eim::PredictiveTarget::effective
                                       : eim::PredictiveTarget::inclusive);
    eim::GbdtParams params;
    params.tree_count = trees;
    params.max_depth = depth;
    json result{{"target", target}};
    if (holdout_org.empty()) {
        const auto report = eim::cross_validate(data, params, splits, 0.2, seed);
        result["cross_validation"] = to_json(report);
        std::cout << "mean AUC over " << splits << " splits: " << report.mean_auc << "\n";
    } else {
        const auto report = eim::holdout_by_org(data, params, holdout_org, splits, 0.2, seed);
        result["in_train_cv"] = to_json(report.in_train_cv);
        result["unseen_org"] = to_json(report.unseen_org);
        std::cout << "in-train CV AUC: " << report.in_train_cv.mean_auc
                  << ", unseen org AUC: " << report.unseen_org.mean_auc << "\n";
    }
    if (!output.empty()) eim::atomic_write(output, result.dump(2) + "\n");
    return 0;
}

int cmd_simulate_survey(std::size_t meetings, std::size_t users, double mean_attendees,
                        double horizon_days, double trigger_rate, double cooldown_days,
                        double timeout_s, double response_rate, double pmr,
                        double pmr_recent_boost, std::uint64_t seed,
                        const std::string& output) {
    const auto stream =
        eim::build_meeting_stream(meetings, users, mean_attendees, horizon_days, seed);
    eim::SchedulerConfig cfg;
    cfg.trigger_rate = trigger_rate;
    cfg.cooldown_days = cooldown_days;
    cfg.survey_timeout_s = timeout_s;
    cfg.seed = seed;
    eim::RespondentModel resp;
    resp.response_rate = response_rate;
    resp.pmr_base = pmr;
    resp.pmr_recent_boost = pmr_recent_boost;
    const auto log = eim::run_scheduler(stream, cfg, resp);
    eim::atomic_write(output, eim::serialize_event_log(log));
    std::size_t shown = 0;
    for (const auto& ev : log) shown += ev.shown;
    std::cout << "wrote " << log.size() << " events (" << shown << " surveys shown) to "
              << output << "\n";
    return 0;
}

int cmd_analyze_skew(const std::string& input, const std::string& group,
                     const std::string& output) {
    const auto log = eim::load_event_log(input);
    auto report = eim::analyze_skew(log);
    if (group == "days-since-last-survey") {
        report.grouped[group] = eim::pmr_by_recency(log, 7.0);
    } else if (!group.empty()) {
        throw eim::UsageError("unknown --group '" + group + "'");
    }
    const json j = to_json(report);
    if (!output.empty()) eim::atomic_write(output, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_compare_graphs(const std::vector<std::string>& inputs, const std::string& output) {
    if (inputs.size() < 2) throw eim::UsageError("compare-graphs needs at least two graph files");
    std::vector<std::pair<std::string, eim::EimGraph>> graphs;
    for (const auto& path : inputs) {
        graphs.emplace_back(std::filesystem::path(path).stem().string(),
                            eim::graph_from_json(load_json_file(path)));
    }
    const auto cmp = eim::compare_graphs(graphs);
    json rows = json::array();
    for (const auto& row : cmp.rows) {
        json per_graph = json::object();
        for (const auto& [name, orp] : row.per_graph) {
            per_graph[name] = {{"or", orp.first}, {"p", orp.second}};
        }
        rows.push_back({{"target", row.target}, {"input", row.input}, {"graphs", per_graph}});
    }
    const json j{{"graphs", cmp.graph_names}, {"rows", rows}, {"migrations", cmp.migrations}};
    if (!output.empty()) eim::atomic_write(output, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::string& input, const std::string& graph_path,
               const std::string& eval_path, const std::string& skew_path,
               const std::string& output) {
    const auto records = eim::load_records(input);
    auto [kept, filter_report] = eim::apply_filters(records);
    std::size_t responded = 0, participated = 0, effective = 0, inclusive = 0;
    for (const auto& r : kept) {
        const auto o = eim::derive_outcomes(r);
        participated += o.participation;
        if (o.effective) {
            ++responded;
            effective += *o.effective;
            inclusive += *o.inclusive;
        }
    }
    json j{{"records", records.size()},
           {"filters", to_json(filter_report)},
           {"responded", responded},
           {"participation_rate",
            kept.empty() ? 0.0 : static_cast<double>(participated) / kept.size()}};
    if (responded > 0) {
        j["effective_rate"] = static_cast<double>(effective) / responded;
        j["inclusive_rate"] = static_cast<double>(inclusive) / responded;
    }
    if (!graph_path.empty()) j["graph"] = load_json_file(graph_path);
    if (!eval_path.empty()) j["evaluation"] = load_json_file(eval_path);
    if (!skew_path.empty()) j["skew"] = load_json_file(skew_path);
    if (!output.empty()) eim::atomic_write(output, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Meeting-telemetry analysis toolkit"};
    app.fallthrough();  // global flags may appear after the subcommand name
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string input, output;
    bool verbose = false;
    app.add_option("--config", config_path, "JSON config file (flags win over config)");
    auto* seed_opt = app.add_option("--seed", seed, "master random seed");
    app.add_option("--input", input, "input file");
    app.add_option("--output", output, "output file");
    app.add_flag("--verbose", verbose, "chatty progress output");

    auto* gen = app.add_subcommand("generate", "generate synthetic records + ground truth");
    std::size_t n = 10000;
    bool use_default = false;
    auto* n_opt = gen->add_option("--n", n, "record count");
    gen->add_flag("--default", use_default, "use the built-in generator spec");

    auto* fitg = app.add_subcommand("fit-graph", "fit the outcome graph from records");
    double alpha = 0.05;
    std::string truth_path;
    auto* alpha_opt = fitg->add_option("--alpha", alpha, "backward-elimination level");
    fitg->add_option("--truth", truth_path, "ground-truth sidecar (for the quality model)");

    auto* fitm = app.add_subcommand("fit-glm", "fit an interaction GLM spec");
    std::string spec_name, csv_output;
    fitm->add_option("--spec", spec_name, "canned spec name");
    fitm->add_option("--csv", csv_output, "scenario sweep CSV output");

    auto* eval = app.add_subcommand("evaluate", "cross-validated predictive AUC");
    std::string target = "inclusive", holdout_org;
    int splits = 50, trees = 200, depth = 4;
    eval->add_option("--target", target, "effective | inclusive");
    auto* splits_opt = eval->add_option("--splits", splits, "random split count");
    eval->add_option("--holdout-org", holdout_org, "hold out one org entirely");
    auto* trees_opt = eval->add_option("--trees", trees, "boosting rounds");
    auto* depth_opt = eval->add_option("--depth", depth, "tree depth");

    auto* sim = app.add_subcommand("simulate-survey", "run the survey scheduler");
    std::size_t meetings = 10000, users = 2000;
    double mean_attendees = 5.0, horizon_days = 90.0;
    double trigger_rate = 0.10, cooldown_days = 7.0, timeout_s = 30.0;
    double response_rate = 0.25, pmr = 0.50, pmr_recent_boost = 0.0;
    auto* meetings_opt = sim->add_option("--meetings", meetings, "meeting count");
    sim->add_option("--users", users, "user pool size");
    sim->add_option("--mean-attendees", mean_attendees, "mean meeting size");
    sim->add_option("--horizon-days", horizon_days, "simulated horizon");
    auto* trigger_opt = sim->add_option("--trigger-rate", trigger_rate, "meeting trigger rate");
    auto* cooldown_opt = sim->add_option("--cooldown-days", cooldown_days, "per-user cool-down");
    sim->add_option("--timeout", timeout_s, "survey timeout seconds");
    sim->add_option("--response-rate", response_rate, "respondent answer rate");
    sim->add_option("--pmr", pmr, "probability of a (5,5) response");
    sim->add_option("--pmr-recent-boost", pmr_recent_boost,
                    "PMR boost for exposures under 7 days apart");

    auto* skew = app.add_subcommand("analyze-skew", "rating skew analytics on an event log");
    std::string group;
    skew->add_option("--group", group, "grouping key (days-since-last-survey)");

    auto* cmpg = app.add_subcommand("compare-graphs", "side-by-side graph comparison");
    std::vector<std::string> graph_inputs;
    cmpg->add_option("--inputs", graph_inputs, "graph JSON files")->expected(-1);

    auto* rep = app.add_subcommand("report", "assemble a run report from artifacts");
    std::string graph_path, eval_path, skew_path;
    rep->add_option("--graph", graph_path, "graph JSON");
    rep->add_option("--eval", eval_path, "evaluation JSON");
    rep->add_option("--skew", skew_path, "skew JSON");

    try {
        app.parse(argc, argv);

        json config = json::object();
        if (!config_path.empty()) config = load_json_file(config_path);
        fallback(seed_opt, seed, config, "seed");
        if (gen->parsed()) {
            fallback(n_opt, n, config, "n");
            if (n_opt->count() == 0 && !config.contains("n") && config.contains("generator") &&
                config.at("generator").contains("n_records")) {
                n = config.at("generator").at("n_records").get<std::size_t>();
            }
            if (output.empty()) throw eim::UsageError("generate needs --output");
            return cmd_generate(config, n, seed, output, use_default, verbose);
        }
        if (fitg->parsed()) {
            fallback(alpha_opt, alpha, config, "alpha");
            if (input.empty()) throw eim::UsageError("fit-graph needs --input");
            return cmd_fit_graph(input, truth_path, alpha, seed, output, verbose);
        }
        if (fitm->parsed()) {
            if (input.empty()) throw eim::UsageError("fit-glm needs --input");
            return cmd_fit_glm(config, input, spec_name, output, csv_output);
        }
        if (eval->parsed()) {
            fallback(splits_opt, splits, config, "splits");
            fallback(trees_opt, trees, config, "trees");
            fallback(depth_opt, depth, config, "depth");
            if (input.empty()) throw eim::UsageError("evaluate needs --input");
            return cmd_evaluate(input, target, splits, holdout_org, seed, trees, depth, output);
        }
        if (sim->parsed()) {
            fallback(meetings_opt, meetings, config, "meetings");
            fallback(trigger_opt, trigger_rate, config, "trigger_rate");
            fallback(cooldown_opt, cooldown_days, config, "cooldown_days");
            if (output.empty()) throw eim::UsageError("simulate-survey needs --output");
            return cmd_simulate_survey(meetings, users, mean_attendees, horizon_days,
                                       trigger_rate, cooldown_days, timeout_s, response_rate,
                                       pmr, pmr_recent_boost, seed, output);
        }
        if (skew->parsed()) {
            if (input.empty()) throw eim::UsageError("analyze-skew needs --input");
            return cmd_analyze_skew(input, group, output);
        }
        if (cmpg->parsed()) return cmd_compare_graphs(graph_inputs, output);
        if (rep->parsed()) {
            if (input.empty()) throw eim::UsageError("report needs --input");
            return cmd_report(input, graph_path, eval_path, skew_path, output);
        }
        throw eim::UsageError("no subcommand");
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;  // stable usage exit code
    } catch (const eim::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const eim::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const eim::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const eim::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    }
}
