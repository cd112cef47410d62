#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "eim/interaction.hpp"

using namespace eim;

namespace {

// Planted coefficients for the effective-size-recurring model, in the order
// Intercept, Short Call (30min), Meeting Size, ShortCall:Size, Recurring,
// Recurring:Size.
struct SizeModelCoefs {
    double intercept = 3.80;
    double short_call = -0.27;
    double size = -0.06;
    double short_x_size = 0.00;
    double recurring = -0.37;
    double recurring_x_size = 0.03;
};

double size_model_logit(const SizeModelCoefs& c, double size, double recurring,
                        double short_call) {
    return c.intercept + c.short_call * short_call + c.size * size +
           c.short_x_size * short_call * size + c.recurring * recurring +
           c.recurring_x_size * recurring * size;
}

std::vector<AttendeeMeetingRecord> generate_size_model(int n, std::uint64_t seed,
                                                       const SizeModelCoefs& c) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<AttendeeMeetingRecord> records;
    records.reserve(n);
    for (int i = 0; i < n; ++i) {
        AttendeeMeetingRecord r;
        r.meeting_id = "m" + std::to_string(i);
        r.user_id = "u" + std::to_string(i % 500);
        r.org_id = "o";
        // A wide size range keeps the outcome off its ceiling so the main
        // effects are identifiable at reasonable precision.
        r.meeting_size = 2 + static_cast<int>(unif(rng) * 79.0);
        r.call_duration_min = unif(rng) < 0.5 ? 5.0 + unif(rng) * 25.0 : 31.0 + unif(rng) * 60.0;
        r.recurring = unif(rng) < 0.5;
        r.quality_stats.assign(kQualityStatCount, 0.0);
        const double p = sigmoid(size_model_logit(c, r.meeting_size, r.recurring ? 1.0 : 0.0,
                                                  r.call_duration_min <= 30.0 ? 1.0 : 0.0));
        const bool effective = unif(rng) < p;
        r.effective_stars = effective ? 5 : 2;
        r.inclusive_stars = effective ? 5 : 2;
        r.response_time_s = 10.0;
        records.push_back(std::move(r));
    }
    return records;
}

FittedGlm planted_size_fit(const SizeModelCoefs& c) {
    const auto spec = effective_size_recurring_spec();
    FittedGlm fit;
    fit.converged = true;
    fit.names = {"Intercept"};
    for (const auto& t : spec.terms) fit.names.push_back(t.name());
    fit.beta.resize(6);
    fit.beta << c.intercept, c.short_call, c.size, c.short_x_size, c.recurring,
        c.recurring_x_size;
    fit.standard_errors = Eigen::VectorXd::Ones(6);
    fit.p_values = Eigen::VectorXd::Zero(6);
    fit.n = 1;
    return fit;
}

}  // namespace

TEST_CASE("planted size-model coefficients are recovered at n=50000") {
    const SizeModelCoefs c;
    const auto records = generate_size_model(50000, 13, c);
    const auto fit = fit_spec(records, effective_size_recurring_spec());
    REQUIRE(fit.names.size() == 6);
    const std::vector<double> planted{c.intercept, c.short_call, c.size,
                                      c.short_x_size, c.recurring, c.recurring_x_size};
    for (std::size_t j = 0; j < planted.size(); ++j) {
        INFO(fit.names[j]);
        CHECK_THAT(fit.beta[static_cast<Eigen::Index>(j)],
                   Catch::Matchers::WithinAbs(planted[j], 0.05));
    }
}

TEST_CASE("a duplicated term makes the design singular") {
    const auto records = generate_size_model(500, 62, {});
    ModelSpec spec;
    spec.outcome = "Effective";
    spec.terms = {{{"Meeting Size"}}, {{"Meeting Size"}}};
    CHECK_THROWS_AS(fit_spec(records, spec), DataError);
}

TEST_CASE("intercept-only spec recovers the empirical logit") {
    const auto records = generate_size_model(4000, 63, {});
    ModelSpec spec;
    spec.outcome = "Effective";
    const auto fit = fit_spec(records, spec);
    std::size_t pos = 0;
    for (const auto& r : records) pos += *derive_outcomes(r).effective;
    const double rate = static_cast<double>(pos) / records.size();
    CHECK_THAT(fit.beta[0],
               Catch::Matchers::WithinAbs(std::log(rate / (1.0 - rate)), 1e-6));
}

TEST_CASE("scenario prediction applies the planted coefficients") {
    const auto fit = planted_size_fit({});
    const std::map<std::string, double> scenario{
        {"Meeting Size", 2.0}, {"Recurring", 0.0}, {"Short Call (30min or less)", 0.0}};
    // logit = 3.80 - 0.06*2 = 3.68.
    CHECK_THAT(predict_scenario(fit, scenario),
               Catch::Matchers::WithinAbs(1.0 / (1.0 + std::exp(-3.68)), 1e-12));
    CHECK_THAT(predict_scenario(fit, scenario), Catch::Matchers::WithinAbs(0.975, 5e-4));

    const std::map<std::string, double> zeros{
        {"Meeting Size", 0.0}, {"Recurring", 0.0}, {"Short Call (30min or less)", 0.0}};
    CHECK_THAT(predict_scenario(fit, zeros),
               Catch::Matchers::WithinAbs(sigmoid(3.80), 1e-12));

    const std::map<std::string, double> incomplete{{"Meeting Size", 2.0}};
    CHECK_THROWS_AS(predict_scenario(fit, incomplete), DataError);
}

TEST_CASE("the video interaction lifts participation in small meetings") {
    // Coefficients of the participation-by-video model: Intercept -0.40,
    // small 2.00, video 0.16, duration 0.00, small:video 0.46,
    // video:duration 0.00, small:duration 0.00.
    const auto spec = participation_video_spec();
    FittedGlm fit;
    fit.converged = true;
    fit.names = {"Intercept"};
    for (const auto& t : spec.terms) fit.names.push_back(t.name());
    fit.beta.resize(7);
    fit.beta << -0.40, 2.00, 0.16, 0.00, 0.46, 0.00, 0.00;
    fit.standard_errors = Eigen::VectorXd::Ones(7);
    fit.p_values = Eigen::VectorXd::Zero(7);

    std::map<std::string, double> with_video{{"Meeting Size (8 or less)", 1.0},
                                             {"Video Duration > 30%", 1.0},
                                             {"CallDuration", 25.0}};
    auto without_video = with_video;
    without_video["Video Duration > 30%"] = 0.0;
    CHECK(predict_scenario(fit, with_video) > predict_scenario(fit, without_video));
}

TEST_CASE("scenario deltas: identity and the size 8 vs 10 contrast") {
    const auto fit = planted_size_fit({});
    const std::map<std::string, double> s8{
        {"Meeting Size", 8.0}, {"Recurring", 1.0}, {"Short Call (30min or less)", 1.0}};
    CHECK(scenario_delta(fit, s8, s8) == 0.0);

    auto s10 = s8;
    s10["Meeting Size"] = 10.0;
    // Direct arithmetic on the planted coefficients: for a recurring short
    // meeting the net size slope is -0.06 + 0.00 + 0.03 = -0.03 per
    // attendee, so logit(8) = 3.16 - 0.24 = 2.92, logit(10) = 2.86 and
    // delta = sigmoid(2.86) - sigmoid(2.92) = -0.0029930.
    const double oracle =
        1.0 / (1.0 + std::exp(-2.86)) - 1.0 / (1.0 + std::exp(-2.92));
    CHECK_THAT(scenario_delta(fit, s8, s10), Catch::Matchers::WithinAbs(oracle, 1e-12));
    CHECK_THAT(scenario_delta(fit, s8, s10), Catch::Matchers::WithinAbs(-0.0029930, 5e-6));
}

TEST_CASE("probability decreases monotonically in meeting size") {
    const auto fit = planted_size_fit({});
    for (double recurring : {0.0, 1.0}) {
        for (double short_call : {0.0, 1.0}) {
            double prev = 2.0;
            for (double size = 2.0; size <= 14.0; size += 1.0) {
                const std::map<std::string, double> s{
                    {"Meeting Size", size},
                    {"Recurring", recurring},
                    {"Short Call (30min or less)", short_call}};
                const double p = predict_scenario(fit, s);
                CHECK(p < prev);
                prev = p;
            }
        }
    }
}

TEST_CASE("model specs round-trip through JSON") {
    auto spec = effective_size_recurring_spec();
    const auto restored = model_spec_from_json(to_json(spec));
    CHECK(restored.outcome == spec.outcome);
    REQUIRE(restored.terms.size() == spec.terms.size());
    for (std::size_t i = 0; i < spec.terms.size(); ++i) {
        CHECK(restored.terms[i].columns == spec.terms[i].columns);
    }
    CHECK(restored.scenarios == spec.scenarios);
}
