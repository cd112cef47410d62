#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "eim/l1.hpp"

using namespace eim;

namespace {

// 3 active features (planted coefficients) and 7 exact nulls.
struct PlantedSparse {
    DesignMatrix design;
    Eigen::VectorXd y;
    std::vector<std::string> active{"f0", "f1", "f2"};
};

PlantedSparse make_planted(int n, std::uint64_t seed) {
    PlantedSparse out;
    out.design = DesignMatrix::with_rows(n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Eigen::MatrixXd X(n, 10);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 10; ++j) X(i, j) = unif(rng) < 0.4 ? 1.0 : 0.0;
    }
    for (int j = 0; j < 10; ++j) {
        out.design.add_column("f" + std::to_string(j), X.col(j));
    }
    out.y.resize(n);
    for (int i = 0; i < n; ++i) {
        const double eta = -0.4 + 1.1 * X(i, 0) - 0.9 * X(i, 1) + 0.8 * X(i, 2);
        out.y[i] = unif(rng) < sigmoid(eta) ? 1.0 : 0.0;
    }
    return out;
}

}  // namespace

TEST_CASE("huge lambda shrinks every penalized coefficient to zero") {
    auto instance = make_planted(500, 1);
    L1Config cfg;
    cfg.lambda_grid = {10.0};
    const auto path = fit_l1_logistic(instance.design, instance.y, cfg);
    REQUIRE(path.entries.size() == 1);
    CHECK(path.entries[0].support.empty());
    for (int j = 1; j <= 10; ++j) CHECK(path.entries[0].beta[j] == 0.0);
}

TEST_CASE("tiny lambda reproduces the unregularized fit") {
    auto instance = make_planted(2000, 2);
    L1Config cfg;
    cfg.lambda_grid = {1e-3, 1e-7};  // warm start into an effectively unpenalized fit
    const auto path = fit_l1_logistic(instance.design, instance.y, cfg);

    auto full = DesignMatrix::with_rows(2000);
    full.add_intercept();
    for (int j = 0; j < 10; ++j) {
        full.add_column("f" + std::to_string(j),
                        instance.design.X.col(instance.design.index_of("f" + std::to_string(j))));
    }
    const auto oracle = fit_logistic_irls(full, instance.y);
    const auto& beta = path.entries.back().beta;
    for (int j = 0; j <= 10; ++j) {
        CHECK_THAT(beta[j], Catch::Matchers::WithinAbs(oracle.beta[j], 1e-3));
    }
}

TEST_CASE("BIC-selected lambda recovers the planted support") {
    auto instance = make_planted(5000, 3);
    const auto path = fit_l1_logistic(instance.design, instance.y);
    CHECK(path.entries.size() == 50);
    const auto sel = select_lambda(path, instance.design, instance.y);
    auto support = sel.support;
    std::sort(support.begin(), support.end());
    CHECK(support == instance.active);
}

TEST_CASE("single-lambda path selects that lambda") {
    auto instance = make_planted(800, 4);
    L1Config cfg;
    cfg.lambda_grid = {0.02};
    const auto path = fit_l1_logistic(instance.design, instance.y, cfg);
    const auto sel = select_lambda(path, instance.design, instance.y);
    CHECK(sel.lambda == 0.02);
    CHECK(sel.path_index == 0);
}

TEST_CASE("all-null features select the empty support") {
    const int n = 3000;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto design = DesignMatrix::with_rows(n);
    Eigen::MatrixXd X(n, 6);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 6; ++j) X(i, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
    }
    for (int j = 0; j < 6; ++j) design.add_column("n" + std::to_string(j), X.col(j));
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = unif(rng) < 0.35 ? 1.0 : 0.0;

    const auto path = fit_l1_logistic(design, y);
    const auto sel = select_lambda(path, design, y);
    // BIC comparison oracle: the null model's ln(n) penalty beats any noise fit.
    CHECK(sel.support.empty());
}

TEST_CASE("constant penalized column is rejected") {
    auto design = DesignMatrix::with_rows(100);
    design.add_column("const", Eigen::VectorXd::Ones(100));
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) y[i] = i % 2;
    CHECK_THROWS_AS(fit_l1_logistic(design, y), DataError);
}

TEST_CASE("path support is monotone-ish: largest lambda has smallest support") {
    auto instance = make_planted(2000, 8);
    const auto path = fit_l1_logistic(instance.design, instance.y);
    CHECK(path.entries.front().support.size() <= path.entries.back().support.size());
    CHECK(path.entries.front().support.size() <= 1);
    CHECK(path.entries.back().support.size() >= 3);
}
