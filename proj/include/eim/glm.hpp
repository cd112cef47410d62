#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "eim/common.hpp"

namespace eim {

// Dense design matrix with named columns. Column 0 is conventionally the
// intercept when add_intercept() is used.
struct DesignMatrix {
    Eigen::MatrixXd X;
    std::vector<std::string> names;

    std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

    static DesignMatrix with_rows(std::size_t n) {
        DesignMatrix d;
        d.X.resize(static_cast<Eigen::Index>(n), 0);
        return d;
    }

    void add_column(const std::string& name, const Eigen::VectorXd& values) {
        if (values.size() != X.rows()) {
            throw DataError("design column '" + name + "' has wrong length");
        }
        for (const auto& existing : names) {
            if (existing == name) {
                throw DataError("duplicate design column name '" + name + "'");
            }
        }
        X.conservativeResize(Eigen::NoChange, X.cols() + 1);
        X.col(X.cols() - 1) = values;
        names.push_back(name);
    }

    void add_intercept() {
        add_column("Intercept", Eigen::VectorXd::Ones(X.rows()));
    }

    // Elementwise product column, named "A : B".
    void add_interaction(const std::string& a, const std::string& b) {
        const Eigen::Index ia = index_of(a);
        const Eigen::Index ib = index_of(b);
        add_column(a + " : " + b, X.col(ia).cwiseProduct(X.col(ib)));
    }

    Eigen::Index index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i) {
            if (names[i] == name) return static_cast<Eigen::Index>(i);
        }
        throw DataError("no design column named '" + name + "'");
    }
};

struct FittedGlm {
    std::vector<std::string> names;
    Eigen::VectorXd beta;
    Eigen::VectorXd standard_errors;
    Eigen::VectorXd p_values;
    double log_likelihood = 0.0;
    double aic = 0.0;
    bool converged = false;
    int iterations = 0;
    std::size_t n = 0;
};

struct IrlsOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;           // relative log-likelihood change
    double separation_bound = 30.0;    // on standardized coefficient scale
};

namespace detail {

inline double bernoulli_log_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& beta) {
    const Eigen::VectorXd eta = X * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        ll += y[i] * eta[i] - log1pexp(eta[i]);
    }
    return ll;
}

inline Eigen::VectorXd bernoulli_probabilities(const Eigen::MatrixXd& X,
                                               const Eigen::VectorXd& beta) {
    Eigen::VectorXd p = X * beta;
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = sigmoid(p[i]);
    return p;
}

inline Eigen::VectorXd column_scales(const Eigen::MatrixXd& X) {
    Eigen::VectorXd s(X.cols());
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double mean = X.col(j).mean();
        const double var = (X.col(j).array() - mean).square().sum() / n;
        s[j] = std::sqrt(var);
    }
    return s;
}

inline void check_full_rank(const Eigen::MatrixXd& X, const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < X.cols()) {
        // Columns permuted past the rank boundary are the collinear ones.
        const auto perm = qr.colsPermutation().indices();
        std::string collinear;
        for (Eigen::Index k = qr.rank(); k < X.cols(); ++k) {
            if (!collinear.empty()) collinear += ", ";
            collinear += names.empty() ? std::to_string(perm[k]) : names[perm[k]];
        }
        throw NumericalError("singular design matrix; collinear columns: " + collinear);
    }
}

}  // namespace detail

// Maximum-likelihood logistic regression by iteratively reweighted least
// squares (Newton with step-halving). Standard errors come from the inverse
// Fisher information at the optimum.
inline FittedGlm fit_logistic_irls(const DesignMatrix& design, const Eigen::VectorXd& y,
                                   const IrlsOptions& opt = {}) {
    const Eigen::MatrixXd& X = design.X;
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (n <= p) throw DataError("need more rows than design columns");
    if (y.size() != n) throw DataError("response length does not match design rows");
    const double ybar = y.mean();
    if (ybar <= 0.0 || ybar >= 1.0) throw DataError("response is constant");
    detail::check_full_rank(X, design.names);

    const Eigen::VectorXd scales = detail::column_scales(X);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = detail::bernoulli_log_likelihood(X, y, beta);
    int iter = 0;
    bool converged = false;
    for (; iter < opt.max_iterations; ++iter) {
        const Eigen::VectorXd prob = detail::bernoulli_probabilities(X, beta);
        const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
        const Eigen::VectorXd score = X.transpose() * (y - prob);
        const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success) {
            throw NumericalError("Fisher information factorization failed");
        }
        const Eigen::VectorXd step = ldlt.solve(score);

        // Step-halving keeps the log-likelihood non-decreasing.
        double scale = 1.0;
        Eigen::VectorXd beta_new;
        double ll_new = ll;
        bool improved = false;
        for (int h = 0; h < 30; ++h) {
            beta_new = beta + scale * step;
            ll_new = detail::bernoulli_log_likelihood(X, y, beta_new);
            if (ll_new >= ll - 1e-12) {
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
        beta = beta_new;

        // Diverging standardized coefficients indicate complete separation.
        for (Eigen::Index j = 0; j < p; ++j) {
            const double s = scales[j] > 0.0 ? scales[j] : 1.0;
            if (std::abs(beta[j]) * s > opt.separation_bound) {
                throw NumericalError("complete separation detected (diverging coefficient '" +
                                     design.names[j] + "')");
            }
        }

        const double rel = std::abs(ll_new - ll) / (std::abs(ll) + 1.0);
        ll = ll_new;
        if (rel < opt.tolerance) {
            converged = true;
            ++iter;
            break;
        }
    }
    if (!converged) {
        throw NumericalError("IRLS did not converge in " + std::to_string(iter) + " iterations");
    }

    const Eigen::VectorXd prob = detail::bernoulli_probabilities(X, beta);
    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));

    FittedGlm fit;
    fit.names = design.names;
    fit.beta = beta;
    fit.standard_errors.resize(p);
    fit.p_values.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        fit.standard_errors[j] = std::sqrt(std::max(cov(j, j), 0.0));
        if (fit.standard_errors[j] > 0.0) {
            const double z = beta[j] / fit.standard_errors[j];
            fit.p_values[j] = 2.0 * (1.0 - normal_cdf(std::abs(z)));
        } else {
            fit.p_values[j] = 1.0;
        }
    }
    fit.log_likelihood = ll;
    fit.aic = 2.0 * static_cast<double>(p) - 2.0 * ll;
    fit.converged = true;
    fit.iterations = iter;
    fit.n = static_cast<std::size_t>(n);
    return fit;
}

// Two-sided Wald p-value for one coefficient against the standard normal.
inline double wald_pvalue(const FittedGlm& fit, std::size_t index) {
    if (!fit.converged) throw NumericalError("wald_pvalue: fit did not converge");
    if (index >= static_cast<std::size_t>(fit.beta.size())) {
        throw DataError("wald_pvalue: coefficient index out of range");
    }
    const double se = fit.standard_errors[static_cast<Eigen::Index>(index)];
    if (se <= 0.0) throw NumericalError("wald_pvalue: degenerate inference, SE = 0");
    const double z = fit.beta[static_cast<Eigen::Index>(index)] / se;
    return 2.0 * (1.0 - normal_cdf(std::abs(z)));
}

inline double odds_ratio(const FittedGlm& fit, std::size_t index) {
    if (!fit.converged) throw NumericalError("odds_ratio: fit did not converge");
    if (index >= static_cast<std::size_t>(fit.beta.size())) {
        throw DataError("odds_ratio: coefficient index out of range");
    }
    return std::exp(fit.beta[static_cast<Eigen::Index>(index)]);
}

// Probability after applying an odds ratio to a baseline probability.
inline double convert_or_to_probability(double baseline, double odds_ratio_value) {
    if (!(baseline > 0.0 && baseline < 1.0)) {
        throw NumericalError("convert_or_to_probability: baseline must be in (0,1)");
    }
    if (!(odds_ratio_value > 0.0)) {
        throw NumericalError("convert_or_to_probability: odds ratio must be positive");
    }
    const double odds = baseline / (1.0 - baseline);
    const double scaled = odds_ratio_value * odds;
    return scaled / (1.0 + scaled);
}

enum class AicOrdering { first_lower, second_lower, tie };

inline AicOrdering compare_aic(const FittedGlm& a, const FittedGlm& b, double tie_tol = 1e-6) {
    if (!a.converged || !b.converged) throw NumericalError("compare_aic: fits must be converged");
    if (a.n != b.n) throw DataError("compare_aic: fits use different row counts");
    if (std::abs(a.aic - b.aic) <= tie_tol) return AicOrdering::tie;
    return a.aic < b.aic ? AicOrdering::first_lower : AicOrdering::second_lower;
}

inline nlohmann::json to_json(const FittedGlm& fit) {
    nlohmann::json coef = nlohmann::json::array();
    for (std::size_t j = 0; j < fit.names.size(); ++j) {
        coef.push_back({{"name", fit.names[j]},
                        {"beta", fit.beta[static_cast<Eigen::Index>(j)]},
                        {"se", fit.standard_errors[static_cast<Eigen::Index>(j)]},
                        {"p", fit.p_values[static_cast<Eigen::Index>(j)]}});
    }
    return nlohmann::json{{"coefficients", coef},
                          {"log_likelihood", fit.log_likelihood},
                          {"aic", fit.aic},
                          {"converged", fit.converged},
                          {"iterations", fit.iterations},
                          {"n", fit.n}};
}

}  // namespace eim
