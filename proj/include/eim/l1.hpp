#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eim/common.hpp"
#include "eim/glm.hpp"

namespace eim {

struct L1Config {
    std::vector<double> lambda_grid;  // strictly descending; empty = automatic
    int grid_size = 50;
    double lambda_min_ratio = 1e-4;
    int max_iterations = 1000;
    double tolerance = 1e-7;
};

struct L1PathEntry {
    double lambda = 0.0;
    Eigen::VectorXd beta;                // original column scale, intercept first
    std::vector<std::string> support;    // nonzero penalized columns
};

struct L1Path {
    std::vector<std::string> names;  // penalized column names (no intercept)
    std::vector<L1PathEntry> entries;
    std::size_t n = 0;
};

namespace detail {

inline double soft_threshold(double z, double g) {
    if (z > g) return z - g;
    if (z < -g) return z + g;
    return 0.0;
}

}  // namespace detail

// l1-penalized logistic regression path by coordinate descent on the IRLS
// quadratic approximation (glmnet-style). Columns are standardized internally;
// the intercept is unpenalized; reported coefficients are on the original scale.
// `design` must not contain an intercept column; one is added internally.
inline L1Path fit_l1_logistic(const DesignMatrix& design, const Eigen::VectorXd& y,
                              L1Config config = {}) {
    const Eigen::Index n = design.X.rows();
    const Eigen::Index p = design.X.cols();
    if (y.size() != n) throw DataError("response length does not match design rows");
    const double ybar = y.mean();
    if (ybar <= 0.0 || ybar >= 1.0) throw DataError("response is constant");

    // Standardize to zero mean, unit variance.
    Eigen::MatrixXd Z(n, p);
    Eigen::VectorXd mean(p), scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        mean[j] = design.X.col(j).mean();
        const double var =
            (design.X.col(j).array() - mean[j]).square().sum() / static_cast<double>(n);
        scale[j] = std::sqrt(var);
        if (scale[j] <= 0.0) {
            throw DataError("constant column '" + design.names[j] + "' cannot be penalized");
        }
        Z.col(j) = (design.X.col(j).array() - mean[j]) / scale[j];
    }

    if (config.lambda_grid.empty()) {
        // Slight inflation keeps the first grid point strictly above the entry
        // threshold so the path starts from the exactly empty support.
        const double lambda_max =
            (Z.transpose() * (y.array() - ybar).matrix()).cwiseAbs().maxCoeff() /
                static_cast<double>(n) * (1.0 + 1e-3);
        const double lo = std::log(lambda_max * config.lambda_min_ratio);
        const double hi = std::log(lambda_max);
        config.lambda_grid.resize(config.grid_size);
        for (int k = 0; k < config.grid_size; ++k) {
            const double t = static_cast<double>(k) / (config.grid_size - 1);
            config.lambda_grid[k] = std::exp(hi + t * (lo - hi));
        }
    }
    for (std::size_t k = 1; k < config.lambda_grid.size(); ++k) {
        if (config.lambda_grid[k] >= config.lambda_grid[k - 1]) {
            throw DataError("lambda grid must be strictly descending");
        }
    }

    L1Path path;
    path.names = design.names;
    path.n = static_cast<std::size_t>(n);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);  // standardized scale
    double intercept = std::log(ybar / (1.0 - ybar));

    for (double lambda : config.lambda_grid) {
        bool converged = false;
        for (int outer = 0; outer < config.max_iterations; ++outer) {
            const Eigen::VectorXd beta_before = beta;
            const double intercept_before = intercept;
            // Quadratic approximation at the current point.
            Eigen::VectorXd eta = Z * beta;
            eta.array() += intercept;
            Eigen::VectorXd prob(n), w(n), residual(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                prob[i] = sigmoid(eta[i]);
                w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-6);
                residual[i] = y[i] - prob[i];
            }
            const double wsum = w.sum();

            double max_delta = 0.0;
            // Coordinate sweeps on the fixed quadratic until stable.
            for (int sweep = 0; sweep < 100; ++sweep) {
                max_delta = 0.0;
                for (Eigen::Index j = 0; j < p; ++j) {
                    const double wj = (w.array() * Z.col(j).array().square()).sum();
                    const double grad = Z.col(j).dot(residual);
                    const double z_j = (grad + wj * beta[j]) / static_cast<double>(n);
                    const double denom = wj / static_cast<double>(n);
                    const double updated = detail::soft_threshold(z_j, lambda) / denom;
                    const double delta = updated - beta[j];
                    if (delta != 0.0) {
                        residual -= (w.array() * Z.col(j).array() * delta).matrix();
                        beta[j] = updated;
                        max_delta = std::max(max_delta, std::abs(delta));
                    }
                }
                const double di = residual.sum() / wsum;
                if (di != 0.0) {
                    intercept += di;
                    residual -= w * di;
                    max_delta = std::max(max_delta, std::abs(di));
                }
                if (max_delta < config.tolerance) break;
            }
            // Converged only when the full Newton step itself was a no-op.
            double outer_delta = std::abs(intercept - intercept_before);
            if (p > 0) {
                outer_delta = std::max(outer_delta, (beta - beta_before).cwiseAbs().maxCoeff());
            }
            if (outer_delta < config.tolerance * 10.0) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw NumericalError("l1 fit did not converge at lambda=" + std::to_string(lambda));
        }

        L1PathEntry entry;
        entry.lambda = lambda;
        entry.beta.resize(p + 1);
        double b0 = intercept;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double bj = beta[j] / scale[j];
            entry.beta[j + 1] = bj;
            b0 -= bj * mean[j];
            if (beta[j] != 0.0) entry.support.push_back(design.names[j]);
        }
        entry.beta[0] = b0;
        path.entries.push_back(std::move(entry));
    }
    return path;
}

struct LambdaSelection {
    double lambda = 0.0;
    std::size_t path_index = 0;
    std::vector<std::string> support;
    double bic = 0.0;
};

// BIC over unpenalized refits on each support: k*ln(n) - 2*loglik. Sparser
// (larger lambda) entries win ties.
inline LambdaSelection select_lambda(const L1Path& path, const DesignMatrix& design,
                                     const Eigen::VectorXd& y) {
    if (path.entries.empty()) throw DataError("select_lambda: empty path");
    LambdaSelection best;
    bool have_best = false;
    std::vector<std::string> last_support{"\x01"};  // sentinel != any real support
    for (std::size_t k = 0; k < path.entries.size(); ++k) {
        const auto& entry = path.entries[k];
        if (entry.support == last_support) continue;  // same support, same BIC
        last_support = entry.support;

        DesignMatrix sub = DesignMatrix::with_rows(path.n);
        sub.add_intercept();
        for (const auto& name : entry.support) {
            sub.add_column(name, design.X.col(design.index_of(name)));
        }
        double ll;
        try {
            ll = fit_logistic_irls(sub, y).log_likelihood;
        } catch (const NumericalError&) {
            continue;  // degenerate refit; skip this support
        }
        const double k_params = static_cast<double>(entry.support.size() + 1);
        const double bic = k_params * std::log(static_cast<double>(path.n)) - 2.0 * ll;
        if (!have_best || bic < best.bic - 1e-12) {
            best.lambda = entry.lambda;
            best.path_index = k;
            best.support = entry.support;
            best.bic = bic;
            have_best = true;
        }
    }
    if (!have_best) throw NumericalError("select_lambda: no refittable support in path");
    return best;
}

}  // namespace eim
