#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include <Eigen/Dense>

#include "kalmreg/csv.hpp"
#include "kalmreg/dataset.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/sgd.hpp"

namespace kalmreg {

struct BaselineSpec {
    enum class Kind { Ols, Ridge, Lasso };
    Kind kind = Kind::Ols;
    double lambda = 0.0;          // Ridge and Lasso penalty
    std::size_t max_iters = 10000; // Lasso
    double tol = 1e-8;            // Lasso

    std::string name() const {
        switch (kind) {
            case Kind::Ols: return "ols";
            case Kind::Ridge: return "ridge(lambda=" + format_double(lambda) + ")";
            case Kind::Lasso: return "lasso(lambda=" + format_double(lambda) + ")";
        }
        return "unknown";
    }
};

namespace detail {
inline Eigen::MatrixXd design_with_intercept(const Dataset& data) {
    Eigen::MatrixXd design(data.rows(), data.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(data.cols()) = data.features;
    return design;
}
} // namespace detail

/// Least squares via column-pivoted QR on the intercept-augmented design matrix.
inline LinearModel fit_ols(const Dataset& train) {
    check_dataset(train);
    if (train.rows() <= train.cols())
        throw std::invalid_argument("fit_ols: need more rows than features");
    const Eigen::MatrixXd design = detail::design_with_intercept(train);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    const Eigen::VectorXd r_diag = qr.matrixR().diagonal().cwiseAbs();
    const double r_max = r_diag.maxCoeff();
    const double r_min = r_diag.minCoeff();
    if (qr.rank() < design.cols() || r_min == 0.0 || r_max / r_min > 1e12)
        throw SingularityError(
            "fit_ols: design matrix is rank deficient or ill conditioned; consider ridge "
            "regression");
    const Eigen::VectorXd beta = qr.solve(train.targets);
    LinearModel model;
    model.bias = beta(0);
    model.weights = beta.tail(train.cols());
    return model;
}

/// Penalized normal equations (X^T X + lambda * I') beta = X^T y, where I' leaves the
/// intercept entry unpenalized.
inline LinearModel fit_ridge(const Dataset& train, double lambda) {
    check_dataset(train);
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("fit_ridge: lambda must be finite and >= 0");
    const Eigen::MatrixXd design = detail::design_with_intercept(train);
    Eigen::MatrixXd gram = design.transpose() * design;
    for (Eigen::Index j = 1; j < gram.rows(); ++j) gram(j, j) += lambda;
    const Eigen::VectorXd rhs = design.transpose() * train.targets;
    const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
    if (!beta.allFinite()) throw SingularityError("fit_ridge: solve failed");
    LinearModel model;
    model.bias = beta(0);
    model.weights = beta.tail(train.cols());
    return model;
}

struct LassoFit {
    LinearModel model;
    bool converged = false;
    std::size_t iterations = 0; // full coordinate sweeps
};

/// Cyclic coordinate descent with soft thresholding on the objective
/// (1/N) * ||y - X w - b||^2 + lambda * ||w||_1, intercept unpenalized.
/// Requires standardized features (zero mean, unit population stddev per column;
/// all-zero columns from standardized constants are allowed and keep zero weight).
inline LassoFit fit_lasso(const Dataset& train, double lambda, std::size_t max_iters = 10000,
                          double tol = 1e-8) {
    check_dataset(train);
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("fit_lasso: lambda must be finite and >= 0");
    if (!(tol > 0.0)) throw std::invalid_argument("fit_lasso: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("fit_lasso: max_iters must be >= 1");

    const Eigen::Index n = train.rows();
    const Eigen::Index d = train.cols();
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto col = train.features.col(j);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(n);
        const double std_pop = std::sqrt(var);
        const bool zero_column = col.isZero(0.0);
        if (!zero_column && (std::abs(mean) > 1e-6 || std::abs(std_pop - 1.0) > 1e-6))
            throw std::invalid_argument("fit_lasso: feature column " + std::to_string(j) +
                                        " is not standardized");
    }

    Eigen::VectorXd weights = Eigen::VectorXd::Zero(d);
    double bias = train.targets.mean();
    Eigen::VectorXd residual = train.targets.array() - bias;

    Eigen::VectorXd col_sq(d);
    for (Eigen::Index j = 0; j < d; ++j) col_sq(j) = train.features.col(j).squaredNorm();
    const double threshold = static_cast<double>(n) * lambda / 2.0;

    auto soft = [](double a, double t) {
        if (a > t) return a - t;
        if (a < -t) return a + t;
        return 0.0;
    };

    LassoFit fit;
    for (std::size_t sweep = 1; sweep <= max_iters; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            if (col_sq(j) == 0.0) continue;
            const double rho = train.features.col(j).dot(residual) + col_sq(j) * weights(j);
            const double updated = soft(rho, threshold) / col_sq(j);
            const double delta = updated - weights(j);
            if (delta != 0.0) {
                residual -= delta * train.features.col(j);
                weights(j) = updated;
            }
            max_change = std::max(max_change, std::abs(delta));
        }
        const double bias_delta = residual.mean();
        if (bias_delta != 0.0) {
            bias += bias_delta;
            residual.array() -= bias_delta;
        }
        max_change = std::max(max_change, std::abs(bias_delta));
        fit.iterations = sweep;
        if (max_change < tol) {
            fit.converged = true;
            break;
        }
    }
    fit.model.weights = weights;
    fit.model.bias = bias;
    return fit;
}

struct BaselineFit {
    LinearModel model;
    std::string warning; // non-empty when Lasso did not converge
};

inline BaselineFit fit_baseline(const Dataset& train, const BaselineSpec& spec) {
    BaselineFit fit;
    switch (spec.kind) {
        case BaselineSpec::Kind::Ols:
            fit.model = fit_ols(train);
            break;
        case BaselineSpec::Kind::Ridge:
            fit.model = fit_ridge(train, spec.lambda);
            break;
        case BaselineSpec::Kind::Lasso: {
            const LassoFit lasso = fit_lasso(train, spec.lambda, spec.max_iters, spec.tol);
            fit.model = lasso.model;
            if (!lasso.converged)
                fit.warning = "lasso did not converge within " + std::to_string(spec.max_iters) +
                              " sweeps";
            break;
        }
    }
    return fit;
}

} // namespace kalmreg
