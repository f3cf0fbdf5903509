#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

#include <Eigen/Dense>

#include "kalmreg/errors.hpp"

namespace kalmreg {

struct MetricsReport {
    double mse = 0.0;
    double rmse = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
};

inline double mse(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("mse: vector length mismatch");
    if (y_true.size() == 0) throw std::invalid_argument("mse: empty vectors");
    return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

inline double rmse(double mse_value) {
    if (!(mse_value >= 0.0)) throw std::invalid_argument("rmse: negative input");
    return std::sqrt(mse_value);
}

/// 1 - SS_res / SS_tot. Negative when the predictor is worse than the target mean.
inline double r_squared(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("r_squared: vector length mismatch");
    if (y_true.size() < 2) throw std::invalid_argument("r_squared: need at least 2 points");
    const double mean = y_true.mean();
    const double ss_tot = (y_true.array() - mean).square().sum();
    if (ss_tot == 0.0) throw Error("r_squared undefined: targets are constant");
    const double ss_res = (y_true - y_pred).squaredNorm();
    return 1.0 - ss_res / ss_tot;
}

inline MetricsReport evaluate(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred) {
    MetricsReport report;
    report.mse = mse(y_true, y_pred);
    report.rmse = rmse(report.mse);
    report.r_squared = r_squared(y_true, y_pred);
    report.n = static_cast<std::size_t>(y_true.size());
    return report;
}

} // namespace kalmreg
