#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalmreg/csv.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/sgd.hpp"

namespace kalmreg {

/// Linear-Gaussian filter model. The transition and measurement matrices drive the
/// predict step; the measurement-noise covariance enters the gain. Process noise is
/// optional and off by default, in which case the predicted covariance is exactly
/// F * P * F^T.
struct KalmanModel {
    Eigen::MatrixXd transition;        // F, s x s
    Eigen::MatrixXd measurement;       // H, m x s
    Eigen::MatrixXd measurement_noise; // R, m x m, symmetric PSD
    std::optional<Eigen::MatrixXd> process_noise; // Q, s x s

    Eigen::Index state_dim() const { return transition.rows(); }
    Eigen::Index measurement_dim() const { return measurement.rows(); }
};

struct KalmanState {
    Eigen::VectorXd state;      // x
    Eigen::MatrixXd covariance; // P
};

struct KalmanConfig {
    std::size_t ranger = 1000;      // filter iteration budget
    double measurement_noise = 0.0; // R = r * I
    std::size_t horizon = 1;        // forward prediction steps after assimilation
    double process_noise = 0.0;     // optional Q = q * I, off at 0
};

inline void check_kalman_model(const KalmanModel& model) {
    const Eigen::Index s = model.transition.rows();
    const Eigen::Index m = model.measurement.rows();
    if (model.transition.cols() != s) throw std::invalid_argument("transition matrix must be square");
    if (model.measurement.cols() != s)
        throw std::invalid_argument("measurement matrix width must match state dimension");
    if (model.measurement_noise.rows() != m || model.measurement_noise.cols() != m)
        throw std::invalid_argument("measurement noise must be m x m");
    if (model.process_noise &&
        (model.process_noise->rows() != s || model.process_noise->cols() != s))
        throw std::invalid_argument("process noise must be s x s");
    const Eigen::MatrixXd& r = model.measurement_noise;
    if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw std::invalid_argument("measurement noise must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(r);
    if (eigs.eigenvalues().minCoeff() < -1e-10)
        throw std::invalid_argument("measurement noise must be positive semidefinite");
}

inline void check_kalman_config(const KalmanConfig& config) {
    if (config.ranger < 1) throw std::invalid_argument("ranger must be >= 1");
    if (config.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (!(config.measurement_noise >= 0.0) || !std::isfinite(config.measurement_noise))
        throw std::invalid_argument("measurement_noise must be finite and >= 0");
    if (!(config.process_noise >= 0.0) || !std::isfinite(config.process_noise))
        throw std::invalid_argument("process_noise must be finite and >= 0");
}

/// Prediction step: x = F * x, P = F * P * F^T (plus Q when configured).
inline KalmanState kf_predict(const KalmanModel& model, const KalmanState& state) {
    if (state.state.size() != model.state_dim() ||
        state.covariance.rows() != model.state_dim() ||
        state.covariance.cols() != model.state_dim())
        throw std::invalid_argument("kf_predict: state dimension mismatch");
    KalmanState next;
    next.state = model.transition * state.state;
    next.covariance = model.transition * state.covariance * model.transition.transpose();
    if (model.process_noise) next.covariance += *model.process_noise;
    if (!next.state.allFinite() || !next.covariance.allFinite())
        throw Error("kf_predict produced non-finite state");
    return next;
}

/// Correction step: K = P * H^T * (H * P * H^T + R)^-1, x = x + K * (z - H * x),
/// P = (I - K * H) * P, then P is re-symmetrized. The gain solve is pivoted rather
/// than an explicit inverse; an ill-conditioned innovation covariance is an error.
/// A noiseless identity measurement (R = 0, H = I) pins the posterior to the
/// measurement exactly, which is the limit the gain equations approach.
inline KalmanState kf_correct(const KalmanModel& model, const KalmanState& state,
                              const Eigen::VectorXd& z) {
    const Eigen::Index s = model.state_dim();
    const Eigen::Index m = model.measurement_dim();
    if (state.state.size() != s || state.covariance.rows() != s || state.covariance.cols() != s)
        throw std::invalid_argument("kf_correct: state dimension mismatch");
    if (z.size() != m) throw std::invalid_argument("kf_correct: measurement dimension mismatch");

    if (m == s && model.measurement_noise.isZero(0.0) && model.measurement.isIdentity(0.0)) {
        KalmanState pinned;
        pinned.state = z;
        pinned.covariance = Eigen::MatrixXd::Zero(s, s);
        return pinned;
    }

    const Eigen::MatrixXd innovation_cov =
        model.measurement * state.covariance * model.measurement.transpose() +
        model.measurement_noise;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(innovation_cov);
    if (!lu.isInvertible() || lu.rcond() < 1e-12)
        throw SingularityError(
            "singular innovation covariance in Kalman correction step (condition > 1e12)");

    // K = P * H^T * S^-1, computed as K^T = S^-1 * H * P^T.
    const Eigen::MatrixXd gain =
        lu.solve(model.measurement * state.covariance.transpose()).transpose();

    KalmanState next;
    next.state = state.state + gain * (z - model.measurement * state.state);
    next.covariance =
        (Eigen::MatrixXd::Identity(s, s) - gain * model.measurement) * state.covariance;
    next.covariance = ((next.covariance + next.covariance.transpose()) / 2.0).eval();
    if (!next.state.allFinite() || !next.covariance.allFinite())
        throw Error("kf_correct produced non-finite state");
    return next;
}

/// Runs min(ranger, measurement count) predict-then-correct cycles in measurement order.
inline KalmanState run_filter(const KalmanModel& model, const KalmanState& initial,
                              const std::vector<Eigen::VectorXd>& measurements,
                              std::size_t ranger) {
    check_kalman_model(model);
    if (measurements.empty())
        throw std::invalid_argument("run_filter: at least one measurement required");
    const std::size_t steps = std::min(ranger, measurements.size());
    KalmanState state = initial;
    for (std::size_t i = 0; i < steps; ++i) {
        try {
            state = kf_predict(model, state);
            state = kf_correct(model, state, measurements[i]);
        } catch (const SingularityError& e) {
            throw SingularityError("filter iteration " + std::to_string(i) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("filter iteration " + std::to_string(i) + ": " + e.what());
        }
    }
    return state;
}

/// Weight/bias portion of the filter state after one forward transition step.
struct ConsolidatedStep {
    std::size_t horizon_step = 0; // 1-based
    Eigen::VectorXd weights;
    double bias = 0.0;
};

struct Consolidation {
    std::vector<ConsolidatedStep> steps;
    KalmanState assimilated; // state right after the last measurement was absorbed
};

/// Zips each trajectory record into a measurement [w_0..w_{d-1}, bias, loss] and feeds
/// the sequence to an identity-dynamics filter (F = H = I, R = r * I). The state starts
/// at the first measurement with unit covariance; the remaining measurements are
/// assimilated (capped by ranger), then the transition is applied `horizon` more times
/// and the weight/bias slice of the state is emitted after each step.
inline Consolidation consolidate(const Trajectory& trajectory, const KalmanConfig& config) {
    check_kalman_config(config);
    if (trajectory.records.size() < 2)
        throw std::invalid_argument("consolidate: trajectory needs at least 2 records");

    const Eigen::Index d = trajectory.records.front().weights.size();
    const Eigen::Index s = d + 2;

    std::vector<Eigen::VectorXd> measurements;
    measurements.reserve(trajectory.records.size());
    for (const auto& record : trajectory.records) {
        if (record.weights.size() != d)
            throw std::invalid_argument("consolidate: inconsistent weight dimension");
        Eigen::VectorXd z(s);
        z.head(d) = record.weights;
        z(d) = record.bias;
        z(d + 1) = record.loss;
        measurements.push_back(std::move(z));
    }

    KalmanModel model;
    model.transition = Eigen::MatrixXd::Identity(s, s);
    model.measurement = Eigen::MatrixXd::Identity(s, s);
    model.measurement_noise = config.measurement_noise * Eigen::MatrixXd::Identity(s, s);
    if (config.process_noise > 0.0)
        model.process_noise = config.process_noise * Eigen::MatrixXd::Identity(s, s);

    KalmanState state;
    state.state = measurements.front();
    state.covariance = Eigen::MatrixXd::Identity(s, s);

    const std::vector<Eigen::VectorXd> rest(measurements.begin() + 1, measurements.end());
    Consolidation result;
    result.assimilated = run_filter(model, state, rest, config.ranger);

    KalmanState forward = result.assimilated;
    result.steps.reserve(config.horizon);
    for (std::size_t h = 1; h <= config.horizon; ++h) {
        forward = kf_predict(model, forward);
        result.steps.push_back({h, forward.state.head(d), forward.state(d)});
    }
    return result;
}

/// CSV layout: horizon_step, w_0..w_{d-1}, bias.
inline std::string consolidated_to_csv(const std::vector<ConsolidatedStep>& steps) {
    if (steps.empty()) throw std::invalid_argument("no consolidated steps");
    const Eigen::Index d = steps.front().weights.size();
    std::ostringstream out;
    out << "horizon_step";
    for (Eigen::Index j = 0; j < d; ++j) out << ",w_" << j;
    out << ",bias\n";
    for (const auto& step : steps) {
        out << step.horizon_step;
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(step.weights(j));
        out << ',' << format_double(step.bias) << '\n';
    }
    return out.str();
}

inline void write_consolidated_csv(const std::vector<ConsolidatedStep>& steps,
                                   const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw CsvError("cannot open file for writing: " + path.string());
    file << consolidated_to_csv(steps);
}

} // namespace kalmreg
