#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalmreg/csv.hpp"
#include "kalmreg/dataset.hpp"
#include "kalmreg/errors.hpp"

namespace kalmreg {

enum class WeightInit { Zeros, Constant, Uniform };

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    bool shuffle_each_epoch = true;
    WeightInit init = WeightInit::Zeros;
    double init_value = 0.0; // Constant
    double init_low = -0.5;  // Uniform
    double init_high = 0.5;
};

struct LinearModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
};

struct TrajectoryRecord {
    std::size_t epoch = 0; // 1-based
    Eigen::VectorXd weights;
    double bias = 0.0;
    double loss = 0.0;
};

/// Per-epoch snapshots of (weights, bias, loss) recorded while training.
struct Trajectory {
    std::vector<TrajectoryRecord> records;
    LinearModel final_model;
};

inline void check_train_config(const TrainConfig& config) {
    if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate))
        throw std::invalid_argument("learning_rate must be finite and positive");
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (config.init == WeightInit::Uniform && !(config.init_low <= config.init_high))
        throw std::invalid_argument("uniform init requires init_low <= init_high");
    if (config.init == WeightInit::Constant && !std::isfinite(config.init_value))
        throw std::invalid_argument("constant init value must be finite");
}

inline Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != model.weights.size())
        throw std::invalid_argument("predict: feature width does not match model dimension");
    return (features * model.weights).array() + model.bias;
}

inline double predict_one(const LinearModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.weights.size())
        throw std::invalid_argument("predict: feature width does not match model dimension");
    return model.weights.dot(x) + model.bias;
}

/// One stochastic step on the squared error (y_pred - y)^2. With e = y_pred - y the
/// gradients are 2*e*x and 2*e.
inline LinearModel sgd_step(const LinearModel& model, const Eigen::VectorXd& x, double y,
                            double learning_rate) {
    const double error = predict_one(model, x) - y;
    LinearModel next;
    next.weights = model.weights - learning_rate * 2.0 * error * x;
    next.bias = model.bias - learning_rate * 2.0 * error;
    if (!next.weights.allFinite() || !std::isfinite(next.bias))
        throw DivergenceError("sgd_step produced non-finite parameters");
    return next;
}

/// Trains by per-sample SGD. Sample order is a seeded shuffle per epoch when enabled.
/// After each epoch the mean squared error of the end-of-epoch model over the full
/// training set is recorded alongside the parameters.
inline Trajectory train(const Dataset& train_data, const TrainConfig& config) {
    check_dataset(train_data);
    check_train_config(config);

    const Eigen::Index n = train_data.rows();
    const Eigen::Index d = train_data.cols();
    std::mt19937_64 rng(config.seed);

    LinearModel model;
    model.weights = Eigen::VectorXd::Zero(d);
    model.bias = 0.0;
    switch (config.init) {
        case WeightInit::Zeros:
            break;
        case WeightInit::Constant:
            model.weights.setConstant(config.init_value);
            model.bias = config.init_value;
            break;
        case WeightInit::Uniform: {
            std::uniform_real_distribution<double> dist(config.init_low, config.init_high);
            for (Eigen::Index j = 0; j < d; ++j) model.weights(j) = dist(rng);
            model.bias = dist(rng);
            break;
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    Trajectory trajectory;
    trajectory.records.reserve(config.epochs);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.shuffle_each_epoch) std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t i = 0; i < order.size(); ++i) {
            const Eigen::Index row = order[i];
            try {
                model = sgd_step(model, train_data.features.row(row).transpose(),
                                 train_data.targets(row), config.learning_rate);
            } catch (const DivergenceError&) {
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                                          ", sample " + std::to_string(i),
                                      epoch, i);
            }
        }
        const Eigen::VectorXd residual = predict(model, train_data.features) - train_data.targets;
        const double loss = residual.squaredNorm() / static_cast<double>(n);
        if (!std::isfinite(loss))
            throw DivergenceError("training loss became non-finite at epoch " +
                                      std::to_string(epoch) + ", sample " +
                                      std::to_string(order.size() - 1),
                                  epoch, order.size() - 1);
        trajectory.records.push_back({epoch, model.weights, model.bias, loss});
    }
    trajectory.final_model = model;
    return trajectory;
}

/// CSV layout: epoch, w_0..w_{d-1}, bias, loss.
inline std::string trajectory_to_csv(const Trajectory& trajectory) {
    if (trajectory.records.empty()) throw std::invalid_argument("empty trajectory");
    const Eigen::Index d = trajectory.records.front().weights.size();
    std::ostringstream out;
    out << "epoch";
    for (Eigen::Index j = 0; j < d; ++j) out << ",w_" << j;
    out << ",bias,loss\n";
    for (const auto& record : trajectory.records) {
        out << record.epoch;
        for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(record.weights(j));
        out << ',' << format_double(record.bias) << ',' << format_double(record.loss) << '\n';
    }
    return out.str();
}

inline void write_trajectory_csv(const Trajectory& trajectory,
                                 const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw CsvError("cannot open file for writing: " + path.string());
    file << trajectory_to_csv(trajectory);
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw CsvError("cannot open file: " + path.string());

    std::string line;
    if (!std::getline(file, line)) throw CsvError("empty trajectory file: " + path.string());
    const std::vector<std::string> header = split_fields(line, ',');
    if (header.size() < 4 || header.front() != "epoch" || header[header.size() - 2] != "bias" ||
        header.back() != "loss")
        throw CsvError("unexpected trajectory header in " + path.string() +
                       " (want epoch,w_0..,bias,loss)");
    const Eigen::Index d = static_cast<Eigen::Index>(header.size()) - 3;
    for (Eigen::Index j = 0; j < d; ++j) {
        if (header[static_cast<std::size_t>(j) + 1] != "w_" + std::to_string(j))
            throw CsvError("unexpected weight column '" + header[static_cast<std::size_t>(j) + 1] +
                           "' in " + path.string());
    }

    Trajectory trajectory;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_fields(line, ',');
        if (fields.size() != header.size())
            throw CsvError("row " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()),
                           line_no);
        TrajectoryRecord record;
        record.epoch =
            static_cast<std::size_t>(parse_double_field(fields[0], line_no, 1));
        record.weights.resize(d);
        for (Eigen::Index j = 0; j < d; ++j)
            record.weights(j) =
                parse_double_field(fields[static_cast<std::size_t>(j) + 1], line_no,
                                   static_cast<std::size_t>(j) + 2);
        record.bias = parse_double_field(fields[header.size() - 2], line_no, header.size() - 1);
        record.loss = parse_double_field(fields.back(), line_no, header.size());
        if (!record.weights.allFinite() || !std::isfinite(record.bias) ||
            !std::isfinite(record.loss) || record.loss < 0.0)
            throw CsvError("invalid trajectory record at row " + std::to_string(line_no),
                           line_no);
        trajectory.records.push_back(std::move(record));
    }
    if (trajectory.records.empty())
        throw CsvError("no trajectory records in " + path.string());
    trajectory.final_model.weights = trajectory.records.back().weights;
    trajectory.final_model.bias = trajectory.records.back().bias;
    return trajectory;
}

} // namespace kalmreg
