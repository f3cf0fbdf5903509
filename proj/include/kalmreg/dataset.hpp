#pragma once

#include <algorithm>
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
#include "kalmreg/errors.hpp"

namespace kalmreg {

/// A regression dataset: an N x d feature matrix plus a length-N target vector.
/// All entries are finite, N >= 2, d >= 1.
struct Dataset {
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
    std::vector<std::string> feature_names;
    std::string target_name;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }
};

/// Seeded train/test partition of a source dataset.
struct SplitDataset {
    Dataset train;
    Dataset test;
    std::uint64_t seed = 0;
    double test_fraction = 0.0;
};

/// Per-column z-score parameters, fitted on training rows only.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd stddevs;
};

inline void check_dataset(const Dataset& data) {
    if (data.rows() < 2) throw std::invalid_argument("dataset must have at least 2 rows");
    if (data.cols() < 1) throw std::invalid_argument("dataset must have at least 1 feature column");
    if (data.targets.size() != data.rows())
        throw std::invalid_argument("targets length does not match feature row count");
    if (static_cast<Eigen::Index>(data.feature_names.size()) != data.cols())
        throw std::invalid_argument("feature_names size does not match feature column count");
    if (!data.features.allFinite()) throw std::invalid_argument("features contain non-finite entries");
    if (!data.targets.allFinite()) throw std::invalid_argument("targets contain non-finite entries");
}

/// Loads a delimited text file with a header row. The target column is extracted as the
/// target vector; every remaining column must be numeric and becomes a feature.
inline Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                        char delimiter = ',') {
    std::ifstream file(path);
    if (!file) throw CsvError("cannot open file: " + path.string());

    std::string line;
    if (!std::getline(file, line)) throw CsvError("empty file: " + path.string());
    const std::vector<std::string> header = split_fields(line, delimiter);

    std::size_t target_idx = header.size();
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == target_column) {
            target_idx = j;
            break;
        }
    }
    if (target_idx == header.size())
        throw CsvError("target column '" + target_column + "' not found in header of " +
                       path.string());
    if (header.size() < 2)
        throw CsvError("no feature columns besides target '" + target_column + "'");

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(file, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> fields = split_fields(line, delimiter);
        if (fields.size() != header.size()) {
            throw CsvError("row " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, expected " +
                               std::to_string(header.size()),
                           line_no);
        }
        std::vector<double> values(fields.size());
        for (std::size_t j = 0; j < fields.size(); ++j) {
            values[j] = parse_double_field(fields[j], line_no, j + 1);
            if (!std::isfinite(values[j])) {
                throw CsvError("non-finite value at row " + std::to_string(line_no) +
                                   ", column " + std::to_string(j + 1),
                               line_no, j + 1);
            }
        }
        rows.push_back(std::move(values));
    }
    if (rows.size() < 2)
        throw CsvError("fewer than 2 data rows in " + path.string());

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index d = static_cast<Eigen::Index>(header.size() - 1);
    Dataset data;
    data.features.resize(n, d);
    data.targets.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index col = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j == target_idx)
                data.targets(i) = rows[static_cast<std::size_t>(i)][j];
            else
                data.features(i, col++) = rows[static_cast<std::size_t>(i)][j];
        }
    }
    for (std::size_t j = 0; j < header.size(); ++j)
        if (j != target_idx) data.feature_names.push_back(header[j]);
    data.target_name = header[target_idx];
    check_dataset(data);
    return data;
}

/// Canonical CSV serialization: feature columns in order, target last, round-trip numbers.
inline std::string to_csv(const Dataset& data, char delimiter = ',') {
    std::ostringstream out;
    for (const auto& name : data.feature_names) out << name << delimiter;
    out << data.target_name << '\n';
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j)
            out << format_double(data.features(i, j)) << delimiter;
        out << format_double(data.targets(i)) << '\n';
    }
    return out.str();
}

inline void write_csv(const Dataset& data, const std::filesystem::path& path,
                      char delimiter = ',') {
    std::ofstream file(path);
    if (!file) throw CsvError("cannot open file for writing: " + path.string());
    file << to_csv(data, delimiter);
}

/// Generates a seeded linear dataset: standard-normal features, targets
/// X * true_weights + true_bias + N(0, noise_std). Same seed, same bytes.
inline Dataset make_synthetic(std::size_t n, std::size_t d, const Eigen::VectorXd& true_weights,
                              double true_bias, double noise_std, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("make_synthetic: n must be >= 2");
    if (d < 1) throw std::invalid_argument("make_synthetic: d must be >= 1");
    if (true_weights.size() != static_cast<Eigen::Index>(d))
        throw std::invalid_argument("make_synthetic: true_weights length does not match d");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
        throw std::invalid_argument("make_synthetic: noise_std must be finite and >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < data.features.rows(); ++i)
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) data.features(i, j) = unit(rng);

    data.targets = data.features * true_weights;
    data.targets.array() += true_bias;
    if (noise_std > 0.0) {
        for (Eigen::Index i = 0; i < data.targets.size(); ++i)
            data.targets(i) += noise_std * unit(rng);
    }

    for (std::size_t j = 0; j < d; ++j) data.feature_names.push_back("x" + std::to_string(j));
    data.target_name = "y";
    check_dataset(data);
    return data;
}

/// Deterministic shuffled partition; test row count is round(N * test_fraction).
inline SplitDataset split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    check_dataset(data);
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split: test_fraction must be in (0, 1)");

    const Eigen::Index n = data.rows();
    const Eigen::Index n_test =
        static_cast<Eigen::Index>(std::llround(static_cast<double>(n) * test_fraction));
    if (n_test < 1 || n_test >= n)
        throw Error("split: fraction " + format_double(test_fraction) + " leaves an empty part for N=" +
                    std::to_string(n));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    auto take = [&](std::size_t from, std::size_t count) {
        Dataset part;
        part.features.resize(static_cast<Eigen::Index>(count), data.cols());
        part.targets.resize(static_cast<Eigen::Index>(count));
        for (std::size_t i = 0; i < count; ++i) {
            part.features.row(static_cast<Eigen::Index>(i)) = data.features.row(order[from + i]);
            part.targets(static_cast<Eigen::Index>(i)) = data.targets(order[from + i]);
        }
        part.feature_names = data.feature_names;
        part.target_name = data.target_name;
        return part;
    };

    SplitDataset result;
    result.test = take(0, static_cast<std::size_t>(n_test));
    result.train = take(static_cast<std::size_t>(n_test), static_cast<std::size_t>(n - n_test));
    result.seed = seed;
    result.test_fraction = test_fraction;
    return result;
}

/// Fits per-column mean and population standard deviation. Constant columns keep their
/// value as the mean and get a unit stddev, so they standardize to exactly zero.
inline Standardizer fit_standardizer(const Dataset& train) {
    check_dataset(train);
    const Eigen::Index d = train.cols();
    Standardizer s;
    s.means.resize(d);
    s.stddevs.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const auto col = train.features.col(j);
        if (col.maxCoeff() == col.minCoeff()) {
            s.means(j) = col(0);
            s.stddevs(j) = 1.0;
            continue;
        }
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(col.size());
        s.means(j) = mean;
        s.stddevs(j) = std::sqrt(var);
    }
    return s;
}

inline Dataset apply_standardizer(const Standardizer& s, const Dataset& data) {
    if (s.means.size() != data.cols() || s.stddevs.size() != data.cols())
        throw std::invalid_argument("apply_standardizer: dimension mismatch");
    Dataset out = data;
    out.features = (data.features.rowwise() - s.means.transpose()).array().rowwise() /
                   s.stddevs.transpose().array();
    return out;
}

} // namespace kalmreg
