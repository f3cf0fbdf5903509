#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalmreg/csv.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/sgd.hpp"

namespace kalmreg {

/// How a multi-dimensional weight vector collapses to the curve's x-axis.
enum class WeightScalarization { Norm, FirstCoordinate, Mean };

struct CurvePoint {
    double weight_scalar = 0.0;
    double loss = 0.0;
};

/// Points sorted ascending by weight scalar; ties keep their epoch order.
struct Curve {
    std::vector<CurvePoint> points;
    std::string source_id;
};

/// Line through two curve points, valid on [weight_lo, weight_hi].
struct SegmentEquation {
    double slope = 0.0;
    double intercept = 0.0;
    double weight_lo = 0.0;
    double weight_hi = 0.0;

    double at(double w) const { return slope * w + intercept; }
};

/// Norm uses the Euclidean norm of [weights, bias]; Mean averages the same entries.
inline double scalarize_weights(const Eigen::VectorXd& weights, double bias,
                                WeightScalarization mode = WeightScalarization::Norm) {
    switch (mode) {
        case WeightScalarization::Norm:
            return std::sqrt(weights.squaredNorm() + bias * bias);
        case WeightScalarization::FirstCoordinate:
            return weights(0);
        case WeightScalarization::Mean:
            return (weights.sum() + bias) / static_cast<double>(weights.size() + 1);
    }
    throw std::invalid_argument("unknown weight scalarization");
}

inline Curve build_curve(const Trajectory& trajectory, std::string id,
                         WeightScalarization mode = WeightScalarization::Norm) {
    if (trajectory.records.size() < 2)
        throw std::invalid_argument("build_curve: trajectory needs at least 2 records");
    Curve curve;
    curve.source_id = std::move(id);
    curve.points.reserve(trajectory.records.size());
    for (const auto& record : trajectory.records)
        curve.points.push_back({scalarize_weights(record.weights, record.bias, mode), record.loss});
    std::stable_sort(curve.points.begin(), curve.points.end(),
                     [](const CurvePoint& a, const CurvePoint& b) {
                         return a.weight_scalar < b.weight_scalar;
                     });
    const bool all_equal = std::all_of(curve.points.begin(), curve.points.end(),
                                       [&](const CurvePoint& p) {
                                           return p.weight_scalar == curve.points.front().weight_scalar &&
                                                  p.loss == curve.points.front().loss;
                                       });
    if (all_equal)
        throw Error("build_curve: fewer than 2 distinct points for curve '" + curve.source_id +
                    "'");
    return curve;
}

inline void check_curve(const Curve& curve) {
    if (curve.points.size() < 2)
        throw std::invalid_argument("curve needs at least 2 points");
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
        const CurvePoint& p = curve.points[i];
        if (!std::isfinite(p.weight_scalar) || !std::isfinite(p.loss) || p.loss < 0.0)
            throw std::invalid_argument("curve point " + std::to_string(i) + " is invalid");
        if (i > 0 && curve.points[i - 1].weight_scalar > p.weight_scalar)
            throw std::invalid_argument("curve points are not sorted by weight");
    }
}

/// Two-point formula: slope = (l2 - l1) / (w2 - w1), intercept through p1.
inline SegmentEquation segment_equation(const CurvePoint& p1, const CurvePoint& p2) {
    if (p1.weight_scalar == p2.weight_scalar)
        throw Error("degenerate segment: both points share weight " +
                    format_double(p1.weight_scalar));
    SegmentEquation eq;
    eq.slope = (p2.loss - p1.loss) / (p2.weight_scalar - p1.weight_scalar);
    eq.intercept = p1.loss - eq.slope * p1.weight_scalar;
    eq.weight_lo = std::min(p1.weight_scalar, p2.weight_scalar);
    eq.weight_hi = std::max(p1.weight_scalar, p2.weight_scalar);
    return eq;
}

/// Per-segment line equations; zero-width segments carry no line and are skipped.
inline std::vector<SegmentEquation> segment_equations(const Curve& curve) {
    check_curve(curve);
    std::vector<SegmentEquation> segments;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (curve.points[i - 1].weight_scalar == curve.points[i].weight_scalar) continue;
        segments.push_back(segment_equation(curve.points[i - 1], curve.points[i]));
    }
    return segments;
}

/// Trapezoidal rule over consecutive points. Zero-width segments contribute nothing.
inline double auc_trapezoid(const Curve& curve) {
    check_curve(curve);
    double auc = 0.0;
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        const double width = curve.points[i].weight_scalar - curve.points[i - 1].weight_scalar;
        const double average_height = (curve.points[i].loss + curve.points[i - 1].loss) / 2.0;
        auc += width * average_height;
    }
    return auc;
}

/// CSV layout: weight_scalar, loss (sorted ascending by weight).
inline std::string curve_to_csv(const Curve& curve) {
    check_curve(curve);
    std::ostringstream out;
    out << "weight_scalar,loss\n";
    for (const auto& point : curve.points)
        out << format_double(point.weight_scalar) << ',' << format_double(point.loss) << '\n';
    return out.str();
}

inline void write_curve_csv(const Curve& curve, const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) throw CsvError("cannot open file for writing: " + path.string());
    file << curve_to_csv(curve);
}

} // namespace kalmreg
