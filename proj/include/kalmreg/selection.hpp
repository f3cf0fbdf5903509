#pragma once

#include <atomic>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "kalmreg/curve.hpp"
#include "kalmreg/dataset.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/kalman.hpp"
#include "kalmreg/metrics.hpp"
#include "kalmreg/sgd.hpp"

namespace kalmreg {

/// One trained model in the ensemble: its trajectory, the filter-consolidated weights,
/// the weight-versus-loss curve, and the curve's area.
struct Candidate {
    std::string id;
    TrainConfig train_config;
    Trajectory trajectory;
    std::vector<ConsolidatedStep> consolidated;
    Curve curve;
    double auc = 0.0;
};

struct CandidateFailure {
    std::string id;
    std::string stage; // "train", "consolidate", or "curve"
    std::string message;
};

struct CandidateBatch {
    std::vector<Candidate> candidates; // successful ones, in config order
    std::vector<CandidateFailure> failures;
};

struct GenerationOptions {
    std::size_t parallelism = 1;
    WeightScalarization scalarization = WeightScalarization::Norm;
    std::vector<std::string> ids; // optional; defaults to cand-<index>
};

/// Trains one candidate per config and derives its consolidated weights, curve, and AUC.
/// Candidates are assembled in config order regardless of parallelism. A failing
/// candidate is reported, not fatal, unless every candidate fails.
inline CandidateBatch generate_candidates(const Dataset& train_data,
                                          const std::vector<TrainConfig>& configs,
                                          const KalmanConfig& kconfig,
                                          const GenerationOptions& options = {}) {
    if (configs.empty())
        throw std::invalid_argument("generate_candidates: at least one config required");
    if (!options.ids.empty() && options.ids.size() != configs.size())
        throw std::invalid_argument("generate_candidates: ids must match configs in count");
    check_kalman_config(kconfig);

    const std::size_t count = configs.size();
    std::vector<std::optional<Candidate>> slots(count);
    std::vector<std::optional<CandidateFailure>> failures(count);

    auto candidate_id = [&](std::size_t i) {
        return options.ids.empty() ? "cand-" + std::to_string(i) : options.ids[i];
    };

    auto build_one = [&](std::size_t i) {
        const std::string id = candidate_id(i);
        std::string stage = "train";
        try {
            Candidate candidate;
            candidate.id = id;
            candidate.train_config = configs[i];
            candidate.trajectory = train(train_data, configs[i]);
            stage = "consolidate";
            candidate.consolidated = consolidate(candidate.trajectory, kconfig).steps;
            stage = "curve";
            candidate.curve = build_curve(candidate.trajectory, id, options.scalarization);
            candidate.auc = auc_trapezoid(candidate.curve);
            slots[i] = std::move(candidate);
        } catch (const std::exception& e) {
            failures[i] = CandidateFailure{id, stage, e.what()};
        }
    };

    const std::size_t workers = std::min(std::max<std::size_t>(options.parallelism, 1), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) build_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) return;
                    build_one(i);
                }
            });
        }
        for (auto& t : pool) t.join();
    }

    CandidateBatch batch;
    for (std::size_t i = 0; i < count; ++i) {
        if (slots[i]) batch.candidates.push_back(std::move(*slots[i]));
        if (failures[i]) batch.failures.push_back(std::move(*failures[i]));
    }
    if (batch.candidates.empty()) {
        std::string detail;
        for (const auto& f : batch.failures)
            detail += "\n  " + f.id + " [" + f.stage + "]: " + f.message;
        throw Error("all candidates failed:" + detail);
    }
    return batch;
}

struct SelectionOutcome {
    std::size_t optimal_index = 0;
    double min_area = 0.0;
};

/// First candidate attaining the minimum AUC (strict less-than scan).
inline SelectionOutcome select_optimal(const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw Error("no optimal curve was found: candidate set is empty");
    SelectionOutcome outcome;
    outcome.min_area = std::numeric_limits<double>::infinity();
    std::size_t optimal = candidates.size(); // mirrors the -1 sentinel
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i].auc < outcome.min_area) {
            outcome.min_area = candidates[i].auc;
            optimal = i;
        }
    }
    if (optimal == candidates.size()) throw Error("no optimal curve was found");
    outcome.optimal_index = optimal;
    return outcome;
}

/// Grand mean over all N*d feature entries.
inline double average_input(const Eigen::MatrixXd& features) {
    if (features.size() == 0) throw std::invalid_argument("average_input: empty matrix");
    return features.mean();
}

/// Applies the candidate's horizon-1 consolidated weights row-wise.
inline Eigen::VectorXd predict_new_values(const Candidate& optimal, const Dataset& inputs) {
    if (optimal.consolidated.empty())
        throw std::invalid_argument("predict_new_values: candidate has no consolidated weights");
    const ConsolidatedStep& step = optimal.consolidated.front();
    if (step.weights.size() != inputs.cols())
        throw std::invalid_argument("predict_new_values: dimension mismatch");
    return (inputs.features * step.weights).array() + step.bias;
}

struct SelectionResult {
    double min_area = 0.0;
    std::size_t optimal_index = 0;
    std::string optimal_id;
    Eigen::VectorXd optimal_weights; // horizon-1 consolidated
    double optimal_bias = 0.0;
    Eigen::VectorXd predictions;
    MetricsReport metrics;
    double average_input = 0.0;
    double average_input_prediction = 0.0; // average_input * sum(weights) + bias
};

/// Picks the minimum-area candidate and evaluates it on the given data.
inline SelectionResult finalize_selection(const std::vector<Candidate>& candidates,
                                          const Dataset& eval_data) {
    const SelectionOutcome outcome = select_optimal(candidates);
    const Candidate& best = candidates[outcome.optimal_index];

    SelectionResult result;
    result.min_area = outcome.min_area;
    result.optimal_index = outcome.optimal_index;
    result.optimal_id = best.id;
    result.optimal_weights = best.consolidated.front().weights;
    result.optimal_bias = best.consolidated.front().bias;
    result.predictions = predict_new_values(best, eval_data);
    result.metrics = evaluate(eval_data.targets, result.predictions);
    result.average_input = average_input(eval_data.features);
    result.average_input_prediction =
        result.average_input * result.optimal_weights.sum() + result.optimal_bias;
    return result;
}

} // namespace kalmreg
