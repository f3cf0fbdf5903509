#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kalmreg/baselines.hpp"
#include "kalmreg/curve.hpp"
#include "kalmreg/dataset.hpp"
#include "kalmreg/errors.hpp"
#include "kalmreg/kalman.hpp"
#include "kalmreg/metrics.hpp"
#include "kalmreg/selection.hpp"
#include "kalmreg/sgd.hpp"

namespace kalmreg {

inline constexpr std::string_view kArtifactName = "kalmreg";
inline constexpr std::string_view kArtifactVersion = "0.1.0";

struct CsvSource {
    std::filesystem::path path;
    std::string target_column;
    char delimiter = ',';
};

struct SyntheticSpec {
    std::size_t n = 0;
    std::size_t d = 0;
    Eigen::VectorXd true_weights;
    double true_bias = 0.0;
    double noise_std = 0.0;
    std::uint64_t seed = 0;
};

struct DatasetSource {
    std::optional<CsvSource> csv;
    std::optional<SyntheticSpec> synthetic;
};

struct SplitSpec {
    double test_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct CandidateConfig {
    std::string id;
    TrainConfig train;
};

struct ExperimentConfig {
    DatasetSource dataset;
    SplitSpec split;
    bool standardize = true;
    std::vector<CandidateConfig> candidates;
    KalmanConfig kalman;
    std::vector<BaselineSpec> baselines;
    WeightScalarization scalarization = WeightScalarization::Norm;
    std::filesystem::path output_dir = "kalmreg_out";
};

// ---------------------------------------------------------------------------
// config parsing
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& path) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) throw ConfigError(path + ": unknown key '" + item.key() + "'");
    }
}

inline const json& require_key(const json& obj, const char* key, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    if (!obj.contains(key)) throw ConfigError(path + ": missing required field '" + key + "'");
    return obj.at(key);
}

inline double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path + ": expected a number");
    return v.get<double>();
}

inline bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path + ": expected a boolean");
    return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path + ": expected a string");
    return v.get<std::string>();
}

inline std::uint64_t as_seed(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer seed");
    if (!v.is_number_unsigned() && v.get<long long>() < 0)
        throw ConfigError(path + ": seed must be >= 0");
    return v.get<std::uint64_t>();
}

inline std::size_t as_count(const json& v, const std::string& path, std::size_t minimum) {
    if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
    if (!v.is_number_unsigned() && v.get<long long>() < 0)
        throw ConfigError(path + ": must be >= " + std::to_string(minimum));
    const std::size_t value = v.get<std::size_t>();
    if (value < minimum) throw ConfigError(path + ": must be >= " + std::to_string(minimum));
    return value;
}

inline bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

inline TrainConfig parse_train_config(const json& obj, const std::string& path) {
    reject_unknown_keys(obj, {"id", "learning_rate", "epochs", "seed", "shuffle_each_epoch", "init"},
                        path);
    TrainConfig config;
    config.learning_rate = as_number(require_key(obj, "learning_rate", path), path + ".learning_rate");
    config.epochs = as_count(require_key(obj, "epochs", path), path + ".epochs", 1);
    config.seed = as_seed(require_key(obj, "seed", path), path + ".seed");
    if (obj.contains("shuffle_each_epoch"))
        config.shuffle_each_epoch = as_bool(obj.at("shuffle_each_epoch"), path + ".shuffle_each_epoch");
    if (obj.contains("init")) {
        const json& init = obj.at("init");
        const std::string init_path = path + ".init";
        const std::string kind = as_string(require_key(init, "kind", init_path), init_path + ".kind");
        if (kind == "zeros") {
            reject_unknown_keys(init, {"kind"}, init_path);
            config.init = WeightInit::Zeros;
        } else if (kind == "constant") {
            reject_unknown_keys(init, {"kind", "value"}, init_path);
            config.init = WeightInit::Constant;
            config.init_value = as_number(require_key(init, "value", init_path), init_path + ".value");
        } else if (kind == "uniform") {
            reject_unknown_keys(init, {"kind", "low", "high"}, init_path);
            config.init = WeightInit::Uniform;
            config.init_low = as_number(require_key(init, "low", init_path), init_path + ".low");
            config.init_high = as_number(require_key(init, "high", init_path), init_path + ".high");
        } else {
            throw ConfigError(init_path + ".kind: expected zeros, constant, or uniform");
        }
    }
    try {
        check_train_config(config);
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return config;
}

inline BaselineSpec parse_baseline(const json& obj, const std::string& path) {
    const std::string kind = as_string(require_key(obj, "kind", path), path + ".kind");
    BaselineSpec spec;
    if (kind == "ols") {
        reject_unknown_keys(obj, {"kind"}, path);
        spec.kind = BaselineSpec::Kind::Ols;
    } else if (kind == "ridge") {
        reject_unknown_keys(obj, {"kind", "lambda"}, path);
        spec.kind = BaselineSpec::Kind::Ridge;
        spec.lambda = obj.contains("lambda") ? as_number(obj.at("lambda"), path + ".lambda") : 1.0;
    } else if (kind == "lasso") {
        reject_unknown_keys(obj, {"kind", "lambda", "max_iters", "tol"}, path);
        spec.kind = BaselineSpec::Kind::Lasso;
        spec.lambda = obj.contains("lambda") ? as_number(obj.at("lambda"), path + ".lambda") : 0.1;
        if (obj.contains("max_iters"))
            spec.max_iters = as_count(obj.at("max_iters"), path + ".max_iters", 1);
        if (obj.contains("tol")) spec.tol = as_number(obj.at("tol"), path + ".tol");
    } else {
        throw ConfigError(path + ".kind: expected ols, ridge, or lasso");
    }
    if (!(spec.lambda >= 0.0) || !std::isfinite(spec.lambda))
        throw ConfigError(path + ".lambda: must be finite and >= 0");
    if (spec.kind == BaselineSpec::Kind::Lasso && !(spec.tol > 0.0))
        throw ConfigError(path + ".tol: must be positive");
    return spec;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using detail::as_bool;
    using detail::as_count;
    using detail::as_number;
    using detail::as_seed;
    using detail::as_string;
    using detail::require_key;
    using nlohmann::json;

    if (!root.is_object()) throw ConfigError("config: expected a JSON object");
    detail::reject_unknown_keys(root,
                                {"dataset", "split", "standardize", "candidates", "kalman",
                                 "baselines", "scalarization", "output_dir"},
                                "config");

    ExperimentConfig config;

    const json& dataset = require_key(root, "dataset", "config");
    detail::reject_unknown_keys(dataset, {"csv", "synthetic"}, "dataset");
    if (dataset.contains("csv") == dataset.contains("synthetic"))
        throw ConfigError("dataset: exactly one of 'csv' or 'synthetic' is required");
    if (dataset.contains("csv")) {
        const json& csv = dataset.at("csv");
        detail::reject_unknown_keys(csv, {"path", "target_column", "delimiter"}, "dataset.csv");
        CsvSource source;
        source.path = as_string(require_key(csv, "path", "dataset.csv"), "dataset.csv.path");
        source.target_column = as_string(require_key(csv, "target_column", "dataset.csv"),
                                         "dataset.csv.target_column");
        if (csv.contains("delimiter")) {
            const std::string delim = as_string(csv.at("delimiter"), "dataset.csv.delimiter");
            if (delim.size() != 1)
                throw ConfigError("dataset.csv.delimiter: expected a single character");
            source.delimiter = delim[0];
        }
        config.dataset.csv = std::move(source);
    } else {
        const json& synth = dataset.at("synthetic");
        detail::reject_unknown_keys(synth, {"n", "d", "true_weights", "true_bias", "noise_std", "seed"},
                                    "dataset.synthetic");
        SyntheticSpec spec;
        spec.n = as_count(require_key(synth, "n", "dataset.synthetic"), "dataset.synthetic.n", 2);
        spec.d = as_count(require_key(synth, "d", "dataset.synthetic"), "dataset.synthetic.d", 1);
        const json& weights = require_key(synth, "true_weights", "dataset.synthetic");
        if (!weights.is_array() || weights.size() != spec.d)
            throw ConfigError("dataset.synthetic.true_weights: expected an array of length d");
        spec.true_weights.resize(static_cast<Eigen::Index>(spec.d));
        for (std::size_t j = 0; j < spec.d; ++j)
            spec.true_weights(static_cast<Eigen::Index>(j)) =
                as_number(weights.at(j), "dataset.synthetic.true_weights[" + std::to_string(j) + "]");
        spec.true_bias = as_number(require_key(synth, "true_bias", "dataset.synthetic"),
                                   "dataset.synthetic.true_bias");
        spec.noise_std = as_number(require_key(synth, "noise_std", "dataset.synthetic"),
                                   "dataset.synthetic.noise_std");
        if (!(spec.noise_std >= 0.0))
            throw ConfigError("dataset.synthetic.noise_std: must be >= 0");
        spec.seed = as_seed(require_key(synth, "seed", "dataset.synthetic"), "dataset.synthetic.seed");
        config.dataset.synthetic = std::move(spec);
    }

    const json& split = require_key(root, "split", "config");
    detail::reject_unknown_keys(split, {"test_fraction", "seed"}, "split");
    config.split.test_fraction =
        as_number(require_key(split, "test_fraction", "split"), "split.test_fraction");
    if (!(config.split.test_fraction > 0.0 && config.split.test_fraction < 1.0))
        throw ConfigError("split.test_fraction: must be in (0, 1)");
    config.split.seed = as_seed(require_key(split, "seed", "split"), "split.seed");

    if (root.contains("standardize"))
        config.standardize = as_bool(root.at("standardize"), "standardize");

    const json& candidates = require_key(root, "candidates", "config");
    if (!candidates.is_array() || candidates.empty())
        throw ConfigError("candidates: expected a non-empty array");
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::string path = "candidates[" + std::to_string(i) + "]";
        const json& entry = candidates.at(i);
        if (!entry.is_object()) throw ConfigError(path + ": expected an object");
        CandidateConfig cand;
        cand.id = entry.contains("id") ? as_string(entry.at("id"), path + ".id")
                                       : "cand-" + std::to_string(i);
        if (!detail::valid_id(cand.id))
            throw ConfigError(path + ".id: ids may contain [A-Za-z0-9._-] only");
        cand.train = detail::parse_train_config(entry, path);
        config.candidates.push_back(std::move(cand));
    }
    for (std::size_t i = 0; i < config.candidates.size(); ++i)
        for (std::size_t j = i + 1; j < config.candidates.size(); ++j)
            if (config.candidates[i].id == config.candidates[j].id)
                throw ConfigError("candidates: duplicate id '" + config.candidates[i].id + "'");

    if (root.contains("kalman")) {
        const json& kalman = root.at("kalman");
        detail::reject_unknown_keys(kalman, {"ranger", "measurement_noise", "horizon", "process_noise"},
                                    "kalman");
        if (kalman.contains("ranger"))
            config.kalman.ranger = as_count(kalman.at("ranger"), "kalman.ranger", 1);
        if (kalman.contains("measurement_noise"))
            config.kalman.measurement_noise =
                as_number(kalman.at("measurement_noise"), "kalman.measurement_noise");
        if (kalman.contains("horizon"))
            config.kalman.horizon = as_count(kalman.at("horizon"), "kalman.horizon", 1);
        if (kalman.contains("process_noise"))
            config.kalman.process_noise =
                as_number(kalman.at("process_noise"), "kalman.process_noise");
        try {
            check_kalman_config(config.kalman);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("kalman: ") + e.what());
        }
    }

    if (root.contains("baselines")) {
        const json& baselines = root.at("baselines");
        if (!baselines.is_array()) throw ConfigError("baselines: expected an array");
        for (std::size_t i = 0; i < baselines.size(); ++i)
            config.baselines.push_back(
                detail::parse_baseline(baselines.at(i), "baselines[" + std::to_string(i) + "]"));
    }

    if (root.contains("scalarization")) {
        const std::string mode = as_string(root.at("scalarization"), "scalarization");
        if (mode == "norm")
            config.scalarization = WeightScalarization::Norm;
        else if (mode == "first_coordinate")
            config.scalarization = WeightScalarization::FirstCoordinate;
        else if (mode == "mean")
            config.scalarization = WeightScalarization::Mean;
        else
            throw ConfigError("scalarization: expected norm, first_coordinate, or mean");
    }

    if (root.contains("output_dir"))
        config.output_dir = as_string(root.at("output_dir"), "output_dir");

    return config;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(file);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config parse error in " + path.string() + ": " + e.what());
    }
    return parse_config(root);
}

inline nlohmann::json candidate_config_json(const CandidateConfig& cand) {
    nlohmann::json entry = {{"id", cand.id},
                            {"learning_rate", cand.train.learning_rate},
                            {"epochs", cand.train.epochs},
                            {"seed", cand.train.seed},
                            {"shuffle_each_epoch", cand.train.shuffle_each_epoch}};
    switch (cand.train.init) {
        case WeightInit::Zeros:
            entry["init"] = {{"kind", "zeros"}};
            break;
        case WeightInit::Constant:
            entry["init"] = {{"kind", "constant"}, {"value", cand.train.init_value}};
            break;
        case WeightInit::Uniform:
            entry["init"] = {{"kind", "uniform"},
                             {"low", cand.train.init_low},
                             {"high", cand.train.init_high}};
            break;
    }
    return entry;
}

/// Canonical JSON form of a config; the digest is computed over this rendering so it is
/// independent of formatting and of spelled-out defaults.
inline nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json root;
    if (config.dataset.csv) {
        root["dataset"]["csv"] = {{"path", config.dataset.csv->path.string()},
                                  {"target_column", config.dataset.csv->target_column},
                                  {"delimiter", std::string(1, config.dataset.csv->delimiter)}};
    } else if (config.dataset.synthetic) {
        const SyntheticSpec& s = *config.dataset.synthetic;
        std::vector<double> weights(s.true_weights.data(), s.true_weights.data() + s.true_weights.size());
        root["dataset"]["synthetic"] = {{"n", s.n},           {"d", s.d},
                                        {"true_weights", weights}, {"true_bias", s.true_bias},
                                        {"noise_std", s.noise_std}, {"seed", s.seed}};
    }
    root["split"] = {{"test_fraction", config.split.test_fraction}, {"seed", config.split.seed}};
    root["standardize"] = config.standardize;
    for (const auto& cand : config.candidates)
        root["candidates"].push_back(candidate_config_json(cand));
    root["kalman"] = {{"ranger", config.kalman.ranger},
                      {"measurement_noise", config.kalman.measurement_noise},
                      {"horizon", config.kalman.horizon},
                      {"process_noise", config.kalman.process_noise}};
    root["baselines"] = nlohmann::json::array();
    for (const auto& spec : config.baselines) {
        nlohmann::json entry;
        switch (spec.kind) {
            case BaselineSpec::Kind::Ols:
                entry = {{"kind", "ols"}};
                break;
            case BaselineSpec::Kind::Ridge:
                entry = {{"kind", "ridge"}, {"lambda", spec.lambda}};
                break;
            case BaselineSpec::Kind::Lasso:
                entry = {{"kind", "lasso"},
                         {"lambda", spec.lambda},
                         {"max_iters", spec.max_iters},
                         {"tol", spec.tol}};
                break;
        }
        root["baselines"].push_back(std::move(entry));
    }
    switch (config.scalarization) {
        case WeightScalarization::Norm: root["scalarization"] = "norm"; break;
        case WeightScalarization::FirstCoordinate: root["scalarization"] = "first_coordinate"; break;
        case WeightScalarization::Mean: root["scalarization"] = "mean"; break;
    }
    root["output_dir"] = config.output_dir.string();
    return root;
}

inline std::string fnv1a_digest(std::string_view bytes) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[hash & 0xf];
        hash >>= 4;
    }
    return out;
}

/// Digest over everything that influences the numbers; the output directory is
/// excluded so the same experiment hashes identically wherever it is written.
inline std::string config_digest(const ExperimentConfig& config) {
    nlohmann::json canonical = config_to_json(config);
    canonical.erase("output_dir");
    return fnv1a_digest(canonical.dump());
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// running and reporting
// ---------------------------------------------------------------------------

struct CandidateSummary {
    std::string id;
    std::string config_digest; // digest of this candidate's training config
    bool ok = false;
    double final_loss = 0.0; // last recorded epoch loss
    double auc = 0.0;
    std::string stage; // failure stage when not ok
    std::string error;
};

struct MethodMetrics {
    std::string method;
    MetricsReport metrics;
    std::string warning;
};

struct ExperimentReport {
    std::string config_digest;
    std::string timestamp;
    std::vector<CandidateSummary> candidates;
    SelectionResult selection;
    std::vector<MethodMetrics> table;
};

struct RunOptions {
    std::size_t parallelism = 1;
    std::optional<std::filesystem::path> output_dir; // overrides the config
};

struct ExperimentOutcome {
    ExperimentReport report;
    std::vector<Candidate> candidates;
    std::vector<CandidateFailure> failures;
};

inline nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json root;
    root["artifact"] = {{"name", std::string(kArtifactName)},
                        {"version", std::string(kArtifactVersion)}};
    root["provenance"] = {{"config_digest", report.config_digest},
                          {"timestamp", report.timestamp}};
    root["candidates"] = nlohmann::json::array();
    for (const auto& summary : report.candidates) {
        nlohmann::json entry = {{"id", summary.id},
                                {"config_digest", summary.config_digest},
                                {"status", summary.ok ? "ok" : "failed"}};
        if (summary.ok) {
            entry["final_loss"] = summary.final_loss;
            entry["auc"] = summary.auc;
        } else {
            entry["stage"] = summary.stage;
            entry["error"] = summary.error;
        }
        root["candidates"].push_back(std::move(entry));
    }
    const SelectionResult& sel = report.selection;
    std::vector<double> weights(sel.optimal_weights.data(),
                                sel.optimal_weights.data() + sel.optimal_weights.size());
    root["selection"] = {{"min_area", sel.min_area},
                         {"optimal_index", sel.optimal_index},
                         {"optimal_id", sel.optimal_id},
                         {"weights", weights},
                         {"bias", sel.optimal_bias},
                         {"average_input", sel.average_input},
                         {"average_input_prediction", sel.average_input_prediction}};
    root["metrics"] = nlohmann::json::array();
    for (const auto& row : report.table) {
        nlohmann::json entry = {{"method", row.method},
                                {"mse", row.metrics.mse},
                                {"rmse", row.metrics.rmse},
                                {"r_squared", row.metrics.r_squared},
                                {"n", row.metrics.n}};
        if (!row.warning.empty()) entry["warning"] = row.warning;
        root["metrics"].push_back(std::move(entry));
    }
    return root;
}

inline std::string metrics_markdown(const ExperimentReport& report) {
    std::ostringstream out;
    out << "# Metrics\n\n";
    out << "| Method | MSE | RMSE | R-squared | N |\n";
    out << "|--------|-----|------|-----------|---|\n";
    for (const auto& row : report.table) {
        out << "| " << row.method << " | " << format_double(row.metrics.mse) << " | "
            << format_double(row.metrics.rmse) << " | " << format_double(row.metrics.r_squared)
            << " | " << row.metrics.n << " |\n";
    }
    return out.str();
}

/// Writes report.json, metrics.md, per-candidate trajectory and curve CSVs, and the
/// optimal candidate's consolidated-weights CSV into the output directory.
inline void emit_report(const ExperimentOutcome& outcome,
                        const std::filesystem::path& output_dir) {
    std::filesystem::create_directories(output_dir);
    auto write_file = [&](const std::filesystem::path& name, const std::string& content) {
        std::ofstream file(output_dir / name);
        if (!file) throw Error("cannot write " + (output_dir / name).string());
        file << content;
    };
    write_file("report.json", report_to_json(outcome.report).dump(2) + "\n");
    write_file("metrics.md", metrics_markdown(outcome.report));
    for (const auto& candidate : outcome.candidates) {
        write_file("trajectory_" + candidate.id + ".csv", trajectory_to_csv(candidate.trajectory));
        write_file("curve_" + candidate.id + ".csv", curve_to_csv(candidate.curve));
    }
    for (const auto& candidate : outcome.candidates) {
        if (candidate.id == outcome.report.selection.optimal_id) {
            write_file("consolidated_weights.csv", consolidated_to_csv(candidate.consolidated));
            break;
        }
    }
}

/// Runs the full pipeline: load, split, standardize, train the candidate ensemble,
/// consolidate, build curves, select by minimum area, evaluate against baselines, and
/// write all artifacts. Deterministic for a fixed config at any parallelism level.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config,
                                        const RunOptions& options = {}) {
    auto stage_error = [](const std::string& stage, const std::exception& e) {
        return Error("stage " + stage + ": " + e.what());
    };

    Dataset full;
    try {
        if (config.dataset.csv) {
            full = load_csv(config.dataset.csv->path, config.dataset.csv->target_column,
                            config.dataset.csv->delimiter);
        } else if (config.dataset.synthetic) {
            const SyntheticSpec& s = *config.dataset.synthetic;
            full = make_synthetic(s.n, s.d, s.true_weights, s.true_bias, s.noise_std, s.seed);
        } else {
            throw ConfigError("no dataset source configured");
        }
    } catch (const std::exception& e) {
        throw stage_error("load", e);
    }

    SplitDataset parts;
    try {
        parts = split(full, config.split.test_fraction, config.split.seed);
    } catch (const std::exception& e) {
        throw stage_error("split", e);
    }

    Dataset train_data = parts.train;
    Dataset test_data = parts.test;
    if (config.standardize) {
        try {
            const Standardizer standardizer = fit_standardizer(parts.train);
            train_data = apply_standardizer(standardizer, parts.train);
            test_data = apply_standardizer(standardizer, parts.test);
        } catch (const std::exception& e) {
            throw stage_error("standardize", e);
        }
    }

    ExperimentOutcome outcome;
    try {
        GenerationOptions gen;
        gen.parallelism = options.parallelism;
        gen.scalarization = config.scalarization;
        for (const auto& cand : config.candidates) gen.ids.push_back(cand.id);
        std::vector<TrainConfig> train_configs;
        for (const auto& cand : config.candidates) train_configs.push_back(cand.train);
        CandidateBatch batch = generate_candidates(train_data, train_configs, config.kalman, gen);
        outcome.candidates = std::move(batch.candidates);
        outcome.failures = std::move(batch.failures);
    } catch (const std::exception& e) {
        throw stage_error("candidates", e);
    }

    try {
        outcome.report.selection = finalize_selection(outcome.candidates, test_data);
    } catch (const std::exception& e) {
        throw stage_error("selection", e);
    }

    outcome.report.table.push_back({"proposed", outcome.report.selection.metrics, ""});
    for (const auto& spec : config.baselines) {
        try {
            const BaselineFit fit = fit_baseline(train_data, spec);
            const Eigen::VectorXd predictions = predict(fit.model, test_data.features);
            outcome.report.table.push_back(
                {spec.name(), evaluate(test_data.targets, predictions), fit.warning});
        } catch (const std::exception& e) {
            throw stage_error("baseline " + spec.name(), e);
        }
    }

    for (const auto& cand : config.candidates) {
        const std::string digest = fnv1a_digest(candidate_config_json(cand).dump());
        bool found = false;
        for (const auto& built : outcome.candidates) {
            if (built.id == cand.id) {
                outcome.report.candidates.push_back({built.id, digest, true,
                                                     built.trajectory.records.back().loss,
                                                     built.auc, "", ""});
                found = true;
                break;
            }
        }
        if (found) continue;
        for (const auto& failure : outcome.failures) {
            if (failure.id == cand.id) {
                outcome.report.candidates.push_back(
                    {failure.id, digest, false, 0.0, 0.0, failure.stage, failure.message});
                break;
            }
        }
    }

    outcome.report.config_digest = config_digest(config);
    outcome.report.timestamp = utc_timestamp();

    try {
        emit_report(outcome, options.output_dir.value_or(config.output_dir));
    } catch (const std::exception& e) {
        throw stage_error("emit", e);
    }
    return outcome;
}

} // namespace kalmreg
