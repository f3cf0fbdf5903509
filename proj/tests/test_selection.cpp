#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kalmreg/baselines.hpp"
#include "kalmreg/selection.hpp"

using Catch::Matchers::WithinAbs;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

kalmreg::Dataset line_dataset(std::size_t n, std::uint64_t seed) {
    return kalmreg::make_synthetic(n, 1, vec({2.0}), 1.0, 0.0, seed);
}

kalmreg::TrainConfig train_config(double lr, std::size_t epochs, std::uint64_t seed,
                                  bool shuffle = true) {
    kalmreg::TrainConfig config;
    config.learning_rate = lr;
    config.epochs = epochs;
    config.seed = seed;
    config.shuffle_each_epoch = shuffle;
    return config;
}

// a stub candidate whose flat 2-point curve has exactly the requested area
kalmreg::Candidate stub_candidate(double auc_value, const std::string& id) {
    kalmreg::Candidate candidate;
    candidate.id = id;
    candidate.curve.source_id = id;
    candidate.curve.points = {{0.0, auc_value}, {1.0, auc_value}};
    candidate.auc = kalmreg::auc_trapezoid(candidate.curve);
    return candidate;
}

} // namespace

TEST_CASE("generate_candidates singleton batch recomputes its own auc") {
    const kalmreg::Dataset data = line_dataset(50, 2);
    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(data, {train_config(0.05, 40, 1)}, kalmreg::KalmanConfig{});
    REQUIRE(batch.candidates.size() == 1);
    REQUIRE(batch.failures.empty());
    const kalmreg::Candidate& candidate = batch.candidates.front();
    REQUIRE(candidate.id == "cand-0");
    REQUIRE(candidate.auc == kalmreg::auc_trapezoid(candidate.curve));
    REQUIRE(candidate.consolidated.size() == 1);
}

TEST_CASE("candidates with different seeds produce distinct trajectories") {
    const kalmreg::Dataset data = line_dataset(60, 3);
    const std::vector<kalmreg::TrainConfig> configs{
        train_config(0.02, 30, 1), train_config(0.02, 30, 2), train_config(0.02, 30, 3)};
    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(data, configs, kalmreg::KalmanConfig{});
    REQUIRE(batch.candidates.size() == 3);
    REQUIRE(kalmreg::trajectory_to_csv(batch.candidates[0].trajectory) !=
            kalmreg::trajectory_to_csv(batch.candidates[1].trajectory));
    REQUIRE(kalmreg::trajectory_to_csv(batch.candidates[1].trajectory) !=
            kalmreg::trajectory_to_csv(batch.candidates[2].trajectory));
}

TEST_CASE("learning-rate sweep matches an independent training transcription") {
    const kalmreg::Dataset data = line_dataset(40, 5);
    const std::vector<double> rates{0.001, 0.01, 0.05};
    std::vector<kalmreg::TrainConfig> configs;
    for (double lr : rates) configs.push_back(train_config(lr, 80, 0, /*shuffle=*/false));

    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(data, configs, kalmreg::KalmanConfig{});
    REQUIRE(batch.candidates.size() == 3);

    // straight-order per-sample transcription of the same training loop
    auto oracle_final_loss = [&](double lr) {
        double w = 0.0, b = 0.0;
        for (int epoch = 0; epoch < 80; ++epoch) {
            for (Eigen::Index i = 0; i < data.rows(); ++i) {
                const double e = w * data.features(i, 0) + b - data.targets(i);
                w -= lr * 2.0 * e * data.features(i, 0);
                b -= lr * 2.0 * e;
            }
        }
        double sum = 0.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            const double e = w * data.features(i, 0) + b - data.targets(i);
            sum += e * e;
        }
        return sum / static_cast<double>(data.rows());
    };

    std::size_t lib_best = 0, oracle_best = 0;
    double lib_min = std::numeric_limits<double>::infinity();
    double oracle_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const double lib_loss = batch.candidates[i].trajectory.records.back().loss;
        const double oracle_loss = oracle_final_loss(rates[i]);
        REQUIRE_THAT(lib_loss, WithinAbs(oracle_loss, 1e-9 * std::max(1.0, oracle_loss)));
        if (lib_loss < lib_min) {
            lib_min = lib_loss;
            lib_best = i;
        }
        if (oracle_loss < oracle_min) {
            oracle_min = oracle_loss;
            oracle_best = i;
        }
    }
    REQUIRE(lib_best == oracle_best);
}

TEST_CASE("generate_candidates is parallelism invariant") {
    const kalmreg::Dataset data = line_dataset(50, 7);
    std::vector<kalmreg::TrainConfig> configs;
    for (std::uint64_t seed = 0; seed < 6; ++seed)
        configs.push_back(train_config(0.03, 25, seed));

    kalmreg::GenerationOptions serial;
    serial.parallelism = 1;
    kalmreg::GenerationOptions threaded;
    threaded.parallelism = 4;

    const kalmreg::CandidateBatch a =
        kalmreg::generate_candidates(data, configs, kalmreg::KalmanConfig{}, serial);
    const kalmreg::CandidateBatch b =
        kalmreg::generate_candidates(data, configs, kalmreg::KalmanConfig{}, threaded);
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        REQUIRE(a.candidates[i].id == b.candidates[i].id);
        REQUIRE(a.candidates[i].auc == b.candidates[i].auc);
        REQUIRE(kalmreg::trajectory_to_csv(a.candidates[i].trajectory) ==
                kalmreg::trajectory_to_csv(b.candidates[i].trajectory));
    }
}

TEST_CASE("a diverging candidate is reported without aborting the batch") {
    const kalmreg::Dataset data = line_dataset(50, 8);
    const std::vector<kalmreg::TrainConfig> configs{train_config(0.05, 20, 1),
                                                    train_config(50.0, 20, 2)};
    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(data, configs, kalmreg::KalmanConfig{});
    REQUIRE(batch.candidates.size() == 1);
    REQUIRE(batch.failures.size() == 1);
    REQUIRE(batch.failures.front().id == "cand-1");
    REQUIRE(batch.failures.front().stage == "train");

    const std::vector<kalmreg::TrainConfig> all_bad{train_config(50.0, 20, 1),
                                                    train_config(60.0, 20, 2)};
    REQUIRE_THROWS_AS(kalmreg::generate_candidates(data, all_bad, kalmreg::KalmanConfig{}),
                      kalmreg::Error);
}

TEST_CASE("select_optimal picks the first minimum") {
    std::vector<kalmreg::Candidate> candidates{stub_candidate(3.0, "a"), stub_candidate(1.5, "b"),
                                               stub_candidate(2.0, "c")};
    const kalmreg::SelectionOutcome outcome = kalmreg::select_optimal(candidates);
    REQUIRE(outcome.optimal_index == 1);
    REQUIRE(outcome.min_area == 1.5);

    std::vector<kalmreg::Candidate> tied{stub_candidate(2.0, "a"), stub_candidate(2.0, "b")};
    REQUIRE(kalmreg::select_optimal(tied).optimal_index == 0);

    try {
        kalmreg::select_optimal({});
        FAIL("expected Error");
    } catch (const kalmreg::Error& e) {
        REQUIRE(std::string(e.what()).find("no optimal curve was found") != std::string::npos);
    }
}

TEST_CASE("select_optimal matches a brute-force argmin") {
    std::mt19937 rng(19);
    std::uniform_int_distribution<int> size(1, 50);
    std::uniform_int_distribution<int> bucket(0, 9); // coarse values force ties

    for (int trial = 0; trial < 50; ++trial) {
        const int n = size(rng);
        std::vector<kalmreg::Candidate> candidates;
        std::vector<double> aucs;
        for (int i = 0; i < n; ++i) {
            const double a = 0.5 * bucket(rng);
            aucs.push_back(a);
            candidates.push_back(stub_candidate(a, "c" + std::to_string(i)));
        }
        std::size_t best = 0;
        for (std::size_t i = 1; i < aucs.size(); ++i)
            if (aucs[i] < aucs[best]) best = i;
        const kalmreg::SelectionOutcome outcome = kalmreg::select_optimal(candidates);
        REQUIRE(outcome.optimal_index == best);
        REQUIRE(outcome.min_area == aucs[best]);
    }
}

TEST_CASE("adding a candidate never increases the minimum area") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> area(0.0, 10.0);
    std::vector<kalmreg::Candidate> candidates;
    double previous = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 40; ++i) {
        candidates.push_back(stub_candidate(area(rng), "c" + std::to_string(i)));
        const double current = kalmreg::select_optimal(candidates).min_area;
        REQUIRE(current <= previous);
        previous = current;
    }
}

TEST_CASE("average_input is the grand mean") {
    Eigen::MatrixXd single(3, 1);
    single << 1, 2, 3;
    REQUIRE(kalmreg::average_input(single) == 2.0);

    REQUIRE(kalmreg::average_input(Eigen::MatrixXd::Zero(4, 2)) == 0.0);

    Eigen::MatrixXd grid(2, 2);
    grid << 1, 3, 5, 7;
    REQUIRE(kalmreg::average_input(grid) == 4.0);

    REQUIRE_THROWS_AS(kalmreg::average_input(Eigen::MatrixXd()), std::invalid_argument);
}

TEST_CASE("predict_new_values applies the horizon-1 consolidated weights") {
    kalmreg::Candidate candidate;
    candidate.consolidated = {{1, vec({2.0}), 1.0}};

    kalmreg::Dataset inputs;
    inputs.features.resize(2, 1);
    inputs.features << 3.0, -1.0;
    inputs.targets = vec({7.0, -1.0});
    inputs.feature_names = {"x"};
    inputs.target_name = "y";

    const Eigen::VectorXd out = kalmreg::predict_new_values(candidate, inputs);
    REQUIRE(out(0) == 7.0);
    REQUIRE(out(1) == -1.0);

    kalmreg::Candidate constant;
    constant.consolidated = {{1, vec({0.0}), 4.5}};
    REQUIRE(kalmreg::predict_new_values(constant, inputs) == Eigen::VectorXd::Constant(2, 4.5));

    kalmreg::Candidate mismatched;
    mismatched.consolidated = {{1, vec({1.0, 2.0}), 0.0}};
    REQUIRE_THROWS_AS(kalmreg::predict_new_values(mismatched, inputs), std::invalid_argument);
}

TEST_CASE("zero-noise consolidation predicts a noiseless line almost exactly") {
    const kalmreg::Dataset train_data = line_dataset(120, 9);
    const kalmreg::Dataset test_data = line_dataset(30, 10);

    kalmreg::KalmanConfig kconfig;
    kconfig.measurement_noise = 0.0;
    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(train_data, {train_config(0.05, 300, 1)}, kconfig);
    const Eigen::VectorXd predictions =
        kalmreg::predict_new_values(batch.candidates.front(), test_data);
    for (Eigen::Index i = 0; i < test_data.rows(); ++i)
        REQUIRE_THAT(predictions(i), WithinAbs(test_data.targets(i), 1e-2));
}

TEST_CASE("finalize_selection assembles the result") {
    const kalmreg::Dataset train_data = line_dataset(80, 12);
    const kalmreg::Dataset test_data = line_dataset(20, 13);

    kalmreg::KalmanConfig kconfig;
    kconfig.measurement_noise = 0.0;
    const std::vector<kalmreg::TrainConfig> configs{train_config(0.05, 150, 1),
                                                    train_config(0.001, 5, 2)};
    const kalmreg::CandidateBatch batch =
        kalmreg::generate_candidates(train_data, configs, kconfig);
    const kalmreg::SelectionResult result =
        kalmreg::finalize_selection(batch.candidates, test_data);

    REQUIRE(result.optimal_index < batch.candidates.size());
    REQUIRE(result.min_area == kalmreg::select_optimal(batch.candidates).min_area);
    REQUIRE(result.optimal_id == batch.candidates[result.optimal_index].id);
    REQUIRE(result.predictions.size() == test_data.rows());
    REQUIRE(result.metrics.n == 20);
    REQUIRE_THAT(result.average_input, WithinAbs(test_data.features.mean(), 1e-15));
    REQUIRE_THAT(result.average_input_prediction,
                 WithinAbs(result.average_input * result.optimal_weights.sum() + result.optimal_bias,
                           1e-15));
}

TEST_CASE("end-to-end candidate generation is deterministic") {
    const kalmreg::Dataset data = line_dataset(60, 14);
    const std::vector<kalmreg::TrainConfig> configs{train_config(0.02, 40, 1),
                                                    train_config(0.04, 40, 2)};
    kalmreg::KalmanConfig kconfig;
    kconfig.measurement_noise = 0.1;

    const kalmreg::CandidateBatch a = kalmreg::generate_candidates(data, configs, kconfig);
    const kalmreg::CandidateBatch b = kalmreg::generate_candidates(data, configs, kconfig);
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
        REQUIRE(a.candidates[i].auc == b.candidates[i].auc);
        REQUIRE(a.candidates[i].consolidated.front().weights ==
                b.candidates[i].consolidated.front().weights);
    }
}
