#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "kalmreg/baselines.hpp"
#include "kalmreg/dataset.hpp"

using Catch::Matchers::WithinAbs;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> values) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

kalmreg::Dataset three_points() {
    kalmreg::Dataset data;
    data.features.resize(3, 1);
    data.features << 0, 1, 2;
    data.targets.resize(3);
    data.targets << 1, 3, 5;
    data.feature_names = {"x"};
    data.target_name = "y";
    return data;
}

kalmreg::Dataset standardized_random(std::size_t n, std::size_t d, std::uint64_t seed,
                                     double noise = 0.5) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = 0.5 * static_cast<double>(j + 1);
    const kalmreg::Dataset raw = kalmreg::make_synthetic(n, d, w, 1.0, noise, seed);
    return kalmreg::apply_standardizer(kalmreg::fit_standardizer(raw), raw);
}

} // namespace

TEST_CASE("fit_ols recovers a noiseless line") {
    const kalmreg::Dataset data = kalmreg::make_synthetic(50, 1, vec({2.0}), 1.0, 0.0, 3);
    const kalmreg::LinearModel model = kalmreg::fit_ols(data);
    REQUIRE_THAT(model.weights(0), WithinAbs(2.0, 1e-10));
    REQUIRE_THAT(model.bias, WithinAbs(1.0, 1e-10));
}

TEST_CASE("fit_ols hand normal equations") {
    const kalmreg::LinearModel model = kalmreg::fit_ols(three_points());
    REQUIRE_THAT(model.weights(0), WithinAbs(2.0, 1e-12));
    REQUIRE_THAT(model.bias, WithinAbs(1.0, 1e-12));
}

TEST_CASE("fit_ols zero targets give the zero model") {
    kalmreg::Dataset data = three_points();
    data.targets.setZero();
    const kalmreg::LinearModel model = kalmreg::fit_ols(data);
    REQUIRE(model.weights(0) == 0.0);
    REQUIRE(model.bias == 0.0);
}

TEST_CASE("fit_ols rejects rank-deficient designs") {
    kalmreg::Dataset data;
    data.features.resize(4, 2);
    data.features << 1, 2, 2, 4, 3, 6, 4, 8; // second column is twice the first
    data.targets = vec({1, 2, 3, 4});
    data.feature_names = {"a", "b"};
    data.target_name = "y";
    try {
        kalmreg::fit_ols(data);
        FAIL("expected SingularityError");
    } catch (const kalmreg::SingularityError& e) {
        REQUIRE(std::string(e.what()).find("ridge") != std::string::npos);
    }

    kalmreg::Dataset tall = three_points();
    tall.features.conservativeResize(3, 3);
    REQUIRE_THROWS_AS(kalmreg::fit_ols(tall), std::invalid_argument);
}

TEST_CASE("ols residuals are orthogonal to the design") {
    const kalmreg::Dataset data = standardized_random(120, 4, 9);
    const kalmreg::LinearModel model = kalmreg::fit_ols(data);
    const Eigen::VectorXd residual =
        data.targets - (data.features * model.weights).array().matrix() -
        Eigen::VectorXd::Constant(data.rows(), model.bias);
    Eigen::MatrixXd design(data.rows(), data.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(data.cols()) = data.features;
    REQUIRE((design.transpose() * residual).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit_ridge penalty-free limit equals ols") {
    const kalmreg::Dataset data = standardized_random(80, 3, 4);
    const kalmreg::LinearModel ols = kalmreg::fit_ols(data);
    const kalmreg::LinearModel ridge = kalmreg::fit_ridge(data, 0.0);
    REQUIRE((ols.weights - ridge.weights).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE_THAT(ridge.bias, WithinAbs(ols.bias, 1e-10));
}

TEST_CASE("fit_ridge full-shrinkage limit") {
    const kalmreg::Dataset data = standardized_random(80, 3, 5);
    const kalmreg::LinearModel model = kalmreg::fit_ridge(data, 1e12);
    REQUIRE(model.weights.cwiseAbs().maxCoeff() < 1e-9);
    REQUIRE_THAT(model.bias, WithinAbs(data.targets.mean(), 1e-9));
}

TEST_CASE("fit_ridge hand-solved penalized system") {
    // lambda=1 on points (0,1),(1,3),(2,5): slope 4/3, intercept 5/3
    const kalmreg::LinearModel model = kalmreg::fit_ridge(three_points(), 1.0);
    REQUIRE_THAT(model.weights(0), WithinAbs(4.0 / 3.0, 1e-12));
    REQUIRE_THAT(model.bias, WithinAbs(5.0 / 3.0, 1e-12));
}

TEST_CASE("fit_ridge shrinkage is monotone in lambda") {
    const kalmreg::Dataset data = standardized_random(100, 4, 6);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : {0.0, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
        const kalmreg::LinearModel model = kalmreg::fit_ridge(data, lambda);
        const double norm = model.weights.norm();
        REQUIRE(norm <= previous + 1e-9);
        previous = norm;
    }
    REQUIRE_THROWS_AS(kalmreg::fit_ridge(data, -1.0), std::invalid_argument);
}

TEST_CASE("fit_lasso requires standardized features") {
    const kalmreg::Dataset raw = kalmreg::make_synthetic(50, 2, vec({3.0, -2.0}), 1.0, 0.1, 7);
    REQUIRE_THROWS_AS(kalmreg::fit_lasso(raw, 0.1), std::invalid_argument);
}

TEST_CASE("fit_lasso penalty-free limit matches ols") {
    const kalmreg::Dataset data = standardized_random(100, 3, 8);
    const kalmreg::LassoFit fit = kalmreg::fit_lasso(data, 0.0, 20000, 1e-12);
    REQUIRE(fit.converged);
    const kalmreg::LinearModel ols = kalmreg::fit_ols(data);
    REQUIRE((fit.model.weights - ols.weights).cwiseAbs().maxCoeff() < 1e-6);
    REQUIRE_THAT(fit.model.bias, WithinAbs(ols.bias, 1e-6));
}

TEST_CASE("fit_lasso above lambda_max zeroes every weight") {
    const kalmreg::Dataset data = standardized_random(90, 4, 10);
    const double y_mean = data.targets.mean();
    double lambda_max = 0.0;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double rho = data.features.col(j).dot((data.targets.array() - y_mean).matrix());
        lambda_max = std::max(lambda_max, 2.0 * std::abs(rho) / data.rows());
    }
    const kalmreg::LassoFit fit = kalmreg::fit_lasso(data, lambda_max * 1.01);
    REQUIRE(fit.converged);
    for (Eigen::Index j = 0; j < data.cols(); ++j) REQUIRE(fit.model.weights(j) == 0.0);
    REQUIRE_THAT(fit.model.bias, WithinAbs(y_mean, 1e-9));
}

TEST_CASE("fit_lasso single feature matches the soft-threshold closed form") {
    const kalmreg::Dataset data = standardized_random(60, 1, 12);
    const double lambda = 0.3;
    const kalmreg::LassoFit fit = kalmreg::fit_lasso(data, lambda, 5000, 1e-12);
    REQUIRE(fit.converged);

    const double y_mean = data.targets.mean();
    const double rho = data.features.col(0).dot((data.targets.array() - y_mean).matrix());
    const double threshold = data.rows() * lambda / 2.0;
    const double expected =
        (rho > threshold ? rho - threshold : (rho < -threshold ? rho + threshold : 0.0)) /
        data.features.col(0).squaredNorm();
    REQUIRE_THAT(fit.model.weights(0), WithinAbs(expected, 1e-8));
    REQUIRE_THAT(fit.model.bias, WithinAbs(y_mean, 1e-8));
}

TEST_CASE("fit_lasso satisfies the KKT conditions at convergence") {
    const kalmreg::Dataset data = standardized_random(80, 3, 14);
    const double lambda = 0.2;
    const double tol = 1e-11;
    const kalmreg::LassoFit fit = kalmreg::fit_lasso(data, lambda, 100000, tol);
    REQUIRE(fit.converged);

    const Eigen::VectorXd fitted =
        (data.features * fit.model.weights).array() + fit.model.bias;
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
        const double g = 2.0 / data.rows() * data.features.col(j).dot(fitted - data.targets);
        double residual;
        if (fit.model.weights(j) != 0.0)
            residual = std::abs(g + lambda * (fit.model.weights(j) > 0 ? 1.0 : -1.0));
        else
            residual = std::max(0.0, std::abs(g) - lambda);
        REQUIRE(residual < 10.0 * tol);
    }
}

TEST_CASE("fit_lasso reports non-convergence as a status") {
    const kalmreg::Dataset data = standardized_random(100, 4, 15);
    const kalmreg::LassoFit fit = kalmreg::fit_lasso(data, 0.01, 1, 1e-14);
    REQUIRE_FALSE(fit.converged);
    REQUIRE(fit.iterations == 1);

    const kalmreg::BaselineSpec spec{kalmreg::BaselineSpec::Kind::Lasso, 0.01, 1, 1e-14};
    const kalmreg::BaselineFit dispatched = kalmreg::fit_baseline(data, spec);
    REQUIRE_FALSE(dispatched.warning.empty());
}

TEST_CASE("baseline fits are deterministic") {
    const kalmreg::Dataset data = standardized_random(70, 3, 16);
    const kalmreg::LinearModel a = kalmreg::fit_ols(data);
    const kalmreg::LinearModel b = kalmreg::fit_ols(data);
    REQUIRE(a.weights == b.weights);
    const kalmreg::LassoFit la = kalmreg::fit_lasso(data, 0.1);
    const kalmreg::LassoFit lb = kalmreg::fit_lasso(data, 0.1);
    REQUIRE(la.model.weights == lb.model.weights);
}

TEST_CASE("baseline spec names") {
    REQUIRE(kalmreg::BaselineSpec{}.name() == "ols");
    REQUIRE(kalmreg::BaselineSpec{kalmreg::BaselineSpec::Kind::Ridge, 1.0}.name() ==
            "ridge(lambda=1)");
    REQUIRE(kalmreg::BaselineSpec{kalmreg::BaselineSpec::Kind::Lasso, 0.1}.name() ==
            "lasso(lambda=0.1)");
}
