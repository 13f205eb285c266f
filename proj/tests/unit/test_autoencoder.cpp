#include "fixtures.hpp"
#include "oracles.hpp"

#include "kpiguard/autoencoder.hpp"
#include "kpiguard/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace kpiguard;

TEST_CASE("layer sizes mirror n, n/2, n/4") {
    CHECK(autoencoder_layer_sizes(8) == std::vector<int>{8, 4, 2, 4, 8});
    CHECK(autoencoder_layer_sizes(96) == std::vector<int>{96, 48, 24, 48, 96});
    CHECK_THROWS_AS(autoencoder_layer_sizes(3), SchemaError);

    const auto m = init_autoencoder(8, 1);
    REQUIRE(m.layers.size() == 4);
    CHECK(m.layers.back().activation == Activation::Identity);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(m.layers[l].weights.rows() == m.layer_sizes[l + 1]);
        CHECK(m.layers[l].weights.cols() == m.layer_sizes[l]);
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.layer_sizes[l]));
        CHECK(m.layers[l].weights.cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("analytic gradients match central differences on a 6-KPI model") {
    CHECK(oracles::autoencoder_gradient_error(6, 5, 42) < 1e-4);
    CHECK(oracles::autoencoder_gradient_error(6, 1, 7) < 1e-4);
}

TEST_CASE("zero model reconstructs zero; global error is the mean square") {
    AutoencoderModel m = init_autoencoder(8, 1);
    for (auto& layer : m.layers) {
        layer.weights.setZero();
        layer.bias.setZero();
    }
    Eigen::VectorXd x(8);
    x << 1, -2, 3, 0, 0.5, 1, 1, -1;
    CHECK(reconstruct(m, x).isZero());
    CHECK(reconstruct(m, x).size() == 8);
    CHECK(global_error(m, x) == doctest::Approx(x.squaredNorm() / 8.0));
    CHECK_THROWS_AS(reconstruct(m, Eigen::VectorXd::Zero(7)), SchemaError);
}

TEST_CASE("global error equals an independent sum of squares") {
    const AutoencoderModel m = init_autoencoder(10, 3);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd x(10);
        for (Eigen::Index i = 0; i < 10; ++i)
            x(i) = rng.normal();
        const Eigen::VectorXd y = reconstruct(m, x);
        double acc = 0.0;
        for (Eigen::Index i = 0; i < 10; ++i)
            acc += (x(i) - y(i)) * (x(i) - y(i));
        CHECK(global_error(m, x) == doctest::Approx(acc / 10.0).epsilon(1e-12));
        CHECK(global_error(m, x) >= 0.0);
    }
}

TEST_CASE("global threshold is strict and defaults to one") {
    AutoencoderModel m = init_autoencoder(4, 1);
    for (auto& layer : m.layers) {
        layer.weights.setZero();
        layer.bias.setZero();
    }
    CHECK(m.threshold == 1.0);
    CHECK(classify_state_ae(m, Eigen::VectorXd::Zero(4)) == State::Normal);
    CHECK(classify_state_ae(m, Eigen::VectorXd::Ones(4)) == State::Normal);
    CHECK(classify_state_ae(m, Eigen::VectorXd::Constant(4, 1.01)) == State::Anomalous);
}

TEST_CASE("training on a constant series reaches near-zero error") {
    RowMatrix zeros = RowMatrix::Zero(64, 8);
    std::vector<Timestamp> ts(64);
    for (std::size_t i = 0; i < ts.size(); ++i)
        ts[i] = static_cast<Timestamp>(i);
    const Series s(fixtures::flat_catalog(8), ts, zeros);
    const auto m = train_autoencoder(s, {.epochs = 200, .learning_rate = 0.05, .batch_size = 16, .seed = 1});
    CHECK(m.loss_history.back() < 1e-4);
}

TEST_CASE("training improves the loss, is deterministic and flags perturbed KPIs") {
    const Series train = fixtures::low_rank_series(600, 8, 11, 1);
    const TrainConfig cfg{.epochs = 60, .learning_rate = 0.05, .batch_size = 16, .seed = 3};
    const auto m = train_autoencoder(train, cfg);
    CHECK(m.loss_history.back() <= m.loss_history.front());

    const auto again = train_autoencoder(train, cfg);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        CHECK(m.layers[l].weights == again.layers[l].weights);
        CHECK(m.layers[l].bias == again.layers[l].bias);
    }

    const Series held = fixtures::low_rank_series(400, 8, 11, 2);
    double in_dist = 0.0;
    for (std::size_t i = 0; i < held.size(); ++i)
        in_dist += global_error(m, held.snapshot(i).values);
    in_dist /= static_cast<double>(held.size());
    CHECK(in_dist < 1.0);

    int flagged = 0;
    int empty = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        Eigen::VectorXd x = held.snapshot(i).values;
        if (anomalous_kpis(m, x).empty())
            ++empty;
        x(3) += 10.0;
        const auto set = anomalous_kpis(m, x);
        if (std::find(set.begin(), set.end(), 3u) != set.end())
            ++flagged;
        for (auto k : set)
            CHECK(k < 8u);
    }
    CHECK(flagged >= 95);
    CHECK(empty >= 80);
}

TEST_CASE("out-of-distribution snapshots reconstruct worse on average") {
    const Series train = fixtures::low_rank_series(600, 8, 21, 1);
    const auto m = train_autoencoder(train, {.epochs = 60, .learning_rate = 0.05, .batch_size = 16, .seed = 5});
    const Series odd = fixtures::random_series(200, 8, 99, 2.0);
    double in = 0.0, out = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        in += global_error(m, train.snapshot(i).values);
        out += global_error(m, odd.snapshot(i).values);
    }
    CHECK(in < out);
}

TEST_CASE("calibration edge cases") {
    AutoencoderModel m = init_autoencoder(4, 1);
    CHECK_THROWS_AS(anomalous_kpis(m, Eigen::VectorXd::Zero(4)), CalibrationError);
    for (auto& layer : m.layers) {
        layer.weights.setZero();
        layer.bias.setZero();
    }
    m.error_mean = Eigen::VectorXd::Zero(4);
    m.error_std = Eigen::VectorXd::Zero(4);
    CHECK(anomalous_kpis(m, Eigen::VectorXd::Zero(4)).empty());
}

TEST_CASE("training preconditions") {
    CHECK_THROWS_AS(train_autoencoder(fixtures::random_series(9, 8, 1), {}), InsufficientDataError);
    CHECK_THROWS_AS(train_autoencoder(fixtures::random_series(20, 3, 1), {}), SchemaError);
    CHECK_THROWS_AS(train_autoencoder(fixtures::random_series(20, 8, 1), {.epochs = 0}), UsageError);
    CHECK_THROWS_AS(train_autoencoder(fixtures::random_series(20, 8, 1), {.learning_rate = 1e6, .seed = 1}),
                    TrainingError);
}
