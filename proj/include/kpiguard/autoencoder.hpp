#pragma once

#include "kpiguard/telemetry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace kpiguard {

/// Mini-batch training knobs shared by the autoencoder and the RBM.
struct TrainConfig {
    int epochs = 40;
    double learning_rate = 0.05;
    int batch_size = 32;
    std::uint64_t seed = 1;
    int patience = 0; ///< stop after this many epochs without improvement; 0 disables

    void validate(int min_epochs = 1) const;
};

enum class Activation { Tanh, Identity };

struct DenseLayer {
    Eigen::MatrixXd weights; ///< out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::Tanh;
};

enum class State { Normal, Anomalous };

/// Mirrored five-layer autoencoder n, n/2, n/4, n/2, n.
struct AutoencoderModel {
    std::vector<int> layer_sizes;
    std::vector<DenseLayer> layers;

    /// Per-KPI squared reconstruction error statistics on the training set.
    Eigen::VectorXd error_mean;
    Eigen::VectorXd error_std;
    double error_sigmas = 3.0;
    double threshold = 1.0;

    TrainConfig config;
    std::vector<double> loss_history; ///< entry 0 is the loss at initialization

    std::size_t n_inputs() const { return layer_sizes.empty() ? 0 : static_cast<std::size_t>(layer_sizes.front()); }
    bool calibrated() const { return error_mean.size() > 0 && error_mean.size() == error_std.size(); }
};

/// Parameter gradients laid out like AutoencoderModel::layers.
struct AutoencoderGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
};

std::vector<int> autoencoder_layer_sizes(int n);
AutoencoderModel init_autoencoder(int n, std::uint64_t seed);

/// Forward pass over a batch stored one sample per column.
Eigen::MatrixXd forward(const AutoencoderModel& model, const Eigen::MatrixXd& batch);

/// Loss = mean over samples of per-sample mean squared error; fills `grads` when non-null.
double loss_and_gradients(const AutoencoderModel& model, const Eigen::MatrixXd& batch, AutoencoderGradients* grads);

AutoencoderModel train_autoencoder(const Series& train, const TrainConfig& cfg);

/// Fits per-KPI error statistics on `series`.
void calibrate_errors(AutoencoderModel& model, const Series& series);

Eigen::VectorXd reconstruct(const AutoencoderModel& model, const Eigen::VectorXd& snapshot);
Eigen::VectorXd squared_errors(const AutoencoderModel& model, const Eigen::VectorXd& snapshot);
double global_error(const AutoencoderModel& model, const Eigen::VectorXd& snapshot);

/// KPI indices whose squared error exceeds mean + error_sigmas * std of the training errors.
std::vector<std::size_t> anomalous_kpis(const AutoencoderModel& model, const Eigen::VectorXd& snapshot);

State classify_state_ae(const AutoencoderModel& model, const Eigen::VectorXd& snapshot);

/// Mean squared difference, usable on any pair of Eigen expressions.
template <typename A, typename B>
double mean_squared_error(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
    return (x - y).squaredNorm() / static_cast<double>(x.size());
}

} // namespace kpiguard
