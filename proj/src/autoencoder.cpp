#include "kpiguard/autoencoder.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/random.hpp"

#include <cmath>
#include <numeric>

namespace kpiguard {

void TrainConfig::validate(int min_epochs) const {
    if (epochs < min_epochs)
        throw UsageError("epochs must be >= " + std::to_string(min_epochs));
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw UsageError("learning rate must be positive");
    if (batch_size < 1)
        throw UsageError("batch size must be >= 1");
    if (patience < 0)
        throw UsageError("patience must be >= 0");
}

std::vector<int> autoencoder_layer_sizes(int n) {
    if (n < 4)
        throw SchemaError("autoencoder needs at least 4 KPIs (innermost layer n/4 would be empty), got " +
                          std::to_string(n));
    return {n, n / 2, n / 4, n / 2, n};
}

AutoencoderModel init_autoencoder(int n, std::uint64_t seed) {
    AutoencoderModel model;
    model.layer_sizes = autoencoder_layer_sizes(n);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < model.layer_sizes.size(); ++l) {
        const int in = model.layer_sizes[l];
        const int out = model.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        DenseLayer layer;
        layer.weights.resize(out, in);
        for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
            for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
                layer.weights(i, j) = rng.uniform(-bound, bound);
        layer.bias.resize(out);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i)
            layer.bias(i) = rng.uniform(-bound, bound);
        layer.activation = (l + 2 == model.layer_sizes.size()) ? Activation::Identity : Activation::Tanh;
        model.layers.push_back(std::move(layer));
    }
    return model;
}

namespace {

void check_width(const AutoencoderModel& model, Eigen::Index rows) {
    if (model.layers.empty())
        throw CalibrationError("autoencoder has no layers");
    if (rows != static_cast<Eigen::Index>(model.n_inputs()))
        throw SchemaError("snapshot has " + std::to_string(rows) + " KPIs, autoencoder expects " +
                          std::to_string(model.n_inputs()));
}

Eigen::MatrixXd apply(const DenseLayer& layer, const Eigen::MatrixXd& input) {
    Eigen::MatrixXd z = (layer.weights * input).colwise() + layer.bias;
    if (layer.activation == Activation::Tanh)
        z = z.array().tanh();
    return z;
}

} // namespace

Eigen::MatrixXd forward(const AutoencoderModel& model, const Eigen::MatrixXd& batch) {
    check_width(model, batch.rows());
    Eigen::MatrixXd a = batch;
    for (const auto& layer : model.layers)
        a = apply(layer, a);
    return a;
}

double loss_and_gradients(const AutoencoderModel& model, const Eigen::MatrixXd& batch, AutoencoderGradients* grads) {
    check_width(model, batch.rows());
    const auto L = model.layers.size();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(L + 1);
    acts.push_back(batch);
    for (const auto& layer : model.layers)
        acts.push_back(apply(layer, acts.back()));

    const double scale = 1.0 / static_cast<double>(batch.rows() * batch.cols());
    Eigen::MatrixXd diff = acts.back() - batch;
    const double loss = diff.squaredNorm() * scale;
    if (!grads)
        return loss;

    grads->weights.assign(L, {});
    grads->bias.assign(L, {});
    Eigen::MatrixXd delta = 2.0 * scale * diff;
    for (std::size_t l = L; l-- > 0;) {
        const auto& layer = model.layers[l];
        if (layer.activation == Activation::Tanh)
            delta = (delta.array() * (1.0 - acts[l + 1].array().square())).matrix();
        grads->weights[l] = delta * acts[l].transpose();
        grads->bias[l] = delta.rowwise().sum();
        if (l > 0)
            delta = layer.weights.transpose() * delta;
    }
    return loss;
}

namespace {

Eigen::MatrixXd as_columns(const Series& series) { return series.values().transpose(); }

double dataset_loss(const AutoencoderModel& model, const Eigen::MatrixXd& data) {
    return loss_and_gradients(model, data, nullptr);
}

} // namespace

AutoencoderModel train_autoencoder(const Series& train, const TrainConfig& cfg) {
    cfg.validate(1);
    if (train.size() < 10)
        throw InsufficientDataError("autoencoder training needs at least 10 snapshots, got " +
                                    std::to_string(train.size()));
    AutoencoderModel model = init_autoencoder(static_cast<int>(train.n_kpis()), cfg.seed);
    model.config = cfg;

    const Eigen::MatrixXd data = as_columns(train);
    const auto count = static_cast<std::size_t>(data.cols());
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    double best = dataset_loss(model, data);
    if (!std::isfinite(best))
        throw TrainingError("autoencoder loss is not finite at initialization");
    model.loss_history.push_back(best);
    auto best_layers = model.layers;
    int stale = 0;

    AutoencoderGradients grads;
    Eigen::MatrixXd batch(data.rows(), cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), count - start);
            batch.resize(data.rows(), static_cast<Eigen::Index>(width));
            for (std::size_t j = 0; j < width; ++j)
                batch.col(static_cast<Eigen::Index>(j)) = data.col(static_cast<Eigen::Index>(order[start + j]));
            loss_and_gradients(model, batch, &grads);
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                model.layers[l].weights -= cfg.learning_rate * grads.weights[l];
                model.layers[l].bias -= cfg.learning_rate * grads.bias[l];
            }
        }
        const double loss = dataset_loss(model, data);
        if (!std::isfinite(loss))
            throw TrainingError("autoencoder loss diverged at epoch " + std::to_string(epoch));
        model.loss_history.push_back(loss);
        if (loss <= best) {
            best = loss;
            best_layers = model.layers;
            stale = 0;
        } else if (cfg.patience > 0 && ++stale >= cfg.patience) {
            break;
        }
    }
    // Keep the best epoch so the final loss never exceeds the initial one.
    model.layers = std::move(best_layers);
    calibrate_errors(model, train);
    return model;
}

void calibrate_errors(AutoencoderModel& model, const Series& series) {
    if (series.size() < 2)
        throw InsufficientDataError("error calibration needs at least 2 snapshots");
    const Eigen::MatrixXd data = as_columns(series);
    const Eigen::MatrixXd sq = (forward(model, data) - data).array().square();
    model.error_mean = sq.rowwise().mean();
    const Eigen::MatrixXd centered = sq.colwise() - model.error_mean;
    model.error_std = (centered.rowwise().squaredNorm() / static_cast<double>(sq.cols() - 1)).cwiseSqrt();
}

Eigen::VectorXd reconstruct(const AutoencoderModel& model, const Eigen::VectorXd& snapshot) {
    return forward(model, snapshot);
}

Eigen::VectorXd squared_errors(const AutoencoderModel& model, const Eigen::VectorXd& snapshot) {
    return (reconstruct(model, snapshot) - snapshot).array().square();
}

double global_error(const AutoencoderModel& model, const Eigen::VectorXd& snapshot) {
    return mean_squared_error(reconstruct(model, snapshot), snapshot);
}

std::vector<std::size_t> anomalous_kpis(const AutoencoderModel& model, const Eigen::VectorXd& snapshot) {
    if (!model.calibrated())
        throw CalibrationError("autoencoder has no training error statistics");
    const Eigen::VectorXd err = squared_errors(model, snapshot);
    std::vector<std::size_t> out;
    for (Eigen::Index i = 0; i < err.size(); ++i)
        if (err(i) > model.error_mean(i) + model.error_sigmas * model.error_std(i))
            out.push_back(static_cast<std::size_t>(i));
    return out;
}

State classify_state_ae(const AutoencoderModel& model, const Eigen::VectorXd& snapshot) {
    return global_error(model, snapshot) > model.threshold ? State::Anomalous : State::Normal;
}

} // namespace kpiguard
