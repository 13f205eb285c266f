#include "kpiguard/rbm.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/random.hpp"

#include <algorithm>
#include <numeric>

namespace kpiguard {

namespace {

void check_input(const RbmModel& model, Eigen::Index size) {
    if (size != static_cast<Eigen::Index>(model.n_visible()))
        throw SchemaError("snapshot has " + std::to_string(size) + " KPIs, RBM expects " +
                          std::to_string(model.n_visible()));
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse(); }

bool finite(const RbmModel& m) {
    return m.visible_bias.allFinite() && m.hidden_bias.allFinite() && m.weights.allFinite();
}

} // namespace

std::string to_string(EnergyForm f) { return f == EnergyForm::Gaussian ? "gaussian" : "linear"; }

EnergyForm parse_energy_form(const std::string& s) {
    if (s == "gaussian")
        return EnergyForm::Gaussian;
    if (s == "linear")
        return EnergyForm::Linear;
    throw UsageError("unknown energy form '" + s + "' (expected gaussian or linear)");
}

double free_energy(const RbmModel& model, const Eigen::VectorXd& v) {
    check_input(model, v.size());
    return free_energy(v, model.visible_bias, model.hidden_bias, model.weights, model.energy_form);
}

RbmModel init_rbm(std::size_t n, std::size_t hidden, std::uint64_t seed) {
    const std::size_t m = hidden == 0 ? n : hidden;
    RbmModel model;
    model.visible_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    model.hidden_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    model.weights.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    Rng rng(seed);
    for (Eigen::Index j = 0; j < model.weights.cols(); ++j)
        for (Eigen::Index i = 0; i < model.weights.rows(); ++i)
            model.weights(i, j) = rng.normal(0.0, 0.01);
    return model;
}

RbmModel train_rbm(const Series& train, const TrainConfig& cfg, std::size_t hidden) {
    cfg.validate(0);
    if (train.size() < 10)
        throw InsufficientDataError("RBM training needs at least 10 snapshots, got " + std::to_string(train.size()));

    RbmModel model = init_rbm(train.n_kpis(), hidden, cfg.seed);
    model.config = cfg;
    const Eigen::MatrixXd data = train.values().transpose();
    const auto count = static_cast<std::size_t>(data.cols());
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed ^ 0x5851f42d4c957f2dULL);

    Eigen::MatrixXd v0, h0_prob, h0, v1, h1_prob;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double reconstruction = 0.0;
        for (std::size_t start = 0; start < count; start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), count - start);
            v0.resize(data.rows(), static_cast<Eigen::Index>(width));
            for (std::size_t j = 0; j < width; ++j)
                v0.col(static_cast<Eigen::Index>(j)) = data.col(static_cast<Eigen::Index>(order[start + j]));

            h0_prob = sigmoid((model.weights.transpose() * v0).colwise() + model.hidden_bias);
            h0.resize(h0_prob.rows(), h0_prob.cols());
            for (Eigen::Index j = 0; j < h0.cols(); ++j)
                for (Eigen::Index i = 0; i < h0.rows(); ++i)
                    h0(i, j) = rng.bernoulli(h0_prob(i, j)) ? 1.0 : 0.0;
            // Mean-field reconstruction of the unit-variance Gaussian visibles.
            v1 = (model.weights * h0).colwise() + model.visible_bias;
            h1_prob = sigmoid((model.weights.transpose() * v1).colwise() + model.hidden_bias);
            reconstruction += (v0 - v1).squaredNorm();

            const double step = cfg.learning_rate / static_cast<double>(width);
            model.weights += step * (v0 * h0_prob.transpose() - v1 * h1_prob.transpose());
            model.visible_bias += step * (v0 - v1).rowwise().sum();
            model.hidden_bias += step * (h0_prob - h1_prob).rowwise().sum();
        }
        if (!finite(model))
            throw TrainingError("RBM parameters became non-finite at epoch " + std::to_string(epoch));
        model.loss_history.push_back(reconstruction / static_cast<double>(data.size()));
    }
    return model;
}

RbmModel calibrate_threshold(RbmModel model, const Series& normal) {
    if (model.n_visible() == 0 || !finite(model))
        throw CalibrationError("RBM must be trained before calibration");
    if (normal.size() < 10)
        throw InsufficientDataError("RBM calibration needs at least 10 snapshots, got " +
                                    std::to_string(normal.size()));
    check_input(model, static_cast<Eigen::Index>(normal.n_kpis()));

    std::vector<double> energies(normal.size());
    for (std::size_t i = 0; i < normal.size(); ++i)
        energies[i] = free_energy(normal.row(i).transpose().eval(), model.visible_bias, model.hidden_bias,
                                  model.weights, model.energy_form);
    // Sorted accumulation makes the statistics independent of snapshot order.
    std::sort(energies.begin(), energies.end());
    // Shifted by the smallest energy so a constant energy yields an exact mean and zero spread.
    const double shift = energies.front();
    double offset = 0.0;
    for (double e : energies)
        offset += e - shift;
    const double mean = shift + offset / static_cast<double>(energies.size());
    std::vector<double> dev(energies.size());
    std::transform(energies.begin(), energies.end(), dev.begin(), [mean](double e) { return (e - mean) * (e - mean); });
    std::sort(dev.begin(), dev.end());
    double ss = 0.0;
    for (double d : dev)
        ss += d;

    model.energy_mean = mean;
    model.energy_std = std::sqrt(ss / static_cast<double>(energies.size() - 1));
    model.threshold = model.energy_mean + model.sigmas * model.energy_std;
    if (!std::isfinite(model.threshold))
        throw CalibrationError("free energy statistics are not finite");
    return model;
}

State classify_state_rbm(const RbmModel& model, const Eigen::VectorXd& snapshot) {
    if (!model.calibrated())
        throw CalibrationError("RBM threshold is not calibrated");
    const double f = free_energy(model, snapshot);
    return std::abs(f - model.energy_mean) > model.sigmas * model.energy_std ? State::Anomalous : State::Normal;
}

} // namespace kpiguard
