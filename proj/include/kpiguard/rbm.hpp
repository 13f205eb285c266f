#pragma once

#include "kpiguard/autoencoder.hpp"
#include "kpiguard/telemetry.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace kpiguard {

/// Visible term of the free energy.
enum class EnergyForm {
    Gaussian, ///< +1/2 |v - a|^2, the unit-variance Gaussian-visible free energy
    Linear,   ///< -a.v, the binary-visible form; blind to deviations outside span(W)
};

std::string to_string(EnergyForm f);
EnergyForm parse_energy_form(const std::string& s);

/// Gaussian-visible / Bernoulli-hidden restricted Boltzmann machine with a
/// free-energy threshold learned on normal data.
struct RbmModel {
    Eigen::VectorXd visible_bias; ///< a, length n
    Eigen::VectorXd hidden_bias;  ///< b, length m
    Eigen::MatrixXd weights;      ///< W, n x m

    double energy_mean = std::numeric_limits<double>::quiet_NaN();
    double energy_std = std::numeric_limits<double>::quiet_NaN();
    double threshold = std::numeric_limits<double>::quiet_NaN(); ///< NaN until calibrated
    double sigmas = 3.0;
    EnergyForm energy_form = EnergyForm::Gaussian;

    TrainConfig config;
    std::vector<double> loss_history; ///< mean CD-1 reconstruction error per epoch

    std::size_t n_visible() const { return static_cast<std::size_t>(visible_bias.size()); }
    std::size_t n_hidden() const { return static_cast<std::size_t>(hidden_bias.size()); }
    bool calibrated() const { return !std::isnan(threshold); }
};

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
    using std::abs, std::exp, std::log1p, std::max;
    return max(x, Scalar(0)) + log1p(exp(-abs(x)));
}

/// F(v) = V(v) - sum_j softplus(b_j + (W^T v)_j), V(v) = |v - a|^2 / 2 (Gaussian) or -a.v (Linear).
template <typename Derived>
typename Derived::Scalar free_energy(const Eigen::MatrixBase<Derived>& v, const Eigen::VectorXd& visible_bias,
                                     const Eigen::VectorXd& hidden_bias, const Eigen::MatrixXd& weights,
                                     EnergyForm form = EnergyForm::Gaussian) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> pre = hidden_bias.cast<Scalar>() + weights.cast<Scalar>().transpose() * v;
    Scalar acc = form == EnergyForm::Gaussian ? Scalar(0.5) * (v - visible_bias.cast<Scalar>()).squaredNorm()
                                              : Scalar(-visible_bias.cast<Scalar>().dot(v));
    for (Eigen::Index j = 0; j < pre.size(); ++j)
        acc -= softplus(pre(j));
    return acc;
}

double free_energy(const RbmModel& model, const Eigen::VectorXd& v);

/// Seeded initialization with `hidden` hidden units (0 means one per visible unit).
RbmModel init_rbm(std::size_t n, std::size_t hidden, std::uint64_t seed);

/// CD-1 training. `cfg.epochs == 0` returns the seeded initialization.
RbmModel train_rbm(const Series& train, const TrainConfig& cfg, std::size_t hidden = 0);

/// Sets mean/std of free energy over `normal` and threshold = mean + sigmas * std.
RbmModel calibrate_threshold(RbmModel model, const Series& normal);

/// Anomalous iff |F(v) - mean| > sigmas * std.
State classify_state_rbm(const RbmModel& model, const Eigen::VectorXd& snapshot);

} // namespace kpiguard
