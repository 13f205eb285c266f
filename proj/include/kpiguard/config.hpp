#pragma once

#include "kpiguard/pipeline.hpp"
#include "kpiguard/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kpiguard {

struct SimulationConfig {
    std::size_t pairs = 4;
    std::size_t metrics = 12;
    std::int64_t train_minutes = 14 * 24 * 60;
    std::int64_t holdout_minutes = 2 * 24 * 60;
    /// Inject-to-crash horizons shorter than this are stretched to it.
    std::int64_t min_horizon = 40;
    /// Failing traces run for start + tail_factor * horizon minutes, enough for random-pattern crashes.
    double tail_factor = 4.0;
    /// Fraction of the normal trace used for the autoencoder and RBM; the rest calibrates.
    double split = 0.5;
    std::size_t replications = 5;
    std::vector<FaultKind> kinds{FaultKind::MemoryLeak, FaultKind::PacketLoss, FaultKind::CpuHog};
    std::vector<Pattern> patterns{Pattern::Linear, Pattern::Exponential, Pattern::Random};
};

/// Everything one experiment run needs. A single seed derives every stochastic stream.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    SimulationConfig simulation;
    BundleConfig bundle;
    std::vector<std::string> modes{"e", "a", "ensemble", "loud"};
    std::vector<int> loud_n{3, 4, 5};

    /// Throws UsageError naming the offending field as section.key.
    void validate() const;

    ClusterSpec cluster() const;
    /// Bundle config with model seeds derived from `seed`.
    BundleConfig seeded_bundle() const;
};

/// Seed stream tags; fixed so runs reproduce across versions.
enum class SeedStream : std::uint64_t {
    Cluster = 1,
    TrainWorkload = 2,
    TrainTelemetry = 3,
    HoldoutWorkload = 4,
    HoldoutTelemetry = 5,
    Autoencoder = 6,
    Rbm = 7,
    Ocsvm = 8,
    Fault = 9,
};

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index = 0);

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const ExperimentConfig& cfg);

} // namespace kpiguard
