#pragma once

#include "kpiguard/telemetry.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace kpiguard {

/// Master/slave node pairs and the metrics sampled on every node.
struct ClusterSpec {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<std::string> metrics;
    std::uint64_t seed = 1;

    void validate() const;
    std::vector<std::string> nodes() const;

    /// The twelve built-in metric families (cpu, memory, network, load, sockets, processes).
    static std::vector<std::string> default_metrics();
    /// `pairs` master/slave pairs, `metric_count` metrics per node (extra metrics are generic).
    static ClusterSpec make(std::size_t pairs, std::size_t metric_count, std::uint64_t seed);
};

enum class FaultKind { MemoryLeak, PacketLoss, CpuHog };
enum class Pattern { Linear, Exponential, Random };

std::string to_string(FaultKind k);
std::string to_string(Pattern p);
FaultKind parse_fault_kind(const std::string& s);
Pattern parse_pattern(const std::string& s);

struct FaultSpec {
    FaultKind kind = FaultKind::MemoryLeak;
    Pattern pattern = Pattern::Linear;
    std::size_t pair = 0;      ///< index into ClusterSpec::pairs
    Timestamp start = 0;       ///< injection timestamp
    double base = 1.0;         ///< per-minute increment
    double capacity = 1.0;     ///< intensity at which the target crashes
    std::uint64_t seed = 1;    ///< drives the random pattern

    void validate() const;
};

struct GroundTruth {
    Timestamp injection = 0;
    Timestamp crash = 0;
    std::string node_a;
    std::string node_b;
    FaultKind kind = FaultKind::MemoryLeak;
    Pattern pattern = Pattern::Linear;

    Timestamp horizon() const { return crash - injection; }
    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Requests per second for `minutes` minutes starting `start_minute` minutes after Monday 00:00.
std::vector<double> gen_workload(std::size_t minutes, std::uint64_t seed, std::int64_t start_minute = 0);

/// Workload-driven per-node KPIs with AR(1) noise and lagged cross-KPI dependencies.
/// Node shares and generic-metric shapes come from spec.seed; `seed` drives the noise and the
/// benign hot-shard traffic episodes that hit a master and its replica together.
Series gen_normal_telemetry(const ClusterSpec& spec, const std::vector<double>& workload, std::uint64_t seed);

/// Fault intensity `minutes` after injection.
double escalation(Pattern pattern, double base, std::int64_t minutes, std::uint64_t seed);

/// Default crash capacity for a fault kind, in its intensity units.
double default_capacity(FaultKind kind);

/// Fault whose deterministic patterns crash exactly `horizon` minutes after `start`
/// (the random pattern crashes after `horizon` minutes in expectation).
FaultSpec fault_for_horizon(FaultKind kind, Pattern pattern, std::size_t pair, Timestamp start, std::int64_t horizon,
                            std::uint64_t seed);

/// Perturbs the target pair from fault.start on and truncates the series at the crash.
std::pair<Series, GroundTruth> inject_fault(const Series& normal, const ClusterSpec& spec, const FaultSpec& fault);

/// One row of the reference fault matrix: identifier, kind, pattern and timings in minutes.
struct FaultScenario {
    std::string id;
    FaultKind kind;
    Pattern pattern;
    std::int64_t start_to_inject;
    std::int64_t inject_to_crash;
};

/// The nine kind x pattern experiments with their reference timings.
std::vector<FaultScenario> reference_fault_matrix();

/// Manifest CSV: injection_ts,crash_ts,node_a,node_b,kind,pattern
void write_manifest(const std::vector<GroundTruth>& truths, const std::filesystem::path& path);
std::vector<GroundTruth> read_manifest(const std::filesystem::path& path);

} // namespace kpiguard
