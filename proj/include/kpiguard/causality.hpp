#pragma once

#include "kpiguard/telemetry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kpiguard {

struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 0.0; ///< R^2 of the unrestricted regression

    friend bool operator==(const Edge&, const Edge&) = default;
};

/// Weighted digraph over KPI indices. Edges are kept sorted by (from, to).
class CausalityGraph {
public:
    CausalityGraph() = default;
    CausalityGraph(std::vector<std::size_t> nodes, std::vector<Edge> edges);

    /// Graph whose node set is 0..n-1.
    static CausalityGraph over(std::size_t n, std::vector<Edge> edges);

    const std::vector<std::size_t>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    bool contains(std::size_t node) const;
    std::optional<double> weight(std::size_t from, std::size_t to) const;

    /// Pair tests that failed numerically while building, skipped from the edge set.
    std::size_t failed_pairs = 0;

    friend bool operator==(const CausalityGraph& a, const CausalityGraph& b) {
        return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
    }

private:
    std::vector<std::size_t> nodes_;
    std::vector<Edge> edges_;
};

struct GrangerConfig {
    int lag = 5;
    double alpha = 0.01;
    double ridge = 1e-10;

    void validate() const;
};

/// Regression fit of the restricted and unrestricted models for one ordered pair.
struct GrangerFit {
    double rss_restricted = 0.0;
    double rss_unrestricted = 0.0;
    double total_ss = 0.0;
    double f_statistic = 0.0;
    double p_value = 1.0;
    std::size_t observations = 0;
    double r_squared() const;
};

/// Fits both models for "x Granger-causes y".
GrangerFit granger_fit(std::span<const double> x, std::span<const double> y, const GrangerConfig& cfg);

/// R^2 weight if the null "x does not Granger-cause y" is rejected at cfg.alpha.
std::optional<double> granger_test(std::span<const double> x, std::span<const double> y, const GrangerConfig& cfg);

/// Runs every ordered pair. Worker count comes from `threads` (0 reads PREVENT_THREADS).
CausalityGraph build_baseline_graph(const Series& train, const GrangerConfig& cfg, unsigned threads = 0);

/// Induced subgraph on `anomalous`.
CausalityGraph prune_graph(const CausalityGraph& baseline, const std::vector<std::size_t>& anomalous);

void write_graph(const CausalityGraph& graph, const std::string& catalog_hash, const std::filesystem::path& path);
CausalityGraph read_graph(const std::filesystem::path& path, std::string* catalog_hash = nullptr);

/// Worker count from PREVENT_THREADS, defaulting to hardware concurrency.
unsigned worker_count();

} // namespace kpiguard
