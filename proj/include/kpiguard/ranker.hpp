#pragma once

#include "kpiguard/causality.hpp"
#include "kpiguard/telemetry.hpp"

#include <map>
#include <string>
#include <vector>

namespace kpiguard {

/// PageRank score per KPI index of the graph it was computed on.
using CentralityScores = std::map<std::size_t, double>;

struct NodeScore {
    std::string node;
    std::size_t count = 0;   ///< top-anomalous KPIs on this node
    double centrality = 0.0; ///< summed PageRank of those KPIs

    friend bool operator==(const NodeScore&, const NodeScore&) = default;
};

/// Up to three suspect nodes, most suspicious first.
using NodeRanking = std::vector<NodeScore>;

struct RankerConfig {
    double damping = 0.85;
    double tolerance = 1e-10;
    int max_iterations = 1000;
    int cap_percent = 20; ///< top-KPI cap as a percentage of all monitored KPIs
    std::size_t max_nodes = 3;
};

CentralityScores pagerank(const CausalityGraph& graph, double damping = 0.85, double tolerance = 1e-10,
                          int max_iterations = 1000);

/// floor(cap_percent% of total_kpis), at least 1; KPIs by descending score then ascending index.
std::vector<std::size_t> top_anomalous_kpis(const CentralityScores& scores, std::size_t total_kpis,
                                            int cap_percent = 20);

/// Orders by descending count, then descending centrality, then node id.
void sort_ranking(NodeRanking& ranking);

NodeRanking localize_nodes(const std::vector<std::size_t>& top_kpis, const KpiCatalog& catalog,
                           const CentralityScores& scores, std::size_t max_nodes = 3);

/// Full ranker chain: prune, PageRank, cap, localize. Empty `anomalous` gives an empty ranking.
NodeRanking rank_nodes(const CausalityGraph& baseline, const std::vector<std::size_t>& anomalous,
                       const KpiCatalog& catalog, const RankerConfig& cfg);

} // namespace kpiguard
