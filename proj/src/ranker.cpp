#include "kpiguard/ranker.hpp"

#include "kpiguard/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace kpiguard {

CentralityScores pagerank(const CausalityGraph& graph, double damping, double tolerance, int max_iterations) {
    const auto& nodes = graph.nodes();
    const std::size_t k = nodes.size();
    if (k == 0)
        throw SchemaError("PageRank on an empty graph");
    if (!(damping >= 0.0 && damping <= 1.0))
        throw UsageError("PageRank damping must lie in [0, 1]");

    auto local = [&](std::size_t kpi) {
        return static_cast<Eigen::Index>(std::lower_bound(nodes.begin(), nodes.end(), kpi) - nodes.begin());
    };
    const auto K = static_cast<Eigen::Index>(k);
    Eigen::VectorXd out_weight = Eigen::VectorXd::Zero(K);
    for (const Edge& e : graph.edges())
        out_weight(local(e.from)) += e.weight;

    // Column-stochastic transitions over nodes with positive out-weight.
    Eigen::MatrixXd transition = Eigen::MatrixXd::Zero(K, K);
    for (const Edge& e : graph.edges()) {
        const auto from = local(e.from);
        if (out_weight(from) > 0.0)
            transition(local(e.to), from) += e.weight / out_weight(from);
    }
    const Eigen::Array<bool, Eigen::Dynamic, 1> dangling = (out_weight.array() <= 0.0);

    Eigen::VectorXd rank = Eigen::VectorXd::Constant(K, 1.0 / static_cast<double>(k));
    Eigen::VectorXd next(K);
    for (int it = 0; it < max_iterations; ++it) {
        const double dangling_mass = dangling.select(rank.array(), 0.0).sum();
        next = damping * (transition * rank);
        next.array() += (damping * dangling_mass + (1.0 - damping)) / static_cast<double>(k);
        next /= next.sum();
        const double delta = (next - rank).lpNorm<1>();
        rank.swap(next);
        if (delta < tolerance)
            break;
    }

    CentralityScores scores;
    for (Eigen::Index i = 0; i < K; ++i)
        scores.emplace(nodes[static_cast<std::size_t>(i)], rank(i));
    return scores;
}

std::vector<std::size_t> top_anomalous_kpis(const CentralityScores& scores, std::size_t total_kpis, int cap_percent) {
    if (total_kpis == 0)
        throw UsageError("total KPI count must be >= 1");
    std::vector<std::pair<std::size_t, double>> ordered(scores.begin(), scores.end());
    std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second)
            return a.second > b.second;
        return a.first < b.first;
    });
    const std::size_t cap = std::max<std::size_t>(1, total_kpis * static_cast<std::size_t>(cap_percent) / 100);
    std::vector<std::size_t> top;
    for (std::size_t i = 0; i < ordered.size() && i < cap; ++i)
        top.push_back(ordered[i].first);
    return top;
}

void sort_ranking(NodeRanking& ranking) {
    std::sort(ranking.begin(), ranking.end(), [](const NodeScore& a, const NodeScore& b) {
        if (a.count != b.count)
            return a.count > b.count;
        if (a.centrality != b.centrality)
            return a.centrality > b.centrality;
        return a.node < b.node;
    });
}

NodeRanking localize_nodes(const std::vector<std::size_t>& top_kpis, const KpiCatalog& catalog,
                           const CentralityScores& scores, std::size_t max_nodes) {
    std::unordered_map<std::string, std::size_t> slot;
    NodeRanking ranking;
    for (auto kpi : top_kpis) {
        if (kpi >= catalog.size())
            throw SchemaError("KPI index " + std::to_string(kpi) + " outside catalog of size " +
                              std::to_string(catalog.size()));
        const std::string& node = catalog[kpi].node;
        auto [it, inserted] = slot.emplace(node, ranking.size());
        if (inserted)
            ranking.push_back({node, 0, 0.0});
        auto& entry = ranking[it->second];
        ++entry.count;
        if (auto s = scores.find(kpi); s != scores.end())
            entry.centrality += s->second;
    }
    sort_ranking(ranking);
    if (ranking.size() > max_nodes)
        ranking.resize(max_nodes);
    return ranking;
}

NodeRanking rank_nodes(const CausalityGraph& baseline, const std::vector<std::size_t>& anomalous,
                       const KpiCatalog& catalog, const RankerConfig& cfg) {
    if (anomalous.empty())
        return {};
    const CausalityGraph pruned = prune_graph(baseline, anomalous);
    const CentralityScores scores = pagerank(pruned, cfg.damping, cfg.tolerance, cfg.max_iterations);
    const auto top = top_anomalous_kpis(scores, catalog.size(), cfg.cap_percent);
    return localize_nodes(top, catalog, scores, cfg.max_nodes);
}

} // namespace kpiguard
