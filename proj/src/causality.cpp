#include "kpiguard/causality.hpp"

#include "kpiguard/error.hpp"

#include <boost/math/distributions/fisher_f.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <tuple>
#include <fstream>
#include <sstream>
#include <thread>

namespace kpiguard {

CausalityGraph::CausalityGraph(std::vector<std::size_t> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(nodes_.begin(), nodes_.end());
    if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end())
        throw SchemaError("causality graph has duplicate nodes");
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        const Edge& e = edges_[i];
        if (e.from == e.to)
            throw SchemaError("self-edge on node " + std::to_string(e.from));
        if (!contains(e.from) || !contains(e.to))
            throw SchemaError("edge " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                              " touches a node outside the graph");
        if (!(e.weight >= 0.0 && e.weight <= 1.0))
            throw SchemaError("edge weight " + std::to_string(e.weight) + " outside [0, 1]");
        if (i > 0 && edges_[i - 1].from == e.from && edges_[i - 1].to == e.to)
            throw SchemaError("duplicate edge " + std::to_string(e.from) + "->" + std::to_string(e.to));
    }
}

CausalityGraph CausalityGraph::over(std::size_t n, std::vector<Edge> edges) {
    std::vector<std::size_t> nodes(n);
    for (std::size_t i = 0; i < n; ++i)
        nodes[i] = i;
    return CausalityGraph(std::move(nodes), std::move(edges));
}

bool CausalityGraph::contains(std::size_t node) const {
    return std::binary_search(nodes_.begin(), nodes_.end(), node);
}

std::optional<double> CausalityGraph::weight(std::size_t from, std::size_t to) const {
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{from, to}, [](const Edge& e, const auto& key) {
        return std::tie(e.from, e.to) < std::tie(key.first, key.second);
    });
    if (it != edges_.end() && it->from == from && it->to == to)
        return it->weight;
    return std::nullopt;
}

void GrangerConfig::validate() const {
    if (lag < 1)
        throw UsageError("Granger lag order must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw UsageError("Granger significance level must lie in (0, 1)");
    if (!(ridge >= 0.0))
        throw UsageError("Granger ridge jitter must be >= 0");
}

double GrangerFit::r_squared() const {
    if (!(total_ss > 0.0))
        return 0.0;
    return std::clamp(1.0 - rss_unrestricted / total_ss, 0.0, 1.0);
}

namespace {

/// Sufficient statistics for one target regressed on [1, own lags, candidate lags].
struct PairGram {
    Eigen::MatrixXd gram; ///< (2p+1)^2, column order: intercept, y lags, x lags
    Eigen::VectorXd xty;  ///< (2p+1)
    double yy = 0.0;
    double y_sum = 0.0;
    std::size_t observations = 0;
};

double solve_rss(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty, double yy, double ridge) {
    Eigen::MatrixXd jittered = gram;
    jittered.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(jittered);
    if (ldlt.info() != Eigen::Success)
        throw NumericError("singular Granger design matrix");
    Eigen::VectorXd beta = ldlt.solve(xty);
    if (!beta.allFinite())
        throw NumericError("non-finite Granger regression coefficients");
    return std::max(0.0, yy - 2.0 * beta.dot(xty) + beta.dot(gram * beta));
}

GrangerFit fit_from_gram(const PairGram& g, const GrangerConfig& cfg) {
    const auto p = static_cast<Eigen::Index>(cfg.lag);
    GrangerFit fit;
    fit.observations = g.observations;
    const double T = static_cast<double>(g.observations);
    fit.total_ss = std::max(0.0, g.yy - g.y_sum * g.y_sum / T);
    // Constant target: nothing to explain.
    if (fit.total_ss <= 1e-12 * std::max(1.0, g.yy))
        return fit;

    fit.rss_restricted = solve_rss(g.gram.topLeftCorner(p + 1, p + 1), g.xty.head(p + 1), g.yy, cfg.ridge);
    fit.rss_unrestricted = solve_rss(g.gram, g.xty, g.yy, cfg.ridge);
    fit.rss_unrestricted = std::min(fit.rss_unrestricted, fit.rss_restricted);

    const double df_num = static_cast<double>(cfg.lag);
    const double df_den = T - 2.0 * df_num - 1.0;
    const double gain = fit.rss_restricted - fit.rss_unrestricted;
    if (!(gain > 1e-12 * fit.rss_restricted)) {
        fit.f_statistic = 0.0;
        fit.p_value = 1.0;
        return fit;
    }
    if (fit.rss_unrestricted <= 0.0) {
        fit.f_statistic = std::numeric_limits<double>::infinity();
        fit.p_value = 0.0;
        return fit;
    }
    fit.f_statistic = (gain / df_num) / (fit.rss_unrestricted / df_den);
    boost::math::fisher_f_distribution<double> dist(df_num, df_den);
    fit.p_value = boost::math::cdf(boost::math::complement(dist, fit.f_statistic));
    return fit;
}

void check_length(std::size_t len, const GrangerConfig& cfg) {
    const auto need = static_cast<std::size_t>(3 * cfg.lag + 1);
    if (len <= need)
        throw InsufficientDataError("Granger test needs more than " + std::to_string(need) + " samples, got " +
                                    std::to_string(len));
}

} // namespace

GrangerFit granger_fit(std::span<const double> x, std::span<const double> y, const GrangerConfig& cfg) {
    cfg.validate();
    if (x.size() != y.size())
        throw SchemaError("Granger inputs differ in length");
    check_length(y.size(), cfg);
    const auto p = static_cast<std::size_t>(cfg.lag);
    const std::size_t T = y.size() - p;

    Eigen::MatrixXd design(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(2 * p + 1));
    Eigen::VectorXd target(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        design(r, 0) = 1.0;
        for (std::size_t l = 1; l <= p; ++l) {
            design(r, static_cast<Eigen::Index>(l)) = y[t + p - l];
            design(r, static_cast<Eigen::Index>(p + l)) = x[t + p - l];
        }
        target(r) = y[t + p];
    }
    PairGram g;
    g.gram = design.transpose() * design;
    g.xty = design.transpose() * target;
    g.yy = target.squaredNorm();
    g.y_sum = target.sum();
    g.observations = T;
    return fit_from_gram(g, cfg);
}

std::optional<double> granger_test(std::span<const double> x, std::span<const double> y, const GrangerConfig& cfg) {
    GrangerFit fit = granger_fit(x, y, cfg);
    if (fit.p_value < cfg.alpha)
        return fit.r_squared();
    return std::nullopt;
}

unsigned worker_count() {
    if (const char* env = std::getenv("PREVENT_THREADS")) {
        unsigned v = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), v);
        if (ec == std::errc() && v > 0)
            return v;
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

CausalityGraph build_baseline_graph(const Series& train, const GrangerConfig& cfg, unsigned threads) {
    cfg.validate();
    check_length(train.size(), cfg);
    const auto n = static_cast<Eigen::Index>(train.n_kpis());
    const auto p = static_cast<Eigen::Index>(cfg.lag);
    const auto L = static_cast<Eigen::Index>(train.size());
    const Eigen::Index T = L - p;
    const RowMatrix& values = train.values();

    // Lag block of KPI k occupies columns [k*p, (k+1)*p); column k*p + (l-1) holds lag l.
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n * p, n * p);
    Eigen::MatrixXd lag_target = Eigen::MatrixXd::Zero(n * p, n);
    Eigen::VectorXd lag_sum = Eigen::VectorXd::Zero(n * p);
    Eigen::VectorXd target_sum = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd target_sq = Eigen::VectorXd::Zero(n);

    constexpr Eigen::Index kChunk = 2048;
    Eigen::MatrixXd lags, targets;
    for (Eigen::Index start = 0; start < T; start += kChunk) {
        const Eigen::Index rows = std::min(kChunk, T - start);
        lags.resize(rows, n * p);
        targets = values.middleRows(start + p, rows);
        for (Eigen::Index k = 0; k < n; ++k)
            for (Eigen::Index l = 1; l <= p; ++l)
                lags.col(k * p + l - 1) = values.col(k).segment(start + p - l, rows);
        gram.noalias() += lags.transpose() * lags;
        lag_target.noalias() += lags.transpose() * targets;
        lag_sum += lags.colwise().sum().transpose();
        target_sum += targets.colwise().sum().transpose();
        target_sq += targets.colwise().squaredNorm().transpose();
    }

    std::vector<std::vector<Edge>> per_target(static_cast<std::size_t>(n));
    std::vector<std::size_t> failures(static_cast<std::size_t>(n), 0);
    auto work = [&](Eigen::Index b) {
        PairGram g;
        g.observations = static_cast<std::size_t>(T);
        g.yy = target_sq(b);
        g.y_sum = target_sum(b);
        g.gram.resize(2 * p + 1, 2 * p + 1);
        g.xty.resize(2 * p + 1);
        g.gram(0, 0) = static_cast<double>(T);
        g.gram.block(0, 1, 1, p) = lag_sum.segment(b * p, p).transpose();
        g.gram.block(1, 0, p, 1) = lag_sum.segment(b * p, p);
        g.gram.block(1, 1, p, p) = gram.block(b * p, b * p, p, p);
        g.xty(0) = target_sum(b);
        g.xty.segment(1, p) = lag_target.block(b * p, b, p, 1);
        for (Eigen::Index a = 0; a < n; ++a) {
            if (a == b)
                continue;
            g.gram.block(0, p + 1, 1, p) = lag_sum.segment(a * p, p).transpose();
            g.gram.block(p + 1, 0, p, 1) = lag_sum.segment(a * p, p);
            g.gram.block(1, p + 1, p, p) = gram.block(b * p, a * p, p, p);
            g.gram.block(p + 1, 1, p, p) = gram.block(a * p, b * p, p, p);
            g.gram.block(p + 1, p + 1, p, p) = gram.block(a * p, a * p, p, p);
            g.xty.segment(p + 1, p) = lag_target.block(a * p, b, p, 1);
            try {
                GrangerFit fit = fit_from_gram(g, cfg);
                if (fit.p_value < cfg.alpha)
                    per_target[static_cast<std::size_t>(b)].push_back(
                        {static_cast<std::size_t>(a), static_cast<std::size_t>(b), fit.r_squared()});
            } catch (const NumericError&) {
                ++failures[static_cast<std::size_t>(b)];
            }
        }
    };

    const unsigned workers = std::min<unsigned>(threads == 0 ? worker_count() : threads, static_cast<unsigned>(n));
    if (workers <= 1) {
        for (Eigen::Index b = 0; b < n; ++b)
            work(b);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (Eigen::Index b = w; b < n; b += workers)
                    work(b);
            });
        for (auto& t : pool)
            t.join();
    }

    std::vector<Edge> edges;
    std::size_t failed = 0;
    for (std::size_t b = 0; b < per_target.size(); ++b) {
        edges.insert(edges.end(), per_target[b].begin(), per_target[b].end());
        failed += failures[b];
    }
    CausalityGraph graph = CausalityGraph::over(static_cast<std::size_t>(n), std::move(edges));
    graph.failed_pairs = failed;
    return graph;
}

CausalityGraph prune_graph(const CausalityGraph& baseline, const std::vector<std::size_t>& anomalous) {
    std::vector<std::size_t> keep = anomalous;
    std::sort(keep.begin(), keep.end());
    keep.erase(std::unique(keep.begin(), keep.end()), keep.end());
    for (auto k : keep)
        if (!baseline.contains(k))
            throw SchemaError("anomalous KPI " + std::to_string(k) + " is not in the baseline graph");
    std::vector<Edge> edges;
    for (const Edge& e : baseline.edges())
        if (std::binary_search(keep.begin(), keep.end(), e.from) && std::binary_search(keep.begin(), keep.end(), e.to))
            edges.push_back(e);
    return CausalityGraph(std::move(keep), std::move(edges));
}

void write_graph(const CausalityGraph& graph, const std::string& catalog_hash, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "# catalog " << catalog_hash << " nodes " << graph.nodes().size() << '\n';
    out << "from_index,to_index,weight\n";
    for (const Edge& e : graph.edges())
        out << e.from << ',' << e.to << ',' << format_double(e.weight) << '\n';
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open " + path.string() + " for writing");
    file << out.str();
    if (!file)
        throw IoError("write failed for " + path.string());
}

CausalityGraph read_graph(const std::filesystem::path& path, std::string* catalog_hash) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open graph " + path.string());
    std::string line;
    std::getline(in, line);
    std::istringstream head(line);
    std::string hash, hash_tag, nodes_tag, pound;
    std::size_t n = 0;
    if (!(head >> pound >> hash_tag >> hash >> nodes_tag >> n) || pound != "#" || hash_tag != "catalog" ||
        nodes_tag != "nodes")
        throw ParseError(path.string() + ":1: expected '# catalog <hash> nodes <n>'");
    if (catalog_hash)
        *catalog_hash = hash;
    if (!std::getline(in, line) || line != "from_index,to_index,weight")
        throw ParseError(path.string() + ":2: expected edge-list header");
    std::vector<Edge> edges;
    std::size_t lineno = 2;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        Edge e;
        char c1 = 0, c2 = 0;
        std::istringstream row(line);
        if (!(row >> e.from >> c1 >> e.to >> c2 >> e.weight) || c1 != ',' || c2 != ',')
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed edge");
        edges.push_back(e);
    }
    return CausalityGraph::over(n, std::move(edges));
}

} // namespace kpiguard
