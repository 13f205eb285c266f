#include "fixtures.hpp"
#include "oracles.hpp"

#include "kpiguard/causality.hpp"
#include "kpiguard/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace kpiguard;

TEST_CASE("granger fit matches an explicit QR regression") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const int lag = 1 + static_cast<int>(rng.index(5));
        const auto x = oracles::ar1(300, 0.4, rng);
        std::vector<double> y = oracles::ar1(300, 0.3, rng);
        const double c = trial % 2 ? 0.3 : 0.0;
        for (std::size_t t = 1; t < y.size(); ++t)
            y[t] += c * x[t - 1];
        const GrangerConfig cfg{.lag = lag, .alpha = 0.01};
        const auto fit = granger_fit(x, y, cfg);
        const auto ref = oracles::qr_granger(x, y, lag);
        CHECK(fit.rss_restricted == doctest::Approx(ref.rss_restricted).epsilon(1e-7));
        CHECK(fit.rss_unrestricted == doctest::Approx(ref.rss_unrestricted).epsilon(1e-7));
        CHECK(fit.f_statistic == doctest::Approx(ref.f_statistic).epsilon(1e-6));
        CHECK(fit.p_value == doctest::Approx(ref.p_value).epsilon(1e-6));
        CHECK(fit.rss_unrestricted <= fit.rss_restricted);
        CHECK(fit.r_squared() >= 0.0);
        CHECK(fit.r_squared() <= 1.0);
    }
}

TEST_CASE("lagged dependency is detected with a weight close to the explained variance") {
    Rng rng(3);
    std::vector<double> x(500), y(500);
    for (auto& v : x)
        v = rng.normal();
    const double noise = 0.5;
    y[0] = rng.normal(0.0, noise);
    for (std::size_t t = 1; t < 500; ++t)
        y[t] = 0.9 * x[t - 1] + rng.normal(0.0, noise);
    const auto w = granger_test(x, y, {.lag = 2, .alpha = 0.01});
    REQUIRE(w.has_value());
    const double explained = 0.81 / (0.81 + noise * noise);
    CHECK(*w == doctest::Approx(explained).epsilon(0.05));
    CHECK_FALSE(granger_test(y, x, {.lag = 2, .alpha = 0.01}).has_value());
}

TEST_CASE("constant inputs never reject") {
    const std::vector<double> c(100, 4.0);
    CHECK_FALSE(granger_test(c, c, {}).has_value());
    Rng rng(1);
    const auto x = oracles::ar1(100, 0.5, rng);
    CHECK_FALSE(granger_test(x, c, {}).has_value());
}

TEST_CASE("granger preconditions") {
    const std::vector<double> a(16, 1.0), b(15, 1.0);
    CHECK_THROWS_AS(granger_fit(a, b, {}), SchemaError);
    CHECK_THROWS_AS(granger_fit(a, a, {.lag = 5}), InsufficientDataError);
    CHECK_NOTHROW(granger_fit(std::vector<double>(17, 1.0), std::vector<double>(17, 1.0), {.lag = 5}));
    CHECK_THROWS_AS(granger_fit(a, a, {.lag = 0}), UsageError);
    CHECK_THROWS_AS(granger_fit(a, a, {.alpha = 1.0}), UsageError);
}

TEST_CASE("null rejection rate matches alpha") {
    const double rate = oracles::granger_null_rate(1000, 500, {.lag = 5, .alpha = 0.01}, 99);
    CHECK(rate >= 0.003);
    CHECK(rate <= 0.017);
}

TEST_CASE("baseline graph agrees with pairwise tests") {
    const Series s = oracles::var_chain(5, 400, 0.35, 4);
    const GrangerConfig cfg{.lag = 3, .alpha = 0.01};
    const auto g = build_baseline_graph(s, cfg, 1);
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b) {
            if (a == b)
                continue;
            std::vector<double> x(s.size()), y(s.size());
            for (std::size_t t = 0; t < s.size(); ++t) {
                x[t] = s.values()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(a));
                y[t] = s.values()(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(b));
            }
            const auto w = granger_test(x, y, cfg);
            const auto e = g.weight(a, b);
            REQUIRE(w.has_value() == e.has_value());
            if (w)
                CHECK(*e == doctest::Approx(*w).epsilon(1e-9));
        }
}

TEST_CASE("baseline graph is deterministic across worker counts") {
    const Series s = oracles::var_chain(6, 300, 0.35, 8);
    CHECK(build_baseline_graph(s, {}, 1) == build_baseline_graph(s, {}, 3));
}

TEST_CASE("chain VAR is recovered") {
    std::vector<double> precision, recall;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto g = build_baseline_graph(oracles::var_chain(5, 500, 0.35, seed), {}, 1);
        const auto r = oracles::chain_recovery(g, 5);
        precision.push_back(r.precision);
        recall.push_back(r.recall);
    }
    CHECK(oracles::median(precision) >= 0.9);
    CHECK(oracles::median(recall) >= 0.9);
}

TEST_CASE("constant series give an empty graph") {
    RowMatrix v = RowMatrix::Constant(50, 3, 2.0);
    std::vector<Timestamp> ts(50);
    for (std::size_t i = 0; i < 50; ++i)
        ts[i] = static_cast<Timestamp>(i);
    const auto g = build_baseline_graph(Series(fixtures::flat_catalog(3), ts, v), {}, 1);
    CHECK(g.edges().empty());
    CHECK(g.nodes().size() == 3);
}

TEST_CASE("relabeling KPIs relabels the graph") {
    const Series s = oracles::var_chain(5, 400, 0.35, 12);
    const std::vector<Eigen::Index> perm{3, 0, 4, 1, 2};
    RowMatrix shuffled(s.values().rows(), 5);
    for (Eigen::Index k = 0; k < 5; ++k)
        shuffled.col(k) = s.values().col(perm[static_cast<std::size_t>(k)]);
    const Series t(fixtures::flat_catalog(5), s.timestamps(), shuffled);
    const auto g = build_baseline_graph(s, {}, 1);
    const auto h = build_baseline_graph(t, {}, 1);
    REQUIRE(g.edges().size() == h.edges().size());
    for (const auto& e : h.edges()) {
        const auto w = g.weight(static_cast<std::size_t>(perm[e.from]), static_cast<std::size_t>(perm[e.to]));
        REQUIRE(w.has_value());
        CHECK(*w == doctest::Approx(e.weight).epsilon(1e-9));
    }
}

TEST_CASE("graph invariants are enforced") {
    CHECK_THROWS_AS(CausalityGraph::over(2, {{0, 0, 0.5}}), SchemaError);
    CHECK_THROWS_AS(CausalityGraph::over(2, {{0, 1, 1.5}}), SchemaError);
    CHECK_THROWS_AS(CausalityGraph::over(2, {{0, 1, 0.5}, {0, 1, 0.2}}), SchemaError);
    CHECK_THROWS_AS(CausalityGraph::over(2, {{0, 2, 0.5}}), SchemaError);
}

TEST_CASE("pruning keeps the induced subgraph and is monotone") {
    Rng rng(21);
    for (int t = 0; t < 50; ++t) {
        const auto g = oracles::random_graph(rng, 20);
        CHECK(prune_graph(g, {}).nodes().empty());
        CHECK(prune_graph(g, g.nodes()) == g);

        std::vector<std::size_t> small, large;
        for (auto v : g.nodes()) {
            const bool in_large = rng.bernoulli(0.7);
            if (in_large) {
                large.push_back(v);
                if (rng.bernoulli(0.5))
                    small.push_back(v);
            }
        }
        const auto ps = prune_graph(g, small);
        const auto pl = prune_graph(g, large);
        for (const auto& e : ps.edges()) {
            CHECK(pl.weight(e.from, e.to) == e.weight);
            CHECK(std::find(small.begin(), small.end(), e.from) != small.end());
            CHECK(std::find(small.begin(), small.end(), e.to) != small.end());
        }
        for (const auto& e : g.edges())
            if (ps.contains(e.from) && ps.contains(e.to))
                CHECK(ps.weight(e.from, e.to) == e.weight);
    }
    CHECK_THROWS_AS(prune_graph(CausalityGraph::over(2, {}), {5}), SchemaError);
}

TEST_CASE("graph file round-trips with its catalog hash") {
    fixtures::TempDir dir("graph");
    // The file stores a node count, so the graph must be over 0..n-1 like every baseline graph.
    const auto g = build_baseline_graph(oracles::var_chain(5, 400, 0.35, 4), {}, 1);
    REQUIRE_FALSE(g.edges().empty());
    write_graph(g, "deadbeef", dir / "g.csv");
    std::string hash;
    const auto back = read_graph(dir / "g.csv", &hash);
    CHECK(hash == "deadbeef");
    CHECK(back == g);
    fixtures::spit(dir / "bad.csv", "nonsense\n");
    CHECK_THROWS_AS(read_graph(dir / "bad.csv"), ParseError);
}
