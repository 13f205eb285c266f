#include "fixtures.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/telemetry.hpp"

#include <doctest.h>

#include <cmath>

using namespace kpiguard;

TEST_CASE("kpi labels parse and reject malformed input") {
    CHECK(Kpi::parse("cpu.user@master1") == Kpi{"cpu.user", "master1"});
    CHECK_THROWS_AS(Kpi::parse("cpu.user"), ParseError);
    CHECK_THROWS_AS(Kpi::parse("@node"), ParseError);
    CHECK_THROWS_AS(KpiCatalog(std::vector<Kpi>{{"a", "n"}, {"a", "n"}}), SchemaError);
    CHECK_THROWS_AS(KpiCatalog(std::vector<Kpi>{}), SchemaError);
}

TEST_CASE("catalog index is the inverse of the sequence") {
    const auto cat = fixtures::catalog(3, 4);
    for (std::size_t i = 0; i < cat->size(); ++i)
        CHECK(cat->index_of((*cat)[i]) == i);
    CHECK_FALSE(cat->index_of({"missing", "node0"}).has_value());
    CHECK(cat->nodes() == std::vector<std::string>{"node0", "node1", "node2"});
}

TEST_CASE("load_series parses a small file") {
    fixtures::TempDir dir("telemetry");
    fixtures::spit(dir / "t.csv", "timestamp,a@n1,b@n1,c@n2\n0,1,2,3\n1,4.5,5,-6\n");
    const Series s = load_series(dir / "t.csv");
    CHECK(s.n_kpis() == 3);
    CHECK(s.size() == 2);
    CHECK(s.values()(1, 2) == -6.0);
}

TEST_CASE("load_series errors name the problem") {
    fixtures::TempDir dir("telemetry");
    fixtures::spit(dir / "empty.csv", "timestamp,a@n\n");
    CHECK_THROWS_WITH_AS(load_series(dir / "empty.csv"), doctest::Contains("no snapshots"), InsufficientDataError);

    fixtures::spit(dir / "bad.csv", "timestamp,a@n\n0,1\n1,x\n");
    CHECK_THROWS_WITH_AS(load_series(dir / "bad.csv"), doctest::Contains(":3:"), ParseError);

    fixtures::spit(dir / "order.csv", "timestamp,a@n\n1,1\n1,2\n");
    CHECK_THROWS_AS(load_series(dir / "order.csv"), OrderingError);

    const KpiCatalog other(std::vector<Kpi>{{"z", "n"}});
    fixtures::spit(dir / "ok.csv", "timestamp,a@n\n0,1\n");
    CHECK_THROWS_AS(load_series(dir / "ok.csv", &other), SchemaError);
    CHECK_THROWS_AS(load_series(dir / "missing.csv"), IoError);
}

TEST_CASE("write_series emits one header and one line per snapshot") {
    fixtures::TempDir dir("telemetry");
    const Series s = fixtures::random_series(1, 3, 7);
    write_series(s, dir / "one.csv");
    const std::string text = fixtures::slurp(dir / "one.csv");
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

TEST_CASE("write then load round-trips a 1000-snapshot random series exactly") {
    fixtures::TempDir dir("telemetry");
    const Series s = fixtures::random_series(1000, 5, 11, 1e3);
    write_series(s, dir / "rt.csv");
    CHECK(load_series(dir / "rt.csv") == s);
}

TEST_CASE("non-finite values are rejected") {
    RowMatrix v(1, 1);
    v(0, 0) = std::nan("");
    CHECK_THROWS_AS(Series(fixtures::flat_catalog(1), {0}, v), SchemaError);
}

TEST_CASE("fit_normalizer: hand arithmetic and the std floor") {
    RowMatrix v(2, 2);
    v << 0, 5, 2, 5;
    const NormStats st = fit_normalizer(Series(fixtures::flat_catalog(2), {0, 1}, v));
    CHECK(st.mean(0) == doctest::Approx(1.0));
    CHECK(st.std(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
    CHECK(st.mean(1) == 5.0);
    CHECK(st.std(1) == NormStats::kStdFloor);
    CHECK_THROWS_AS(fit_normalizer(fixtures::random_series(1, 2, 1)), InsufficientDataError);
}

TEST_CASE("fit_normalizer matches a two-pass oracle") {
    const Series s = fixtures::random_series(257, 6, 3, 10.0);
    const NormStats st = fit_normalizer(s);
    for (std::size_t k = 0; k < 6; ++k) {
        double mean = 0.0;
        for (std::size_t r = 0; r < s.size(); ++r)
            mean += s.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
        mean /= static_cast<double>(s.size());
        double ss = 0.0;
        for (std::size_t r = 0; r < s.size(); ++r) {
            const double d = s.values()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(s.size() - 1));
        CHECK(st.mean(static_cast<Eigen::Index>(k)) == doctest::Approx(mean).epsilon(1e-12));
        CHECK(st.std(static_cast<Eigen::Index>(k)) == doctest::Approx(sd).epsilon(1e-12));
    }
}

TEST_CASE("normalize centres, scales and inverts") {
    const Series s = fixtures::random_series(300, 4, 5, 3.0);
    const NormStats st = fit_normalizer(s);
    const Series z = normalize(s, st);
    const NormStats again = fit_normalizer(z);
    for (Eigen::Index k = 0; k < 4; ++k) {
        CHECK(std::abs(again.mean(k)) < 1e-9);
        CHECK(again.std(k) == doctest::Approx(1.0).epsilon(1e-9));
    }
    const Series back = denormalize(z, st);
    CHECK((back.values() - s.values()).cwiseAbs().maxCoeff() < 1e-9);

    RowMatrix at_mean = st.mean.transpose();
    CHECK(normalize(Series(s.catalog(), {0}, at_mean), st).values().cwiseAbs().maxCoeff() == 0.0);

    NormStats wrong{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
    CHECK_THROWS_AS(normalize(s, wrong), SchemaError);
}

TEST_CASE("split_train boundaries") {
    const Series s = fixtures::random_series(10, 2, 1);
    auto [a, b] = split_train(s, 5);
    CHECK(a.size() == 5);
    CHECK(b.size() == 5);
    CHECK(a.catalog() == b.catalog());

    auto [e, all] = split_train(s, 0);
    CHECK(e.empty());
    CHECK(all.size() == 10);
    CHECK(e.size() + all.size() == s.size());

    CHECK_THROWS_AS(split_train(s, 42), RangeError);
}

TEST_CASE("format_double round-trips") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
        CHECK(std::stod(format_double(v)) == v);
    }
}
