#include "fixtures.hpp"

#include "kpiguard/config.hpp"
#include "kpiguard/error.hpp"

#include <doctest.h>

#include <set>

using namespace kpiguard;

TEST_CASE("default config formats and parses back to itself") {
    const ExperimentConfig def;
    CHECK_NOTHROW(def.validate());
    const std::string text = format_config(def);
    CHECK(format_config(parse_config(text)) == text);
}

TEST_CASE("edited fields survive a round trip") {
    const auto cfg = parse_config(R"(
# comment line
[experiment]
seed = 42          # trailing comment
modes = a, loud
loud_n = 2, 6

[cluster]
pairs = 2
metrics = 7

[simulation]
split = 0.25
kinds = cpu_hog
patterns = random, linear

[rbm]
energy = linear
learning_rate = 0.002

[loud]
anomalies = zscore
z = 2.5
)");
    CHECK(cfg.seed == 42);
    CHECK(cfg.modes == std::vector<std::string>{"a", "loud"});
    CHECK(cfg.loud_n == std::vector<int>{2, 6});
    CHECK(cfg.simulation.pairs == 2);
    CHECK(cfg.simulation.split == 0.25);
    CHECK(cfg.simulation.kinds == std::vector<FaultKind>{FaultKind::CpuHog});
    CHECK(cfg.simulation.patterns == std::vector<Pattern>{Pattern::Random, Pattern::Linear});
    CHECK(cfg.bundle.rbm_energy == EnergyForm::Linear);
    CHECK(cfg.bundle.rbm.learning_rate == 0.002);
    CHECK(cfg.bundle.loud_anomalies == LoudAnomalies::ZScore);
    CHECK(format_config(parse_config(format_config(cfg))) == format_config(cfg));
    CHECK(cfg.cluster().nodes().size() == 4);
}

TEST_CASE("syntax errors carry origin and line") {
    CHECK_THROWS_WITH_AS(parse_config("[experiment]\nsed = 1\n", "x.ini"), doctest::Contains("x.ini:2: unknown field experiment.sed"),
                         UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[experiment]\nseed = 1\nseed = 2\n", "x.ini"),
                         doctest::Contains("x.ini:3: duplicate field experiment.seed"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("seed = 1\n"), doctest::Contains(":1: key outside"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[experiment\n"), doctest::Contains("malformed section"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[experiment]\nseed\n"), doctest::Contains("key = value"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[cluster]\npairs = two\n"), doctest::Contains("cluster.pairs"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[simulation]\nkinds = meteor\n"), doctest::Contains("simulation.kinds"),
                         UsageError);
}

TEST_CASE("validation names the offending field") {
    CHECK_THROWS_WITH_AS(parse_config("[simulation]\nsplit = 1\n"), doctest::Contains("simulation.split"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[ocsvm]\nnu = 0\n"), doctest::Contains("ocsvm.nu"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[ranker]\ncap_percent = 0\n"), doctest::Contains("ranker.cap_percent"),
                         UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[granger]\nlag = 0\n"), doctest::Contains("granger"), UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[experiment]\nmodes = a, cusum\n"), doctest::Contains("experiment.modes"),
                         UsageError);
    CHECK_THROWS_WITH_AS(parse_config("[experiment]\nloud_n = 0\n"), doctest::Contains("experiment.loud_n"),
                         UsageError);
}

TEST_CASE("config files load from disk") {
    fixtures::TempDir dir("config");
    fixtures::spit(dir / "c.ini", "[experiment]\nseed = 9\n");
    CHECK(load_config(dir / "c.ini").seed == 9);
    CHECK_THROWS_AS(load_config(dir / "missing.ini"), IoError);
}

TEST_CASE("seed streams are distinct and stable") {
    std::set<std::uint64_t> seen;
    for (auto s : {SeedStream::Cluster, SeedStream::TrainWorkload, SeedStream::TrainTelemetry,
                   SeedStream::HoldoutWorkload, SeedStream::HoldoutTelemetry, SeedStream::Autoencoder, SeedStream::Rbm,
                   SeedStream::Ocsvm, SeedStream::Fault})
        for (std::uint64_t i = 0; i < 10; ++i)
            seen.insert(stream_seed(1, s, i));
    CHECK(seen.size() == 90);
    CHECK(stream_seed(7, SeedStream::Fault, 3) == stream_seed(7, SeedStream::Fault, 3));
    CHECK(stream_seed(7, SeedStream::Fault, 3) != stream_seed(8, SeedStream::Fault, 3));

    ExperimentConfig cfg;
    cfg.seed = 5;
    const auto b = cfg.seeded_bundle();
    CHECK(b.autoencoder.seed == stream_seed(5, SeedStream::Autoencoder));
    CHECK(b.rbm.seed != b.autoencoder.seed);
}
