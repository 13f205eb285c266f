#include "fixtures.hpp"

#include "kpiguard/cli.hpp"
#include "kpiguard/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace kpiguard;
namespace fs = std::filesystem;

namespace {

/// One pair, six metrics, short traces and a single CPU-hog scenario.
ExperimentConfig small_config() {
    return parse_config(R"(
[experiment]
seed = 42
modes = e, a, ensemble, loud
loud_n = 3
[cluster]
pairs = 1
metrics = 6
[simulation]
train_minutes = 600
holdout_minutes = 120
replications = 2
kinds = cpu_hog
patterns = linear
[autoencoder]
epochs = 5
[rbm]
epochs = 3
)");
}

std::size_t count_files(const fs::path& dir) {
    std::size_t n = 0;
    if (fs::exists(dir))
        for (const auto& e : fs::recursive_directory_iterator(dir))
            n += e.is_regular_file();
    return n;
}

} // namespace

TEST_CASE("dry run prints the plan and writes nothing") {
    fixtures::TempDir dir("cli");
    std::ostringstream log;
    const auto plan = cmd_simulate(small_config(), dir / "data", true, log);
    CHECK(plan.size() == 4);
    CHECK(count_files(dir.path()) == 0);
    CHECK(log.str().find("plan: 4 traces") != std::string::npos);
    CHECK(log.str().find("CPUH-Lin_r1.csv") != std::string::npos);
}

TEST_CASE("simulation covers the full fault matrix with replications") {
    fixtures::TempDir dir("cli");
    auto cfg = small_config();
    cfg.simulation.kinds = {FaultKind::MemoryLeak, FaultKind::PacketLoss, FaultKind::CpuHog};
    cfg.simulation.patterns = {Pattern::Linear, Pattern::Exponential, Pattern::Random};
    cfg.simulation.train_minutes = 60;
    cfg.simulation.holdout_minutes = 30;
    std::ostringstream log;
    const auto plan = cmd_simulate(cfg, dir.path(), false, log);
    CHECK(plan.size() == 2 + 9 * 2);
    CHECK(fs::exists(dir / "train.csv"));
    CHECK(fs::exists(dir / "holdout.csv"));
    for (const auto& p : plan)
        if (p.fault) {
            const auto truth = read_manifest(dir.path() / *p.manifest).at(0);
            // Random-pattern crash times only meet the horizon in expectation.
            if (p.fault->pattern != Pattern::Random)
                CHECK(truth.horizon() >= cfg.simulation.min_horizon);
            CHECK(truth.injection == p.fault->start);
            CHECK(load_series(dir.path() / p.trace).size() == static_cast<std::size_t>(truth.crash));
        }
    // Replications differ.
    CHECK(fixtures::slurp(dir / "faults/MemL-Lin_r0.csv") != fixtures::slurp(dir / "faults/MemL-Lin_r1.csv"));
}

TEST_CASE("train, predict and evaluate chain through files") {
    fixtures::TempDir dir("cli");
    const auto cfg = small_config();
    std::ostringstream log;
    cmd_simulate(cfg, dir / "data", false, log);
    const auto bundle = cmd_train(dir / "data/train.csv", cfg, dir / "bundle", log);
    CHECK(fixtures::slurp(dir / "bundle/train.log").rfind("seed 42\n", 0) == 0);
    CHECK(fs::exists(dir / "bundle/bundle.json"));

    const auto trace = dir / "data/faults/CPUH-Lin_r0.csv";
    const auto n = cmd_predict(dir / "bundle", trace, Mode::parse("ensemble"), dir / "v0.csv");
    CHECK(n == load_series(trace).size());
    CHECK(read_verdicts(dir / "v0.csv").size() == n);
    CHECK(cmd_predict(dir / "bundle", dir / "data/holdout.csv", Mode::parse("loud", 3), dir / "v1.csv") == 120);
    CHECK_THROWS_AS(cmd_predict(dir / "bundle", dir / "missing.csv", Mode::parse("a"), dir / "v2.csv"), IoError);

    const auto one = cmd_evaluate({dir / "v0.csv"}, dir / "data/faults/CPUH-Lin_r0.manifest.csv", dir / "m0.csv");
    REQUIRE(one.size() == 1);
    CHECK(one[0].injection_min.has_value());

    const auto rows = cmd_evaluate({dir / "v0.csv", dir / "v1.csv"}, std::nullopt, dir / "m1.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[2].experiment == "median");
    CHECK_FALSE(rows[0].injection_min.has_value());
    CHECK(read_metrics(dir / "m1.csv").size() == 3);
    CHECK_THROWS_AS(cmd_evaluate({}, std::nullopt, dir / "m2.csv"), UsageError);
}

TEST_CASE("experiment runs end to end, resumes, and reproduces its metrics") {
    fixtures::TempDir dir("cli");
    const auto cfg = small_config();
    std::ostringstream log;
    const auto first = cmd_experiment(cfg, dir / "run", log);
    CHECK_FALSE(first.resumed);
    CHECK(first.traces.size() == 3);
    CHECK(experiment_modes(cfg).size() == 4);
    CHECK(first.medians.size() == 4);
    const std::string metrics = fixtures::slurp(first.metrics_csv);

    const auto again = cmd_experiment(cfg, dir / "run", log);
    CHECK(again.resumed);
    CHECK(fixtures::slurp(again.metrics_csv) == metrics);

    const auto fresh = cmd_experiment(cfg, dir / "other", log);
    CHECK(fixtures::slurp(fresh.metrics_csv) == metrics);

    for (const auto& t : first.traces) {
        const auto& e = t.verdicts.at("e");
        const auto& a = t.verdicts.at("a");
        const auto& u = t.verdicts.at("ensemble");
        for (std::size_t i = 0; i < u.size(); ++i)
            CHECK((u[i].state == State::Anomalous) ==
                  (e[i].state == State::Anomalous || a[i].state == State::Anomalous));
    }
}
