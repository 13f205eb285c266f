#include "fixtures.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/serialize.hpp"
#include "kpiguard/simulator.hpp"

#include <doctest.h>

#include <fstream>

using namespace kpiguard;

namespace {

const PipelineBundle& bundle() {
    static const PipelineBundle b = [] {
        const auto spec = ClusterSpec::make(1, 8, 2);
        BundleConfig cfg;
        cfg.autoencoder.epochs = 10;
        cfg.threads = 1;
        return train_bundle(gen_normal_telemetry(spec, gen_workload(400, 1), 1), 200, cfg);
    }();
    return b;
}

/// Serializes through text so the check covers the number formatting, not just the JSON tree.
nlohmann::json through_text(const nlohmann::json& j) { return nlohmann::json::parse(j.dump()); }

} // namespace

TEST_CASE("model JSON round-trips bit for bit") {
    const auto& b = bundle();
    const auto ae = autoencoder_from_json(through_text(to_json(b.autoencoder)));
    CHECK(to_json(ae) == to_json(b.autoencoder));
    for (std::size_t l = 0; l < ae.layers.size(); ++l)
        CHECK(ae.layers[l].weights == b.autoencoder.layers[l].weights);
    CHECK(ae.threshold == b.autoencoder.threshold);

    const auto rbm = rbm_from_json(through_text(to_json(b.rbm)));
    CHECK(rbm.weights == b.rbm.weights);
    CHECK(rbm.energy_mean == b.rbm.energy_mean);
    CHECK(rbm.energy_std == b.rbm.energy_std);
    CHECK(rbm.energy_form == b.rbm.energy_form);

    const auto svm = ocsvm_from_json(through_text(to_json(b.ocsvm)));
    CHECK(svm.alpha == b.ocsvm.alpha);
    CHECK(svm.rho == b.ocsvm.rho);
    CHECK(svm.support == b.ocsvm.support);

    const auto norm = norm_from_json(through_text(to_json(b.norm)));
    CHECK(norm.mean == b.norm.mean);
    CHECK(norm.std == b.norm.std);

    BundleConfig cfg = b.config;
    cfg.loud_anomalies = LoudAnomalies::ZScore;
    cfg.rbm_energy = EnergyForm::Linear;
    CHECK(to_json(bundle_config_from_json(through_text(to_json(cfg)))) == to_json(cfg));
}

TEST_CASE("awkward doubles survive the text form") {
    RbmModel m = init_rbm(3, 2, 5);
    m.weights(0, 0) = 0.1 + 0.2;
    m.weights(1, 1) = 5e-324;
    m.visible_bias(2) = -1.7976931348623157e308;
    const auto back = rbm_from_json(through_text(to_json(m)));
    CHECK(back.weights == m.weights);
    CHECK(back.visible_bias == m.visible_bias);
    CHECK_FALSE(back.calibrated());
}

TEST_CASE("malformed model JSON is a parse error") {
    auto j = to_json(bundle().rbm);
    CHECK_THROWS_AS(autoencoder_from_json(j), ParseError);
    j["version"] = 99;
    CHECK_THROWS_AS(rbm_from_json(j), ParseError);
    auto k = to_json(bundle().autoencoder);
    k["layers"][0]["weights"]["data"].erase(0);
    CHECK_THROWS_AS(autoencoder_from_json(k), ParseError);
    auto o = to_json(bundle().ocsvm);
    o["alpha"].erase(0);
    CHECK_THROWS_AS(ocsvm_from_json(o), ParseError);
}

TEST_CASE("saved bundles reload and score identically") {
    fixtures::TempDir dir("bundle");
    const auto& b = bundle();
    save_bundle(b, dir.path());
    const auto loaded = load_bundle(dir.path());
    CHECK(*loaded.catalog == *b.catalog);
    CHECK(loaded.baseline == b.baseline);
    const auto probe = gen_normal_telemetry(ClusterSpec::make(1, 8, 2), gen_workload(120, 7), 7);
    for (const char* mode : {"e", "a"}) {
        const auto x = run_pipeline(b, probe, Mode::parse(mode));
        const auto y = run_pipeline(loaded, probe, Mode::parse(mode));
        REQUIRE(x.size() == y.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(x[i].state == y[i].state);
            CHECK(x[i].ranking == y[i].ranking);
        }
    }
}

TEST_CASE("catalog hash mismatches are schema errors") {
    fixtures::TempDir dir("bundle");
    save_bundle(bundle(), dir.path());

    const std::string graph = fixtures::slurp(dir / "baseline_graph.csv");
    const auto hash = bundle().catalog->hash_hex();
    std::string tampered = graph;
    tampered.replace(tampered.find(hash), hash.size(), std::string(hash.size(), '0'));
    fixtures::spit(dir / "baseline_graph.csv", tampered);
    CHECK_THROWS_AS(load_bundle(dir.path()), SchemaError);
    fixtures::spit(dir / "baseline_graph.csv", graph);

    auto j = nlohmann::json::parse(fixtures::slurp(dir / "bundle.json"));
    j["catalog_hash"] = "0000";
    fixtures::spit(dir / "bundle.json", j.dump());
    CHECK_THROWS_AS(load_bundle(dir.path()), SchemaError);

    CHECK_THROWS_AS(load_bundle(dir / "nowhere"), IoError);
    fixtures::spit(dir / "bundle.json", "{ not json");
    CHECK_THROWS_AS(load_bundle(dir.path()), ParseError);
}
