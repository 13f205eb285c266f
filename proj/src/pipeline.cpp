#include "kpiguard/pipeline.hpp"

#include "kpiguard/error.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace kpiguard {

std::string to_string(Source s) {
    switch (s) {
    case Source::Energy: return "e";
    case Source::Autoencoder: return "a";
    case Source::Loud: return "loud";
    case Source::Ensemble: return "ensemble";
    }
    return "?";
}

Source parse_source(const std::string& s) {
    if (s == "e")
        return Source::Energy;
    if (s == "a")
        return Source::Autoencoder;
    if (s == "loud")
        return Source::Loud;
    if (s == "ensemble")
        return Source::Ensemble;
    throw ParseError("unknown verdict source '" + s + "'");
}

std::string to_string(State s) { return s == State::Anomalous ? "anomalous" : "normal"; }

void PipelineBundle::verify() const {
    if (!catalog)
        throw SchemaError("bundle has no catalog");
    const auto n = catalog->size();
    auto fail = [&](const std::string& what) {
        throw SchemaError("bundle component '" + what + "' does not match catalog " + catalog->hash_hex());
    };
    if (static_cast<std::size_t>(norm.mean.size()) != n || static_cast<std::size_t>(norm.std.size()) != n)
        fail("normalizer");
    if (autoencoder.n_inputs() != n)
        fail("autoencoder");
    if (rbm.n_visible() != n)
        fail("rbm");
    if (ocsvm.dimension() != n)
        fail("ocsvm");
    if (baseline.nodes().size() != n)
        fail("baseline graph");
}

PipelineBundle train_bundle(const Series& normal, Timestamp boundary, const BundleConfig& cfg) {
    auto [first, second] = split_train(normal, boundary);
    if (first.size() < 10)
        throw InsufficientDataError("first training part has " + std::to_string(first.size()) +
                                    " snapshots; the autoencoder needs at least 10");
    if (second.size() < 10)
        throw InsufficientDataError("second training part has " + std::to_string(second.size()) +
                                    " snapshots; OCSVM and RBM calibration need at least 10");

    PipelineBundle bundle;
    bundle.catalog = normal.catalog();
    bundle.config = cfg;
    bundle.norm = fit_normalizer(first);
    const Series z_first = normalize(first, bundle.norm);
    const Series z_second = normalize(second, bundle.norm);

    bundle.autoencoder = train_autoencoder(z_first, cfg.autoencoder);

    std::vector<BinaryAnomalyVector> vectors;
    vectors.reserve(z_second.size());
    for (std::size_t i = 0; i < z_second.size(); ++i)
        vectors.push_back(BinaryAnomalyVector::from_indices(
            normal.n_kpis(), anomalous_kpis(bundle.autoencoder, z_second.row(i).transpose())));
    bundle.ocsvm = train_ocsvm(vectors, cfg.ocsvm);

    RbmModel rbm = train_rbm(z_first, cfg.rbm, cfg.rbm_hidden);
    rbm.energy_form = cfg.rbm_energy;
    bundle.rbm = calibrate_threshold(std::move(rbm), z_second);
    bundle.baseline = build_baseline_graph(normalize(normal, bundle.norm), cfg.granger, cfg.threads);
    return bundle;
}

namespace {

Eigen::VectorXd normalized(const PipelineBundle& bundle, const Snapshot& snapshot) {
    if (static_cast<std::size_t>(snapshot.values.size()) != bundle.catalog->size())
        throw SchemaError("snapshot at t=" + std::to_string(snapshot.timestamp) + " has " +
                          std::to_string(snapshot.values.size()) + " KPIs, bundle catalog has " +
                          std::to_string(bundle.catalog->size()));
    return ((snapshot.values - bundle.norm.mean).array() / bundle.norm.std.array()).matrix();
}

NodeRanking rank(const PipelineBundle& bundle, const std::vector<std::size_t>& anomalous) {
    return rank_nodes(bundle.baseline, anomalous, *bundle.catalog, bundle.config.ranker);
}

} // namespace

Verdict prevent_a_step(const PipelineBundle& bundle, const Snapshot& snapshot) {
    const Eigen::VectorXd z = normalized(bundle, snapshot);
    const auto anomalous = anomalous_kpis(bundle.autoencoder, z);
    const auto bits = BinaryAnomalyVector::from_indices(z.size(), anomalous);
    Verdict v{snapshot.timestamp, State::Normal, {}, Source::Autoencoder};
    if (classify_ocsvm(bundle.ocsvm, bits) == OcsvmClass::FailureProne) {
        v.state = State::Anomalous;
        v.ranking = rank(bundle, anomalous);
    }
    return v;
}

Verdict prevent_e_step(const PipelineBundle& bundle, const Snapshot& snapshot) {
    const Eigen::VectorXd z = normalized(bundle, snapshot);
    Verdict v{snapshot.timestamp, State::Normal, {}, Source::Energy};
    if (classify_state_rbm(bundle.rbm, z) == State::Anomalous) {
        v.state = State::Anomalous;
        v.ranking = rank(bundle, anomalous_kpis(bundle.autoencoder, z));
    }
    return v;
}

std::pair<Verdict, LoudState> loud_step(const PipelineBundle& bundle, const Snapshot& snapshot, const LoudState& state,
                                        int persistence) {
    if (persistence < 1)
        throw UsageError("LOUD persistence N must be >= 1");
    const Eigen::VectorXd z = normalized(bundle, snapshot);
    std::vector<std::size_t> anomalous;
    if (bundle.config.loud_anomalies == LoudAnomalies::Autoencoder) {
        anomalous = anomalous_kpis(bundle.autoencoder, z);
    } else {
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (std::abs(z(i)) > bundle.config.loud_z)
                anomalous.push_back(static_cast<std::size_t>(i));
    }
    NodeRanking ranking = rank(bundle, anomalous);

    LoudState next;
    bool alert = false;
    for (std::size_t i = 0; i < ranking.size(); ++i)
        for (std::size_t j = i + 1; j < ranking.size(); ++j) {
            auto key = std::minmax(ranking[i].node, ranking[j].node);
            std::pair<std::string, std::string> pair{key.first, key.second};
            auto prev = state.streaks.find(pair);
            const int streak = (prev == state.streaks.end() ? 0 : prev->second) + 1;
            next.streaks[pair] = streak;
            alert = alert || streak >= persistence;
        }

    Verdict v{snapshot.timestamp, State::Normal, {}, Source::Loud};
    if (alert) {
        v.state = State::Anomalous;
        v.ranking = std::move(ranking);
    }
    return {std::move(v), std::move(next)};
}

Verdict ensemble_step(const Verdict& energy, const Verdict& autoencoder) {
    if (energy.timestamp != autoencoder.timestamp)
        throw SchemaError("ensemble inputs have different timestamps (" + std::to_string(energy.timestamp) + " vs " +
                          std::to_string(autoencoder.timestamp) + ")");
    Verdict v{energy.timestamp, State::Normal, {}, Source::Ensemble};
    if (energy.state == State::Normal && autoencoder.state == State::Normal)
        return v;
    v.state = State::Anomalous;
    NodeRanking merged;
    std::unordered_map<std::string, std::size_t> slot;
    for (const Verdict* part : {&energy, &autoencoder}) {
        if (part->state != State::Anomalous)
            continue;
        for (const auto& entry : part->ranking) {
            auto [it, inserted] = slot.emplace(entry.node, merged.size());
            if (inserted) {
                merged.push_back(entry);
            } else {
                merged[it->second].count += entry.count;
                merged[it->second].centrality += entry.centrality;
            }
        }
    }
    sort_ranking(merged);
    if (merged.size() > 3)
        merged.resize(3);
    v.ranking = std::move(merged);
    return v;
}

Mode Mode::parse(const std::string& name, int loud_n) {
    if (name == "e")
        return {Source::Energy, 0};
    if (name == "a")
        return {Source::Autoencoder, 0};
    if (name == "ensemble")
        return {Source::Ensemble, 0};
    if (name == "loud") {
        if (loud_n < 1)
            throw UsageError("mode 'loud' requires --loud-n >= 1");
        return {Source::Loud, loud_n};
    }
    throw UsageError("unknown mode '" + name + "' (expected e, a, ensemble or loud)");
}

std::string Mode::name() const {
    if (source == Source::Loud)
        return "loud" + std::to_string(loud_n);
    return to_string(source);
}

std::vector<Verdict> run_pipeline(const PipelineBundle& bundle, const Series& series, const Mode& mode) {
    if (series.empty())
        return {};
    if (!(*series.catalog() == *bundle.catalog))
        throw SchemaError("series catalog " + series.catalog()->hash_hex() + " does not match bundle catalog " +
                          bundle.catalog->hash_hex());
    std::vector<Verdict> out;
    out.reserve(series.size());
    LoudState loud;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const Snapshot s = series.snapshot(i);
        switch (mode.source) {
        case Source::Energy: out.push_back(prevent_e_step(bundle, s)); break;
        case Source::Autoencoder: out.push_back(prevent_a_step(bundle, s)); break;
        case Source::Ensemble: out.push_back(ensemble_step(prevent_e_step(bundle, s), prevent_a_step(bundle, s))); break;
        case Source::Loud: {
            auto [v, next] = loud_step(bundle, s, loud, mode.loud_n);
            out.push_back(std::move(v));
            loud = std::move(next);
            break;
        }
        }
    }
    return out;
}

void write_verdicts(const std::vector<Verdict>& verdicts, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "timestamp,source,state,node1,count1,node2,count2,node3,count3\n";
    for (const Verdict& v : verdicts) {
        out << v.timestamp << ',' << to_string(v.source) << ',' << to_string(v.state);
        for (std::size_t r = 0; r < 3; ++r) {
            if (r < v.ranking.size())
                out << ',' << v.ranking[r].node << ',' << v.ranking[r].count;
            else
                out << ",,";
        }
        out << '\n';
    }
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open " + path.string() + " for writing");
    file << out.str();
    if (!file)
        throw IoError("write failed for " + path.string());
}

std::vector<Verdict> read_verdicts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open verdicts " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "timestamp,source,state,node1,count1,node2,count2,node3,count3")
        throw ParseError(path.string() + ":1: unexpected verdict header");
    std::vector<Verdict> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        while (f.size() < 9)
            f.emplace_back();
        auto where = [&] { return path.string() + ":" + std::to_string(lineno) + ": "; };
        if (f.size() != 9)
            throw ParseError(where() + "expected 9 fields");
        Verdict v;
        try {
            v.timestamp = std::stoll(f[0]);
        } catch (const std::exception&) {
            throw ParseError(where() + "bad timestamp");
        }
        v.source = parse_source(f[1]);
        if (f[2] == "anomalous")
            v.state = State::Anomalous;
        else if (f[2] != "normal")
            throw ParseError(where() + "bad state '" + f[2] + "'");
        for (std::size_t r = 0; r < 3; ++r) {
            const auto& node = f[3 + 2 * r];
            if (node.empty())
                break;
            try {
                v.ranking.push_back({node, static_cast<std::size_t>(std::stoull(f[4 + 2 * r])), 0.0});
            } catch (const std::exception&) {
                throw ParseError(where() + "bad count for " + node);
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace kpiguard
