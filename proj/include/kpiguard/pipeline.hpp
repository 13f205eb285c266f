#pragma once

#include "kpiguard/autoencoder.hpp"
#include "kpiguard/causality.hpp"
#include "kpiguard/ocsvm.hpp"
#include "kpiguard/ranker.hpp"
#include "kpiguard/rbm.hpp"
#include "kpiguard/telemetry.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace kpiguard {

enum class Source { Energy, Autoencoder, Loud, Ensemble };

std::string to_string(Source s);
Source parse_source(const std::string& s);
std::string to_string(State s);

/// Per-timestamp decision with suspect nodes; ranking is empty for Normal.
struct Verdict {
    Timestamp timestamp = 0;
    State state = State::Normal;
    NodeRanking ranking;
    Source source = Source::Autoencoder;
};

/// Where the LOUD baseline takes its per-timestamp anomalous KPIs from.
enum class LoudAnomalies {
    Autoencoder, ///< the same per-KPI reconstruction-error set the state classifiers use
    ZScore,      ///< univariate |z| above loud_z on the normalized input
};

struct BundleConfig {
    TrainConfig autoencoder;
    TrainConfig rbm{.epochs = 10, .learning_rate = 1e-3, .batch_size = 32, .seed = 2, .patience = 0};
    std::size_t rbm_hidden = 0;
    EnergyForm rbm_energy = EnergyForm::Gaussian;
    OcsvmConfig ocsvm;
    GrangerConfig granger;
    RankerConfig ranker;
    LoudAnomalies loud_anomalies = LoudAnomalies::Autoencoder;
    double loud_z = 3.0;
    unsigned threads = 0;
};

struct PipelineBundle {
    CatalogPtr catalog;
    NormStats norm;
    AutoencoderModel autoencoder;
    RbmModel rbm;
    OcsvmModel ocsvm;
    CausalityGraph baseline;
    BundleConfig config;

    /// Throws SchemaError unless every model matches the catalog width.
    void verify() const;
};

/// Trains every model from normal data split at `boundary`.
PipelineBundle train_bundle(const Series& normal, Timestamp boundary, const BundleConfig& cfg);

/// Steps take raw (un-normalized) snapshots; the bundle normalizes internally.
Verdict prevent_a_step(const PipelineBundle& bundle, const Snapshot& snapshot);
Verdict prevent_e_step(const PipelineBundle& bundle, const Snapshot& snapshot);

/// Streak length per unordered node pair currently in the LOUD top three.
struct LoudState {
    std::map<std::pair<std::string, std::string>, int> streaks;
};

std::pair<Verdict, LoudState> loud_step(const PipelineBundle& bundle, const Snapshot& snapshot, const LoudState& state,
                                        int persistence);

/// Union of two verdicts for the same timestamp; rankings merged by node.
Verdict ensemble_step(const Verdict& energy, const Verdict& autoencoder);

struct Mode {
    Source source = Source::Autoencoder;
    int loud_n = 3;

    static Mode parse(const std::string& name, int loud_n = 0);
    std::string name() const;
};

std::vector<Verdict> run_pipeline(const PipelineBundle& bundle, const Series& series, const Mode& mode);

/// Verdict stream CSV: timestamp,source,state,node1,count1,node2,count2,node3,count3
void write_verdicts(const std::vector<Verdict>& verdicts, const std::filesystem::path& path);
std::vector<Verdict> read_verdicts(const std::filesystem::path& path);

} // namespace kpiguard
