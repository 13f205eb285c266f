#include "kpiguard/serialize.hpp"

#include "kpiguard/error.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace kpiguard {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_from(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto data = j.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
        throw ParseError("matrix payload has " + std::to_string(data.size()) + " values, expected " +
                         std::to_string(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void check_header(const json& j, const char* kind) {
    if (j.value("kind", "") != kind)
        throw ParseError(std::string("expected a serialized ") + kind);
    if (j.value("version", 0) != kModelFormatVersion)
        throw ParseError(std::string("unsupported ") + kind + " format version " + std::to_string(j.value("version", 0)));
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed ") + what + ": " + e.what());
    }
}

} // namespace

json to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"learning_rate", cfg.learning_rate},
            {"batch_size", cfg.batch_size},
            {"seed", cfg.seed},
            {"patience", cfg.patience}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.epochs = j.at("epochs").get<int>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.batch_size = j.at("batch_size").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.patience = j.at("patience").get<int>();
    return cfg;
}

json to_json(const AutoencoderModel& model) {
    json layers = json::array();
    for (const auto& l : model.layers)
        layers.push_back({{"activation", l.activation == Activation::Tanh ? "tanh" : "identity"},
                          {"weights", matrix_to_json(l.weights)},
                          {"bias", vector_to_json(l.bias)}});
    return {{"kind", "autoencoder"},
            {"version", kModelFormatVersion},
            {"layer_sizes", model.layer_sizes},
            {"layers", layers},
            {"error_mean", vector_to_json(model.error_mean)},
            {"error_std", vector_to_json(model.error_std)},
            {"error_sigmas", model.error_sigmas},
            {"threshold", model.threshold},
            {"config", to_json(model.config)},
            {"loss_history", model.loss_history}};
}

AutoencoderModel autoencoder_from_json(const json& j) {
    return guarded("autoencoder", [&] {
        check_header(j, "autoencoder");
        AutoencoderModel m;
        m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        for (const auto& l : j.at("layers")) {
            DenseLayer layer;
            layer.activation = l.at("activation").get<std::string>() == "tanh" ? Activation::Tanh : Activation::Identity;
            layer.weights = matrix_from_json(l.at("weights"));
            layer.bias = vector_from_json(l.at("bias"));
            m.layers.push_back(std::move(layer));
        }
        if (m.layer_sizes.size() != m.layers.size() + 1)
            throw ParseError("autoencoder layer sizes do not match its layers");
        for (std::size_t i = 0; i < m.layers.size(); ++i)
            if (m.layers[i].weights.cols() != m.layer_sizes[i] || m.layers[i].weights.rows() != m.layer_sizes[i + 1] ||
                m.layers[i].bias.size() != m.layer_sizes[i + 1])
                throw ParseError("autoencoder layer " + std::to_string(i) + " has inconsistent dimensions");
        m.error_mean = vector_from_json(j.at("error_mean"));
        m.error_std = vector_from_json(j.at("error_std"));
        m.error_sigmas = j.at("error_sigmas").get<double>();
        m.threshold = j.at("threshold").get<double>();
        m.config = train_config_from_json(j.at("config"));
        m.loss_history = j.at("loss_history").get<std::vector<double>>();
        return m;
    });
}

json to_json(const RbmModel& model) {
    return {{"kind", "rbm"},
            {"version", kModelFormatVersion},
            {"visible_bias", vector_to_json(model.visible_bias)},
            {"hidden_bias", vector_to_json(model.hidden_bias)},
            {"weights", matrix_to_json(model.weights)},
            {"energy_mean", number(model.energy_mean)},
            {"energy_std", number(model.energy_std)},
            {"threshold", number(model.threshold)},
            {"sigmas", model.sigmas},
            {"energy_form", to_string(model.energy_form)},
            {"config", to_json(model.config)},
            {"loss_history", model.loss_history}};
}

RbmModel rbm_from_json(const json& j) {
    return guarded("rbm", [&] {
        check_header(j, "rbm");
        RbmModel m;
        m.visible_bias = vector_from_json(j.at("visible_bias"));
        m.hidden_bias = vector_from_json(j.at("hidden_bias"));
        m.weights = matrix_from_json(j.at("weights"));
        if (m.weights.rows() != m.visible_bias.size() || m.weights.cols() != m.hidden_bias.size())
            throw ParseError("RBM weight matrix does not match its bias vectors");
        m.energy_mean = number_from(j.at("energy_mean"));
        m.energy_std = number_from(j.at("energy_std"));
        m.threshold = number_from(j.at("threshold"));
        m.sigmas = j.at("sigmas").get<double>();
        m.energy_form = parse_energy_form(j.at("energy_form").get<std::string>());
        m.config = train_config_from_json(j.at("config"));
        m.loss_history = j.at("loss_history").get<std::vector<double>>();
        return m;
    });
}

json to_json(const OcsvmModel& model) {
    std::vector<std::string> support;
    for (const auto& v : model.support)
        support.push_back(v.to_string());
    return {{"kind", "ocsvm"},
            {"version", kModelFormatVersion},
            {"support", support},
            {"alpha", model.alpha},
            {"multiplicity", model.multiplicity},
            {"rho", model.rho},
            {"gamma", model.gamma},
            {"nu", model.nu},
            {"n_train", model.n_train},
            {"kkt_gap", model.kkt_gap},
            {"objective", model.objective},
            {"iterations", model.iterations}};
}

OcsvmModel ocsvm_from_json(const json& j) {
    return guarded("ocsvm", [&] {
        check_header(j, "ocsvm");
        OcsvmModel m;
        for (const auto& s : j.at("support").get<std::vector<std::string>>())
            m.support.push_back(BinaryAnomalyVector::from_string(s));
        m.alpha = j.at("alpha").get<std::vector<double>>();
        m.multiplicity = j.at("multiplicity").get<std::vector<std::size_t>>();
        if (m.alpha.size() != m.support.size() || m.multiplicity.size() != m.support.size())
            throw ParseError("OCSVM coefficient arrays do not match the support vectors");
        m.rho = j.at("rho").get<double>();
        m.gamma = j.at("gamma").get<double>();
        m.nu = j.at("nu").get<double>();
        m.n_train = j.at("n_train").get<std::size_t>();
        m.kkt_gap = j.at("kkt_gap").get<double>();
        m.objective = j.at("objective").get<double>();
        m.iterations = j.at("iterations").get<std::size_t>();
        return m;
    });
}

json to_json(const NormStats& stats) {
    return {{"mean", vector_to_json(stats.mean)}, {"std", vector_to_json(stats.std)}};
}

NormStats norm_from_json(const json& j) {
    return guarded("normalizer", [&] {
        return NormStats{vector_from_json(j.at("mean")), vector_from_json(j.at("std"))};
    });
}

json to_json(const BundleConfig& cfg) {
    return {{"autoencoder", to_json(cfg.autoencoder)},
            {"rbm", to_json(cfg.rbm)},
            {"rbm_hidden", cfg.rbm_hidden},
            {"rbm_energy", to_string(cfg.rbm_energy)},
            {"ocsvm", {{"nu", cfg.ocsvm.nu}, {"gamma", cfg.ocsvm.gamma}, {"tolerance", cfg.ocsvm.tolerance},
                       {"seed", cfg.ocsvm.seed}}},
            {"granger", {{"lag", cfg.granger.lag}, {"alpha", cfg.granger.alpha}, {"ridge", cfg.granger.ridge}}},
            {"ranker", {{"damping", cfg.ranker.damping}, {"tolerance", cfg.ranker.tolerance},
                        {"max_iterations", cfg.ranker.max_iterations}, {"cap_percent", cfg.ranker.cap_percent}}},
            {"loud", {{"anomalies", cfg.loud_anomalies == LoudAnomalies::ZScore ? "zscore" : "autoencoder"},
                      {"z", cfg.loud_z}}}};
}

BundleConfig bundle_config_from_json(const json& j) {
    return guarded("bundle config", [&] {
        BundleConfig cfg;
        cfg.autoencoder = train_config_from_json(j.at("autoencoder"));
        cfg.rbm = train_config_from_json(j.at("rbm"));
        cfg.rbm_hidden = j.at("rbm_hidden").get<std::size_t>();
        cfg.rbm_energy = parse_energy_form(j.at("rbm_energy").get<std::string>());
        const auto& o = j.at("ocsvm");
        cfg.ocsvm.nu = o.at("nu").get<double>();
        cfg.ocsvm.gamma = o.at("gamma").get<double>();
        cfg.ocsvm.tolerance = o.at("tolerance").get<double>();
        cfg.ocsvm.seed = o.at("seed").get<std::uint64_t>();
        const auto& g = j.at("granger");
        cfg.granger.lag = g.at("lag").get<int>();
        cfg.granger.alpha = g.at("alpha").get<double>();
        cfg.granger.ridge = g.at("ridge").get<double>();
        const auto& r = j.at("ranker");
        cfg.ranker.damping = r.at("damping").get<double>();
        cfg.ranker.tolerance = r.at("tolerance").get<double>();
        cfg.ranker.max_iterations = r.at("max_iterations").get<int>();
        cfg.ranker.cap_percent = r.at("cap_percent").get<int>();
        const auto& l = j.at("loud");
        cfg.loud_anomalies = l.at("anomalies").get<std::string>() == "zscore" ? LoudAnomalies::ZScore
                                                                               : LoudAnomalies::Autoencoder;
        cfg.loud_z = l.at("z").get<double>();
        return cfg;
    });
}

void save_bundle(const PipelineBundle& bundle, const std::filesystem::path& dir) {
    bundle.verify();
    std::filesystem::create_directories(dir);
    std::vector<std::string> labels;
    for (const auto& k : bundle.catalog->kpis())
        labels.push_back(k.label());
    json j = {{"kind", "bundle"},
              {"version", kModelFormatVersion},
              {"catalog_hash", bundle.catalog->hash_hex()},
              {"catalog", labels},
              {"norm", to_json(bundle.norm)},
              {"autoencoder", to_json(bundle.autoencoder)},
              {"rbm", to_json(bundle.rbm)},
              {"ocsvm", to_json(bundle.ocsvm)},
              {"config", to_json(bundle.config)},
              {"graph", "baseline_graph.csv"}};
    std::ofstream out(dir / "bundle.json", std::ios::binary);
    if (!out)
        throw IoError("cannot write " + (dir / "bundle.json").string());
    out << j.dump(1) << '\n';
    if (!out)
        throw IoError("write failed for " + (dir / "bundle.json").string());
    write_graph(bundle.baseline, bundle.catalog->hash_hex(), dir / "baseline_graph.csv");
}

PipelineBundle load_bundle(const std::filesystem::path& dir) {
    std::ifstream in(dir / "bundle.json");
    if (!in)
        throw IoError("cannot open " + (dir / "bundle.json").string());
    json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError((dir / "bundle.json").string() + ": " + e.what());
    }
    PipelineBundle b;
    guarded("bundle", [&] {
        check_header(j, "bundle");
        std::vector<Kpi> kpis;
        for (const auto& label : j.at("catalog").get<std::vector<std::string>>())
            kpis.push_back(Kpi::parse(label));
        b.catalog = std::make_shared<const KpiCatalog>(std::move(kpis));
        if (b.catalog->hash_hex() != j.at("catalog_hash").get<std::string>())
            throw SchemaError("bundle catalog hash does not match its KPI list");
        b.norm = norm_from_json(j.at("norm"));
        b.autoencoder = autoencoder_from_json(j.at("autoencoder"));
        b.rbm = rbm_from_json(j.at("rbm"));
        b.ocsvm = ocsvm_from_json(j.at("ocsvm"));
        b.config = bundle_config_from_json(j.at("config"));
        return 0;
    });
    std::string graph_hash;
    b.baseline = read_graph(dir / "baseline_graph.csv", &graph_hash);
    if (graph_hash != b.catalog->hash_hex())
        throw SchemaError("baseline graph was built for catalog " + graph_hash + ", bundle uses " +
                          b.catalog->hash_hex());
    b.verify();
    return b;
}

} // namespace kpiguard
