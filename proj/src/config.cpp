#include "kpiguard/config.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace kpiguard {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

template <typename T>
T parse_number(const std::string& field, const std::string& text) {
    T value{};
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw UsageError(field + ": '" + text + "' is not a valid number");
    return value;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items)
        out += (out.empty() ? "" : ",") + s;
    return out;
}

template <typename T>
std::string num(T v) {
    if constexpr (std::is_floating_point_v<T>)
        return format_double(v);
    else
        return std::to_string(v);
}

struct Field {
    std::string path;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T, typename Access>
Field number_field(std::string path, Access access) {
    return {path,
            [path, access](ExperimentConfig& c, const std::string& v) { access(c) = parse_number<T>(path, v); },
            [access](const ExperimentConfig& c) { return num(access(const_cast<ExperimentConfig&>(c))); }};
}

template <typename Access>
void train_fields(std::vector<Field>& out, const std::string& section, Access access) {
    out.push_back(number_field<int>(section + ".epochs", [access](ExperimentConfig& c) -> int& { return access(c).epochs; }));
    out.push_back(number_field<double>(section + ".learning_rate",
                                       [access](ExperimentConfig& c) -> double& { return access(c).learning_rate; }));
    out.push_back(
        number_field<int>(section + ".batch_size", [access](ExperimentConfig& c) -> int& { return access(c).batch_size; }));
    out.push_back(
        number_field<int>(section + ".patience", [access](ExperimentConfig& c) -> int& { return access(c).patience; }));
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(number_field<std::uint64_t>("experiment.seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));
        f.push_back({"experiment.modes",
                     [](ExperimentConfig& c, const std::string& v) { c.modes = split_list(v); },
                     [](const ExperimentConfig& c) { return join(c.modes); }});
        f.push_back({"experiment.loud_n",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.loud_n.clear();
                         for (const auto& item : split_list(v))
                             c.loud_n.push_back(parse_number<int>("experiment.loud_n", item));
                     },
                     [](const ExperimentConfig& c) {
                         std::vector<std::string> s;
                         for (int n : c.loud_n)
                             s.push_back(std::to_string(n));
                         return join(s);
                     }});

        auto sim = [](ExperimentConfig& c) -> SimulationConfig& { return c.simulation; };
        f.push_back(number_field<std::size_t>("cluster.pairs", [sim](ExperimentConfig& c) -> std::size_t& { return sim(c).pairs; }));
        f.push_back(number_field<std::size_t>("cluster.metrics", [sim](ExperimentConfig& c) -> std::size_t& { return sim(c).metrics; }));
        f.push_back(number_field<std::int64_t>("simulation.train_minutes",
                                               [sim](ExperimentConfig& c) -> std::int64_t& { return sim(c).train_minutes; }));
        f.push_back(number_field<std::int64_t>("simulation.holdout_minutes",
                                               [sim](ExperimentConfig& c) -> std::int64_t& { return sim(c).holdout_minutes; }));
        f.push_back(number_field<std::int64_t>("simulation.min_horizon",
                                               [sim](ExperimentConfig& c) -> std::int64_t& { return sim(c).min_horizon; }));
        f.push_back(number_field<double>("simulation.tail_factor",
                                         [sim](ExperimentConfig& c) -> double& { return sim(c).tail_factor; }));
        f.push_back(number_field<double>("simulation.split", [sim](ExperimentConfig& c) -> double& { return sim(c).split; }));
        f.push_back(number_field<std::size_t>("simulation.replications",
                                              [sim](ExperimentConfig& c) -> std::size_t& { return sim(c).replications; }));
        f.push_back({"simulation.kinds",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.simulation.kinds.clear();
                         for (const auto& item : split_list(v)) {
                             try {
                                 c.simulation.kinds.push_back(parse_fault_kind(item));
                             } catch (const Error& e) {
                                 throw UsageError(std::string("simulation.kinds: ") + e.what());
                             }
                         }
                     },
                     [](const ExperimentConfig& c) {
                         std::vector<std::string> s;
                         for (auto k : c.simulation.kinds)
                             s.push_back(to_string(k));
                         return join(s);
                     }});
        f.push_back({"simulation.patterns",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.simulation.patterns.clear();
                         for (const auto& item : split_list(v)) {
                             try {
                                 c.simulation.patterns.push_back(parse_pattern(item));
                             } catch (const Error& e) {
                                 throw UsageError(std::string("simulation.patterns: ") + e.what());
                             }
                         }
                     },
                     [](const ExperimentConfig& c) {
                         std::vector<std::string> s;
                         for (auto p : c.simulation.patterns)
                             s.push_back(to_string(p));
                         return join(s);
                     }});

        train_fields(f, "autoencoder", [](ExperimentConfig& c) -> TrainConfig& { return c.bundle.autoencoder; });
        train_fields(f, "rbm", [](ExperimentConfig& c) -> TrainConfig& { return c.bundle.rbm; });
        f.push_back(number_field<std::size_t>("rbm.hidden", [](ExperimentConfig& c) -> std::size_t& { return c.bundle.rbm_hidden; }));
        f.push_back({"rbm.energy",
                     [](ExperimentConfig& c, const std::string& v) {
                         try {
                             c.bundle.rbm_energy = parse_energy_form(v);
                         } catch (const Error& e) {
                             throw UsageError(std::string("rbm.energy: ") + e.what());
                         }
                     },
                     [](const ExperimentConfig& c) { return to_string(c.bundle.rbm_energy); }});
        f.push_back(number_field<double>("ocsvm.nu", [](ExperimentConfig& c) -> double& { return c.bundle.ocsvm.nu; }));
        f.push_back(number_field<double>("ocsvm.gamma", [](ExperimentConfig& c) -> double& { return c.bundle.ocsvm.gamma; }));
        f.push_back(number_field<double>("ocsvm.tolerance", [](ExperimentConfig& c) -> double& { return c.bundle.ocsvm.tolerance; }));
        f.push_back(number_field<int>("granger.lag", [](ExperimentConfig& c) -> int& { return c.bundle.granger.lag; }));
        f.push_back(number_field<double>("granger.alpha", [](ExperimentConfig& c) -> double& { return c.bundle.granger.alpha; }));
        f.push_back(number_field<double>("ranker.damping", [](ExperimentConfig& c) -> double& { return c.bundle.ranker.damping; }));
        f.push_back(number_field<int>("ranker.cap_percent", [](ExperimentConfig& c) -> int& { return c.bundle.ranker.cap_percent; }));
        f.push_back({"loud.anomalies",
                     [](ExperimentConfig& c, const std::string& v) {
                         if (v == "zscore")
                             c.bundle.loud_anomalies = LoudAnomalies::ZScore;
                         else if (v == "autoencoder")
                             c.bundle.loud_anomalies = LoudAnomalies::Autoencoder;
                         else
                             throw UsageError("loud.anomalies: expected zscore or autoencoder, got '" + v + "'");
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.bundle.loud_anomalies == LoudAnomalies::ZScore ? "zscore" : "autoencoder");
                     }});
        f.push_back(number_field<double>("loud.z", [](ExperimentConfig& c) -> double& { return c.bundle.loud_z; }));
        return f;
    }();
    return table;
}

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok)
        throw UsageError(field + ": " + what);
}

template <typename F>
void nested(const std::string& section, F&& check) {
    try {
        check();
    } catch (const UsageError& e) {
        throw UsageError(section + ": " + e.what());
    }
}

} // namespace

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream, std::uint64_t index) {
    return derive_seed(derive_seed(seed, static_cast<std::uint64_t>(stream)), index);
}

void ExperimentConfig::validate() const {
    const auto& s = simulation;
    require(s.pairs >= 1, "cluster.pairs", "must be >= 1");
    require(s.metrics >= 2, "cluster.metrics", "must be >= 2");
    require(s.pairs * 2 * s.metrics >= 4, "cluster.metrics", "the catalog needs at least 4 KPIs");
    require(s.train_minutes >= 40, "simulation.train_minutes", "must be >= 40");
    require(s.holdout_minutes >= 1, "simulation.holdout_minutes", "must be >= 1");
    require(s.min_horizon >= 1, "simulation.min_horizon", "must be >= 1");
    require(s.tail_factor >= 1.0, "simulation.tail_factor", "must be >= 1");
    require(s.split > 0.0 && s.split < 1.0, "simulation.split", "must lie in (0, 1)");
    require(s.replications >= 1, "simulation.replications", "must be >= 1");
    require(!s.kinds.empty(), "simulation.kinds", "must name at least one fault kind");
    require(!s.patterns.empty(), "simulation.patterns", "must name at least one pattern");
    require(!modes.empty(), "experiment.modes", "must name at least one mode");
    for (int n : loud_n)
        require(n >= 1, "experiment.loud_n", "every N must be >= 1");
    require(!loud_n.empty() || std::find(modes.begin(), modes.end(), "loud") == modes.end(), "experiment.loud_n",
            "loud mode needs at least one N");
    for (const auto& m : modes) {
        try {
            Mode::parse(m, loud_n.empty() ? 0 : loud_n.front());
        } catch (const Error& e) {
            throw UsageError(std::string("experiment.modes: ") + e.what());
        }
    }
    nested("autoencoder", [&] { bundle.autoencoder.validate(1); });
    nested("rbm", [&] { bundle.rbm.validate(0); });
    require(bundle.ocsvm.nu > 0.0 && bundle.ocsvm.nu <= 1.0, "ocsvm.nu", "must lie in (0, 1]");
    require(bundle.ocsvm.gamma >= 0.0, "ocsvm.gamma", "must be >= 0 (0 selects 1/n)");
    require(bundle.ocsvm.tolerance > 0.0, "ocsvm.tolerance", "must be positive");
    nested("granger", [&] { bundle.granger.validate(); });
    require(bundle.ranker.damping > 0.0 && bundle.ranker.damping < 1.0, "ranker.damping", "must lie in (0, 1)");
    require(bundle.ranker.cap_percent >= 1 && bundle.ranker.cap_percent <= 100, "ranker.cap_percent",
            "must lie in [1, 100]");
    require(bundle.loud_z > 0.0, "loud.z", "must be positive");
}

ClusterSpec ExperimentConfig::cluster() const {
    return ClusterSpec::make(simulation.pairs, simulation.metrics, stream_seed(seed, SeedStream::Cluster));
}

BundleConfig ExperimentConfig::seeded_bundle() const {
    BundleConfig b = bundle;
    b.autoencoder.seed = stream_seed(seed, SeedStream::Autoencoder);
    b.rbm.seed = stream_seed(seed, SeedStream::Rbm);
    b.ocsvm.seed = stream_seed(seed, SeedStream::Ocsvm);
    return b;
}

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = origin + ":" + std::to_string(lineno) + ": ";
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw UsageError(where + "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(where + "expected key = value");
        if (section.empty())
            throw UsageError(where + "key outside of any section");
        const std::string path = section + "." + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto& table = fields();
        const auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return f.path == path; });
        if (it == table.end())
            throw UsageError(where + "unknown field " + path);
        if (!seen.insert(path).second)
            throw UsageError(where + "duplicate field " + path);
        try {
            it->set(cfg, value);
        } catch (const UsageError& e) {
            throw UsageError(where + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string format_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        const auto dot = f.path.find('.');
        const std::string s = f.path.substr(0, dot);
        if (s != section) {
            out << (section.empty() ? "" : "\n") << '[' << s << "]\n";
            section = s;
        }
        out << f.path.substr(dot + 1) << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

} // namespace kpiguard
