#include "kpiguard/simulator.hpp"

#include "kpiguard/error.hpp"
#include "kpiguard/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace kpiguard {

namespace {

constexpr double kMemoryTotalMb = 8192.0;
constexpr double kCrashSlack = 1e-12;

/// Stationary AR(1) process with marginal standard deviation `sigma`.
class Ar1 {
public:
    Ar1(double phi, double sigma, Rng& rng) : phi_(phi), sigma_(sigma), state_(rng.normal(0.0, sigma)) {}
    double next(Rng& rng) {
        state_ = phi_ * state_ + sigma_ * std::sqrt(1.0 - phi_ * phi_) * rng.normal();
        return state_;
    }

private:
    double phi_;
    double sigma_;
    double state_;
};

double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double circular_bump(double hour, double centre, double width) {
    double d = std::abs(hour - centre);
    d = std::min(d, 24.0 - d);
    return std::exp(-0.5 * d * d / (width * width));
}

/// Relative traffic surge on one master/replica pair (hot keys on its shard): smooth episodes
/// of 20-90 minutes, on average two hours apart, each adding 15-40 % to the pair's load.
std::vector<double> hot_shard_gain(std::size_t minutes, std::uint64_t seed) {
    constexpr double kMeanGap = 120.0;
    std::vector<double> gain(minutes, 0.0);
    Rng rng(seed);
    double t = -kMeanGap * std::log1p(-rng.uniform());
    while (t < static_cast<double>(minutes)) {
        const double duration = rng.uniform(20.0, 90.0);
        const double peak = rng.uniform(0.15, 0.4);
        const auto begin = static_cast<std::size_t>(t);
        for (std::size_t k = begin; k < minutes && static_cast<double>(k) < t + duration; ++k) {
            const double phase = (static_cast<double>(k) - t) / duration;
            const double envelope = std::sin(std::numbers::pi * phase);
            gain[k] += peak * envelope * envelope;
        }
        t += duration - kMeanGap * std::log1p(-rng.uniform());
    }
    return gain;
}

} // namespace

void ClusterSpec::validate() const {
    if (pairs.empty())
        throw UsageError("cluster needs at least one master/slave pair");
    if (metrics.size() < 2)
        throw UsageError("cluster needs at least two metrics per node");
    std::set<std::string> ids;
    for (const auto& [m, s] : pairs) {
        if (m.empty() || s.empty())
            throw UsageError("empty node id in cluster spec");
        if (!ids.insert(m).second || !ids.insert(s).second)
            throw UsageError("duplicate node id in cluster spec");
    }
    std::set<std::string> names(metrics.begin(), metrics.end());
    if (names.size() != metrics.size())
        throw UsageError("duplicate metric name in cluster spec");
}

std::vector<std::string> ClusterSpec::nodes() const {
    std::vector<std::string> out;
    for (const auto& [m, s] : pairs) {
        out.push_back(m);
        out.push_back(s);
    }
    return out;
}

std::vector<std::string> ClusterSpec::default_metrics() {
    return {"cpu.user",        "cpu.system",      "cpu.idle",          "memory.used",
            "memory.free",     "net.in.packets",  "net.out.packets",   "net.in.dropped",
            "net.out.dropped", "load.avg1",       "sockets.established", "procs.running"};
}

ClusterSpec ClusterSpec::make(std::size_t pairs, std::size_t metric_count, std::uint64_t seed) {
    ClusterSpec spec;
    spec.seed = seed;
    for (std::size_t i = 1; i <= pairs; ++i)
        spec.pairs.emplace_back("master" + std::to_string(i), "slave" + std::to_string(i));
    auto base = default_metrics();
    for (std::size_t k = 0; k < metric_count; ++k)
        spec.metrics.push_back(k < base.size() ? base[k] : "aux.kpi" + std::to_string(k - base.size() + 1));
    return spec;
}

std::string to_string(FaultKind k) {
    switch (k) {
    case FaultKind::MemoryLeak: return "memory_leak";
    case FaultKind::PacketLoss: return "packet_loss";
    case FaultKind::CpuHog: return "cpu_hog";
    }
    return "?";
}

std::string to_string(Pattern p) {
    switch (p) {
    case Pattern::Linear: return "linear";
    case Pattern::Exponential: return "exponential";
    case Pattern::Random: return "random";
    }
    return "?";
}

FaultKind parse_fault_kind(const std::string& s) {
    if (s == "memory_leak")
        return FaultKind::MemoryLeak;
    if (s == "packet_loss")
        return FaultKind::PacketLoss;
    if (s == "cpu_hog")
        return FaultKind::CpuHog;
    throw ParseError("unknown fault kind '" + s + "'");
}

Pattern parse_pattern(const std::string& s) {
    if (s == "linear")
        return Pattern::Linear;
    if (s == "exponential")
        return Pattern::Exponential;
    if (s == "random")
        return Pattern::Random;
    throw ParseError("unknown failure pattern '" + s + "'");
}

void FaultSpec::validate() const {
    if (start < 0)
        throw UsageError("fault start must be >= 0");
    if (!(base > 0.0) || !std::isfinite(base))
        throw UsageError("fault base increment must be > 0");
    if (!(capacity > 0.0) || !std::isfinite(capacity))
        throw UsageError("fault capacity must be > 0");
}

std::vector<double> gen_workload(std::size_t minutes, std::uint64_t seed, std::int64_t start_minute) {
    Rng rng(derive_seed(seed, 0x776f726bULL));
    Ar1 noise(0.8, 0.03, rng);
    std::vector<double> out(minutes);
    for (std::size_t i = 0; i < minutes; ++i) {
        const std::int64_t t = start_minute + static_cast<std::int64_t>(i);
        const std::int64_t minute_of_week = ((t % 10080) + 10080) % 10080;
        const bool weekend = minute_of_week / 1440 >= 5;
        const double hour = static_cast<double>(minute_of_week % 1440) / 60.0;
        const double peak = weekend ? 26.0 : 40.0;
        const double shape = 0.08 + 0.80 * circular_bump(hour, 9.0, 1.6) + 0.85 * circular_bump(hour, 19.0, 2.0) +
                             0.25 * circular_bump(hour, 14.0, 3.0);
        out[i] = clip(peak * (std::min(shape, 0.92) + noise.next(rng)), 0.0, peak);
    }
    return out;
}

Series gen_normal_telemetry(const ClusterSpec& spec, const std::vector<double>& workload, std::uint64_t seed) {
    spec.validate();
    if (workload.empty())
        throw UsageError("workload must be non-empty");

    const auto nodes = spec.nodes();
    const std::size_t m = spec.metrics.size();
    std::vector<Kpi> kpis;
    for (const auto& node : nodes)
        for (const auto& metric : spec.metrics)
            kpis.push_back({metric, node});
    auto catalog = std::make_shared<const KpiCatalog>(std::move(kpis));

    const std::size_t T = workload.size();
    std::vector<std::vector<double>> hot;
    hot.reserve(spec.pairs.size());
    for (std::size_t p = 0; p < spec.pairs.size(); ++p)
        hot.push_back(hot_shard_gain(T, derive_seed(seed, 500 + p)));

    RowMatrix values(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(nodes.size() * m));
    for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
        // Static node characteristics belong to the cluster; only the noise depends on the trace seed.
        Rng shape(derive_seed(spec.seed, 1000 + ni));
        Rng rng(derive_seed(seed, 1000 + ni));
        const bool master = ni % 2 == 0;
        const double share = master ? shape.uniform(0.8, 1.2) : shape.uniform(0.3, 0.45);

        Ar1 node_noise(0.9, 0.05, rng);
        Ar1 user(0.7, 1.5, rng), system(0.7, 0.6, rng), idle(0.5, 0.3, rng);
        Ar1 mem(0.98, 3.0, rng), mem_free(0.5, 1.0, rng);
        Ar1 in_pk(0.6, 25.0, rng), out_pk(0.6, 25.0, rng), in_drop(0.6, 0.3, rng), out_drop(0.6, 0.3, rng);
        Ar1 load_noise(0.5, 0.05, rng), sock(0.7, 2.0, rng), procs(0.6, 0.4, rng);

        struct Generic {
            double offset, gain;
            Ar1 noise;
        };
        std::vector<Generic> generic;
        for (std::size_t k = 0; k < m; ++k) {
            const double offset = shape.uniform(5.0, 50.0);
            const double gain = shape.uniform(0.2, 2.0);
            const double sigma = shape.uniform(0.5, 3.0);
            generic.push_back({offset, gain, Ar1(0.7, sigma, rng)});
        }

        double prev_w = workload[0] * share;
        double prev_cpu = 4.0 + 2.1 * prev_w;
        double load = prev_cpu / 20.0;
        for (std::size_t t = 0; t < T; ++t) {
            const double w = workload[t] * share * (1.0 + hot[ni / 2][t]) * (1.0 + node_noise.next(rng));
            const double cpu_user = clip(4.0 + 1.6 * w + user.next(rng), 0.0, 100.0);
            const double cpu_system = clip(1.5 + 0.5 * w + system.next(rng), 0.0, 100.0 - cpu_user);
            const double cpu_idle = clip(100.0 - cpu_user - cpu_system + idle.next(rng), 0.0, 100.0);
            const double mem_used = clip(1500.0 + 12.0 * w + mem.next(rng), 0.0, kMemoryTotalMb);
            load = 0.7 * load + 0.3 * prev_cpu / 20.0 + load_noise.next(rng);
            load = std::max(load, 0.0);

            for (std::size_t k = 0; k < m; ++k) {
                const std::string& name = spec.metrics[k];
                double v;
                if (name == "cpu.user")
                    v = cpu_user;
                else if (name == "cpu.system")
                    v = cpu_system;
                else if (name == "cpu.idle")
                    v = cpu_idle;
                else if (name == "memory.used")
                    v = mem_used;
                else if (name == "memory.free")
                    v = clip(kMemoryTotalMb - mem_used + mem_free.next(rng), 0.0, kMemoryTotalMb);
                else if (name == "net.in.packets")
                    v = std::max(0.0, 60.0 * w + in_pk.next(rng));
                else if (name == "net.out.packets")
                    v = std::max(0.0, 55.0 * w + out_pk.next(rng));
                else if (name == "net.in.dropped")
                    v = std::max(0.0, 0.5 + in_drop.next(rng));
                else if (name == "net.out.dropped")
                    v = std::max(0.0, 0.5 + out_drop.next(rng));
                else if (name == "load.avg1")
                    v = load;
                else if (name == "sockets.established")
                    v = std::max(0.0, 30.0 + 2.5 * prev_w + sock.next(rng));
                else if (name == "procs.running")
                    v = std::max(0.0, 2.0 + 0.12 * w + 0.5 * load + procs.next(rng));
                else
                    v = std::max(0.0, generic[k].offset + generic[k].gain * w + generic[k].noise.next(rng));
                values(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ni * m + k)) = v;
            }
            prev_w = w;
            prev_cpu = cpu_user + cpu_system;
        }
    }

    std::vector<Timestamp> ts(T);
    for (std::size_t t = 0; t < T; ++t)
        ts[t] = static_cast<Timestamp>(t);
    return Series(std::move(catalog), std::move(ts), std::move(values));
}

namespace {

/// Counts successes of the per-minute coin flips of the random pattern.
class RandomSteps {
public:
    explicit RandomSteps(std::uint64_t seed) : rng_(seed) {}
    std::int64_t heads_through(std::int64_t k) {
        while (done_ < k) {
            heads_ += rng_.bernoulli(0.5) ? 1 : 0;
            ++done_;
        }
        return heads_;
    }

private:
    Rng rng_;
    std::int64_t done_ = 0;
    std::int64_t heads_ = 0;
};

double intensity_at(Pattern pattern, double base, std::int64_t k, RandomSteps& steps) {
    if (k <= 0)
        return 0.0;
    switch (pattern) {
    case Pattern::Linear: return base * static_cast<double>(k);
    case Pattern::Exponential: return base * (std::exp2(static_cast<double>(k)) - 1.0);
    case Pattern::Random: return base * static_cast<double>(steps.heads_through(k));
    }
    return 0.0;
}

} // namespace

double escalation(Pattern pattern, double base, std::int64_t minutes, std::uint64_t seed) {
    if (minutes < 0)
        throw UsageError("escalation minutes must be >= 0");
    RandomSteps steps(seed);
    return intensity_at(pattern, base, minutes, steps);
}

double default_capacity(FaultKind kind) {
    switch (kind) {
    case FaultKind::MemoryLeak: return 2048.0; // MB
    case FaultKind::PacketLoss: return 60.0;   // % of packets dropped
    case FaultKind::CpuHog: return 80.0;       // % of CPU stolen
    }
    return 1.0;
}

FaultSpec fault_for_horizon(FaultKind kind, Pattern pattern, std::size_t pair, Timestamp start, std::int64_t horizon,
                            std::uint64_t seed) {
    if (horizon < 1)
        throw UsageError("fault horizon must be >= 1 minute");
    FaultSpec f;
    f.kind = kind;
    f.pattern = pattern;
    f.pair = pair;
    f.start = start;
    f.capacity = default_capacity(kind);
    f.seed = seed;
    const double h = static_cast<double>(horizon);
    switch (pattern) {
    case Pattern::Linear: f.base = f.capacity / h; break;
    case Pattern::Exponential: f.base = f.capacity / (std::exp2(h) - 1.0); break;
    case Pattern::Random: f.base = 2.0 * f.capacity / h; break;
    }
    return f;
}

std::pair<Series, GroundTruth> inject_fault(const Series& normal, const ClusterSpec& spec, const FaultSpec& fault) {
    spec.validate();
    fault.validate();
    if (fault.pair >= spec.pairs.size())
        throw UsageError("fault targets pair " + std::to_string(fault.pair) + " but the cluster has " +
                         std::to_string(spec.pairs.size()));
    if (normal.empty() || fault.start < normal.timestamps().front() || fault.start > normal.timestamps().back())
        throw RangeError("fault start " + std::to_string(fault.start) + " lies outside the trace");

    GroundTruth truth;
    truth.injection = fault.start;
    truth.node_a = spec.pairs[fault.pair].first;
    truth.node_b = spec.pairs[fault.pair].second;
    truth.kind = fault.kind;
    truth.pattern = fault.pattern;

    const Timestamp last = normal.timestamps().back();
    RandomSteps steps(fault.seed);
    std::vector<double> intensity;
    Timestamp crash = -1;
    for (Timestamp t = fault.start; t <= last; ++t) {
        const double level = intensity_at(fault.pattern, fault.base, t - fault.start, steps);
        if (level >= fault.capacity * (1.0 - kCrashSlack)) {
            crash = t;
            break;
        }
        intensity.push_back(level);
    }
    if (crash < 0)
        throw RangeError("fault never reaches capacity before t=" + std::to_string(last) + "; extend the trace");
    truth.crash = crash;

    const auto cut = static_cast<std::size_t>(
        std::lower_bound(normal.timestamps().begin(), normal.timestamps().end(), crash) - normal.timestamps().begin());
    RowMatrix values = normal.values().topRows(static_cast<Eigen::Index>(cut));
    const KpiCatalog& catalog = *normal.catalog();

    for (const std::string& node : {truth.node_a, truth.node_b}) {
        auto col = [&](const char* metric) -> Eigen::Index {
            auto idx = catalog.index_of({metric, node});
            return idx ? static_cast<Eigen::Index>(*idx) : -1;
        };
        const auto user = col("cpu.user"), system = col("cpu.system"), idle = col("cpu.idle");
        const auto used = col("memory.used"), free = col("memory.free");
        const auto in_pk = col("net.in.packets"), out_pk = col("net.out.packets");
        const auto in_drop = col("net.in.dropped"), out_drop = col("net.out.dropped");
        const auto load = col("load.avg1"), sockets = col("sockets.established"), procs = col("procs.running");

        for (std::size_t r = 0; r < cut; ++r) {
            const Timestamp t = normal.timestamp(r);
            if (t < fault.start)
                continue;
            const double level = intensity[static_cast<std::size_t>(t - fault.start)];
            const double frac = level / fault.capacity;
            auto row = values.row(static_cast<Eigen::Index>(r));
            auto add = [&](Eigen::Index c, double delta, double lo, double hi) {
                if (c >= 0)
                    row(c) = clip(row(c) + delta, lo, hi);
            };
            switch (fault.kind) {
            case FaultKind::MemoryLeak:
                add(used, level, 0.0, kMemoryTotalMb);
                add(free, -level, 0.0, kMemoryTotalMb);
                add(system, 4.0 * frac, 0.0, 100.0);
                add(load, 1.5 * frac, 0.0, 1e9);
                break;
            case FaultKind::PacketLoss: {
                const double in_base = in_pk >= 0 ? row(in_pk) : 0.0;
                const double out_base = out_pk >= 0 ? row(out_pk) : 0.0;
                add(in_drop, in_base * level / 100.0, 0.0, 1e12);
                add(out_drop, 0.8 * out_base * level / 100.0, 0.0, 1e12);
                add(in_pk, -in_base * level / 100.0, 0.0, 1e12);
                add(out_pk, -0.5 * out_base * level / 100.0, 0.0, 1e12);
                add(sockets, 0.6 * level, 0.0, 1e9);
                add(load, 0.02 * level, 0.0, 1e9);
                break;
            }
            case FaultKind::CpuHog: {
                const double sys = system >= 0 ? row(system) : 0.0;
                add(user, level, 0.0, 100.0 - sys);
                if (idle >= 0)
                    row(idle) = clip(100.0 - (user >= 0 ? row(user) : level) - sys, 0.0, 100.0);
                add(load, level / 20.0, 0.0, 1e9);
                add(procs, level / 25.0, 0.0, 1e9);
                break;
            }
            }
        }
    }

    std::vector<Timestamp> ts(normal.timestamps().begin(), normal.timestamps().begin() + static_cast<std::ptrdiff_t>(cut));
    return {Series(normal.catalog(), std::move(ts), std::move(values)), truth};
}

std::vector<FaultScenario> reference_fault_matrix() {
    return {
        {"MemL-Lin", FaultKind::MemoryLeak, Pattern::Linear, 51, 187},
        {"MemL-Exp", FaultKind::MemoryLeak, Pattern::Exponential, 51, 34},
        {"MemL-Rnd", FaultKind::MemoryLeak, Pattern::Random, 51, 40},
        {"PacL-Lin", FaultKind::PacketLoss, Pattern::Linear, 16, 73},
        {"PacL-Exp", FaultKind::PacketLoss, Pattern::Exponential, 16, 14},
        {"PacL-Rnd", FaultKind::PacketLoss, Pattern::Random, 16, 75},
        {"CPUH-Lin", FaultKind::CpuHog, Pattern::Linear, 19, 97},
        {"CPUH-Exp", FaultKind::CpuHog, Pattern::Exponential, 19, 15},
        {"CPUH-Rnd", FaultKind::CpuHog, Pattern::Random, 19, 41},
    };
}

void write_manifest(const std::vector<GroundTruth>& truths, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "injection_ts,crash_ts,node_a,node_b,kind,pattern\n";
    for (const auto& g : truths)
        out << g.injection << ',' << g.crash << ',' << g.node_a << ',' << g.node_b << ',' << to_string(g.kind) << ','
            << to_string(g.pattern) << '\n';
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open " + path.string() + " for writing");
    file << out.str();
    if (!file)
        throw IoError("write failed for " + path.string());
}

std::vector<GroundTruth> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open manifest " + path.string());
    std::vector<GroundTruth> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.rfind("injection_ts", 0) == 0)
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 6)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 6 fields");
        GroundTruth g;
        try {
            g.injection = std::stoll(f[0]);
            g.crash = std::stoll(f[1]);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad timestamp");
        }
        g.node_a = f[2];
        g.node_b = f[3];
        g.kind = parse_fault_kind(f[4]);
        g.pattern = parse_pattern(f[5]);
        if (g.injection >= g.crash)
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": injection must precede crash");
        out.push_back(std::move(g));
    }
    return out;
}

} // namespace kpiguard
