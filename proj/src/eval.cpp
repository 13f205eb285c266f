#include "kpiguard/eval.hpp"

#include "kpiguard/error.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace kpiguard {

std::string to_string(VerdictClass c) {
    switch (c) {
    case VerdictClass::TPFull: return "tp_full";
    case VerdictClass::TPPartial: return "tp_partial";
    case VerdictClass::FalseAlarm: return "false_alarm";
    case VerdictClass::FalseNegative: return "false_negative";
    case VerdictClass::TrueNegative: return "true_negative";
    }
    return "?";
}

VerdictClass parse_verdict_class(const std::string& s) {
    for (auto c : {VerdictClass::TPFull, VerdictClass::TPPartial, VerdictClass::FalseAlarm,
                   VerdictClass::FalseNegative, VerdictClass::TrueNegative})
        if (to_string(c) == s)
            return c;
    throw ParseError("unknown verdict class '" + s + "'");
}

namespace {

void check_order(const std::vector<Verdict>& verdicts) {
    for (std::size_t i = 1; i < verdicts.size(); ++i)
        if (verdicts[i].timestamp <= verdicts[i - 1].timestamp)
            throw OrderingError("verdict timestamps must be strictly increasing");
}

} // namespace

std::vector<VerdictClass> classify_verdicts(const std::vector<Verdict>& verdicts, const GroundTruth& truth) {
    if (truth.node_a.empty() || truth.node_b.empty() || truth.crash <= truth.injection)
        throw SchemaError("ground truth must name both target nodes and have injection < crash");
    check_order(verdicts);
    std::vector<VerdictClass> out;
    out.reserve(verdicts.size());
    for (const Verdict& v : verdicts) {
        const bool alarm = v.state == State::Anomalous;
        if (v.timestamp < truth.injection) {
            out.push_back(alarm ? VerdictClass::FalseAlarm : VerdictClass::TrueNegative);
            continue;
        }
        if (!alarm) {
            out.push_back(VerdictClass::FalseNegative);
            continue;
        }
        int hits = 0;
        for (const auto& entry : v.ranking)
            hits += (entry.node == truth.node_a || entry.node == truth.node_b) ? 1 : 0;
        out.push_back(hits >= 2 ? VerdictClass::TPFull : hits == 1 ? VerdictClass::TPPartial : VerdictClass::FalseAlarm);
    }
    return out;
}

std::vector<VerdictClass> classify_normal(const std::vector<Verdict>& verdicts) {
    check_order(verdicts);
    std::vector<VerdictClass> out;
    out.reserve(verdicts.size());
    for (const Verdict& v : verdicts)
        out.push_back(v.state == State::Anomalous ? VerdictClass::FalseAlarm : VerdictClass::TrueNegative);
    return out;
}

double false_alarm_rate(const std::vector<VerdictClass>& classes) {
    std::size_t alarms = 0, negatives = 0;
    for (auto c : classes) {
        alarms += c == VerdictClass::FalseAlarm ? 1 : 0;
        negatives += c == VerdictClass::TrueNegative ? 1 : 0;
    }
    if (alarms + negatives == 0)
        throw InsufficientDataError("false alarm rate is undefined on an empty non-failing region");
    return 100.0 * static_cast<double>(alarms) / static_cast<double>(alarms + negatives);
}

Earliness earliness_metrics(const std::vector<VerdictClass>& classes, const std::vector<Verdict>& verdicts,
                            const GroundTruth& truth) {
    if (classes.size() != verdicts.size())
        throw SchemaError("class and verdict sequences differ in length");
    Earliness e;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const Timestamp t = verdicts[i].timestamp;
        if (t >= truth.injection && t < truth.crash && is_true_positive(classes[i])) {
            e.first_tp = t;
            break;
        }
    }
    if (!e.first_tp)
        return e;
    e.reaction = *e.first_tp - truth.injection;
    e.earliness = truth.crash - *e.first_tp;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const Timestamp t = verdicts[i].timestamp;
        if (t >= *e.first_tp && t < truth.crash && is_true_positive(classes[i]))
            ++tp;
    }
    e.tpr = 100.0 * static_cast<double>(tp) / static_cast<double>(e.earliness);
    return e;
}

MetricsReport evaluate(const std::vector<Verdict>& verdicts, const std::optional<GroundTruth>& truth,
                       std::string experiment, std::string source) {
    MetricsReport m;
    m.experiment = std::move(experiment);
    m.source = std::move(source);
    for (const auto& v : verdicts)
        m.timestamps.push_back(v.timestamp);

    if (!truth) {
        m.classes = classify_normal(verdicts);
        if (!m.classes.empty())
            m.far_pct = false_alarm_rate(m.classes);
        return m;
    }
    m.classes = classify_verdicts(verdicts, *truth);
    std::vector<VerdictClass> before;
    for (std::size_t i = 0; i < verdicts.size(); ++i)
        if (verdicts[i].timestamp < truth->injection)
            before.push_back(m.classes[i]);
    if (!before.empty())
        m.far_pct = false_alarm_rate(before);
    m.injection_min = truth->horizon();
    const Earliness e = earliness_metrics(m.classes, verdicts, *truth);
    m.reaction_min = e.reaction;
    m.earliness_min = e.earliness;
    m.tpr_pct = e.tpr;
    return m;
}

namespace {

template <typename T>
std::optional<double> median_of(std::vector<T> values) {
    if (values.empty())
        return std::nullopt;
    std::sort(values.begin(), values.end());
    const std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1)
        return static_cast<double>(values[mid]);
    return 0.5 * (static_cast<double>(values[mid - 1]) + static_cast<double>(values[mid]));
}

std::string field(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }
std::string field(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : "NA"; }

} // namespace

MetricsReport median_report(const std::vector<MetricsReport>& reports) {
    if (reports.empty())
        throw InsufficientDataError("median of zero reports");
    MetricsReport m;
    m.experiment = reports.front().experiment;
    m.source = reports.front().source;
    std::vector<double> far, tpr;
    std::vector<std::int64_t> inj, react, early;
    for (const auto& r : reports) {
        if (r.far_pct)
            far.push_back(*r.far_pct);
        if (r.tpr_pct)
            tpr.push_back(*r.tpr_pct);
        if (r.injection_min)
            inj.push_back(*r.injection_min);
        if (r.reaction_min)
            react.push_back(*r.reaction_min);
        early.push_back(r.earliness_min);
    }
    m.far_pct = median_of(far);
    m.tpr_pct = median_of(tpr);
    // Minute fields stay integral: the lower median.
    auto lower = [](std::vector<std::int64_t> v) -> std::optional<std::int64_t> {
        if (v.empty())
            return std::nullopt;
        std::sort(v.begin(), v.end());
        return v[(v.size() - 1) / 2];
    };
    m.injection_min = lower(inj);
    m.reaction_min = lower(react);
    m.earliness_min = lower(early).value_or(0);
    return m;
}

std::string metrics_header() { return "experiment,source,far_pct,injection_min,reaction_min,earliness_min,tpr_pct"; }

std::string metrics_row(const MetricsReport& m) {
    std::ostringstream out;
    out << m.experiment << ',' << m.source << ',' << field(m.far_pct) << ',' << field(m.injection_min) << ','
        << field(m.reaction_min) << ',' << m.earliness_min << ',' << field(m.tpr_pct);
    return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open " + path.string() + " for writing");
    file << text;
    if (!file)
        throw IoError("write failed for " + path.string());
}

std::optional<double> parse_opt_double(const std::string& s) {
    if (s == "NA")
        return std::nullopt;
    return std::stod(s);
}

std::optional<std::int64_t> parse_opt_int(const std::string& s) {
    if (s == "NA")
        return std::nullopt;
    return std::stoll(s);
}

} // namespace

void write_metrics(const std::vector<MetricsReport>& reports, const std::filesystem::path& path) {
    std::string text = metrics_header() + "\n";
    for (const auto& r : reports)
        text += metrics_row(r) + "\n";
    write_text(path, text);
}

std::vector<MetricsReport> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open metrics " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != metrics_header())
        throw ParseError(path.string() + ":1: unexpected metrics header");
    std::vector<MetricsReport> out;
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
        if (f.size() != 7)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
        MetricsReport m;
        try {
            m.experiment = f[0];
            m.source = f[1];
            m.far_pct = parse_opt_double(f[2]);
            m.injection_min = parse_opt_int(f[3]);
            m.reaction_min = parse_opt_int(f[4]);
            m.earliness_min = std::stoll(f[5]);
            m.tpr_pct = parse_opt_double(f[6]);
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed metric value");
        }
        out.push_back(std::move(m));
    }
    return out;
}

void report(const MetricsReport& metrics, const std::filesystem::path& summary, const std::filesystem::path& trace) {
    write_text(summary, metrics_header() + "\n" + metrics_row(metrics) + "\n");
    std::ostringstream out;
    out << "timestamp,class\n";
    for (std::size_t i = 0; i < metrics.classes.size(); ++i)
        out << metrics.timestamps[i] << ',' << to_string(metrics.classes[i]) << '\n';
    write_text(trace, out.str());
}

std::vector<std::pair<Timestamp, VerdictClass>> read_trace(const std::filesystem::path& trace) {
    std::ifstream in(trace);
    if (!in)
        throw IoError("cannot open trace " + trace.string());
    std::string line;
    if (!std::getline(in, line) || line != "timestamp,class")
        throw ParseError(trace.string() + ":1: unexpected trace header");
    std::vector<std::pair<Timestamp, VerdictClass>> out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError(trace.string() + ": malformed trace row '" + line + "'");
        out.emplace_back(std::stoll(line.substr(0, comma)), parse_verdict_class(line.substr(comma + 1)));
    }
    return out;
}

} // namespace kpiguard
