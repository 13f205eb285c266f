#pragma once

#include "kpiguard/pipeline.hpp"
#include "kpiguard/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kpiguard {

enum class VerdictClass { TPFull, TPPartial, FalseAlarm, FalseNegative, TrueNegative };

std::string to_string(VerdictClass c);
VerdictClass parse_verdict_class(const std::string& s);
inline bool is_true_positive(VerdictClass c) { return c == VerdictClass::TPFull || c == VerdictClass::TPPartial; }

/// Labels each verdict against a failing-trace ground truth.
std::vector<VerdictClass> classify_verdicts(const std::vector<Verdict>& verdicts, const GroundTruth& truth);

/// Labels verdicts of a trace with no injected failure.
std::vector<VerdictClass> classify_normal(const std::vector<Verdict>& verdicts);

/// 100 * FalseAlarm / (FalseAlarm + TrueNegative); other classes are ignored.
double false_alarm_rate(const std::vector<VerdictClass>& classes);

struct Earliness {
    std::optional<Timestamp> first_tp;
    std::optional<std::int64_t> reaction;  ///< first TP - injection
    std::int64_t earliness = 0;            ///< crash - first TP, 0 without a TP
    std::optional<double> tpr;             ///< % of TP timestamps in [first TP, crash)
};

Earliness earliness_metrics(const std::vector<VerdictClass>& classes, const std::vector<Verdict>& verdicts,
                            const GroundTruth& truth);

struct MetricsReport {
    std::string experiment;
    std::string source;
    std::optional<double> far_pct;
    std::optional<std::int64_t> injection_min;
    std::optional<std::int64_t> reaction_min;
    std::int64_t earliness_min = 0;
    std::optional<double> tpr_pct;

    std::vector<Timestamp> timestamps;
    std::vector<VerdictClass> classes;

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Failing trace when `truth` is set (FAR over pre-injection timestamps), all-normal trace otherwise.
MetricsReport evaluate(const std::vector<Verdict>& verdicts, const std::optional<GroundTruth>& truth,
                       std::string experiment, std::string source);

/// Field-wise median over reports sharing experiment and source; N/A values are skipped.
MetricsReport median_report(const std::vector<MetricsReport>& reports);

/// Metrics CSV: experiment,source,far_pct,injection_min,reaction_min,earliness_min,tpr_pct
std::string metrics_header();
std::string metrics_row(const MetricsReport& m);
void write_metrics(const std::vector<MetricsReport>& reports, const std::filesystem::path& path);
std::vector<MetricsReport> read_metrics(const std::filesystem::path& path);

/// Writes the summary row to `summary` and the per-timestamp classes (timestamp,class) to `trace`.
void report(const MetricsReport& metrics, const std::filesystem::path& summary, const std::filesystem::path& trace);
std::vector<std::pair<Timestamp, VerdictClass>> read_trace(const std::filesystem::path& trace);

} // namespace kpiguard
