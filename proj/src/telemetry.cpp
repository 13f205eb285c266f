#include "kpiguard/telemetry.hpp"

#include "kpiguard/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace kpiguard {

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_double(std::string_view text, double& out) {
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

bool parse_timestamp(std::string_view text, Timestamp& out) {
    if (text.empty())
        return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && out >= 0;
}

} // namespace

Kpi Kpi::parse(const std::string& label) {
    auto at = label.find('@');
    if (at == std::string::npos || label.find('@', at + 1) != std::string::npos)
        throw ParseError("KPI label '" + label + "' must have the form metric@node");
    Kpi kpi{label.substr(0, at), label.substr(at + 1)};
    if (kpi.metric.empty() || kpi.node.empty())
        throw ParseError("KPI label '" + label + "' has an empty metric or node");
    return kpi;
}

KpiCatalog::KpiCatalog(std::vector<Kpi> kpis) : kpis_(std::move(kpis)) {
    if (kpis_.empty())
        throw SchemaError("KPI catalog must contain at least one KPI");
    hash_ = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < kpis_.size(); ++i) {
        const Kpi& k = kpis_[i];
        if (k.metric.empty() || k.node.empty())
            throw SchemaError("KPI " + std::to_string(i) + " has an empty metric or node");
        if (k.metric.find('@') != std::string::npos || k.node.find('@') != std::string::npos)
            throw SchemaError("'@' is reserved in KPI names: " + k.metric + "/" + k.node);
        auto label = k.label();
        if (!index_.emplace(label, i).second)
            throw SchemaError("duplicate KPI " + label);
        if (std::find(nodes_.begin(), nodes_.end(), k.node) == nodes_.end())
            nodes_.push_back(k.node);
        hash_ = fnv1a(hash_, label);
        hash_ = fnv1a(hash_, ",");
    }
}

std::optional<std::size_t> KpiCatalog::index_of(const Kpi& kpi) const {
    auto it = index_.find(kpi.label());
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

std::string KpiCatalog::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_));
    return buf;
}

Series::Series(CatalogPtr catalog, std::vector<Timestamp> timestamps, RowMatrix values)
    : catalog_(std::move(catalog)), timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (!catalog_)
        throw SchemaError("series requires a catalog");
    if (static_cast<std::size_t>(values_.rows()) != timestamps_.size())
        throw SchemaError("series has " + std::to_string(values_.rows()) + " value rows but " +
                          std::to_string(timestamps_.size()) + " timestamps");
    if (static_cast<std::size_t>(values_.cols()) != catalog_->size() && !timestamps_.empty())
        throw SchemaError("series width " + std::to_string(values_.cols()) + " does not match catalog size " +
                          std::to_string(catalog_->size()));
    if (timestamps_.empty())
        values_.resize(0, static_cast<Eigen::Index>(catalog_->size()));
    for (std::size_t i = 1; i < timestamps_.size(); ++i)
        if (timestamps_[i] <= timestamps_[i - 1])
            throw OrderingError("timestamps must be strictly increasing (" + std::to_string(timestamps_[i - 1]) +
                                " then " + std::to_string(timestamps_[i]) + ")");
    if (!values_.allFinite())
        throw SchemaError("series contains non-finite values");
}

Series Series::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, size());
    begin = std::min(begin, end);
    std::vector<Timestamp> ts(timestamps_.begin() + static_cast<std::ptrdiff_t>(begin),
                              timestamps_.begin() + static_cast<std::ptrdiff_t>(end));
    RowMatrix vals = values_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    return Series(catalog_, std::move(ts), std::move(vals));
}

bool operator==(const Series& a, const Series& b) {
    if (!a.catalog_ || !b.catalog_)
        return a.catalog_ == b.catalog_;
    return *a.catalog_ == *b.catalog_ && a.timestamps_ == b.timestamps_ && a.values_ == b.values_;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Series load_series(const std::filesystem::path& path, const KpiCatalog* catalog) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open trace " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw ParseError(path.string() + ": missing header line");
    auto header = split_commas(line);
    if (header.empty() || header[0] != "timestamp")
        throw ParseError(path.string() + ":1: header must start with 'timestamp'");

    std::vector<Kpi> kpis;
    for (std::size_t i = 1; i < header.size(); ++i)
        kpis.push_back(Kpi::parse(std::string(header[i])));
    auto parsed = std::make_shared<const KpiCatalog>(std::move(kpis));
    if (catalog && !(*catalog == *parsed))
        throw SchemaError(path.string() + ": header does not match the expected KPI catalog");

    const std::size_t n = parsed->size();
    std::vector<Timestamp> timestamps;
    std::vector<double> flat;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        auto fields = split_commas(line);
        if (fields.size() != n + 1)
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(n + 1) +
                             " fields, found " + std::to_string(fields.size()));
        Timestamp t = 0;
        if (!parse_timestamp(fields[0], t))
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad timestamp '" +
                             std::string(fields[0]) + "'");
        if (!timestamps.empty() && t <= timestamps.back())
            throw OrderingError(path.string() + ":" + std::to_string(lineno) + ": timestamp " + std::to_string(t) +
                                " does not increase");
        timestamps.push_back(t);
        for (std::size_t k = 1; k <= n; ++k) {
            double v = 0;
            if (!parse_double(fields[k], v) || !std::isfinite(v))
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad value '" +
                                 std::string(fields[k]) + "' in column " + std::to_string(k));
            flat.push_back(v);
        }
    }
    if (timestamps.empty())
        throw InsufficientDataError(path.string() + ": no snapshots");

    RowMatrix values = Eigen::Map<RowMatrix>(flat.data(), static_cast<Eigen::Index>(timestamps.size()),
                                             static_cast<Eigen::Index>(n));
    if (catalog)
        return Series(std::make_shared<const KpiCatalog>(*catalog), std::move(timestamps), std::move(values));
    return Series(std::move(parsed), std::move(timestamps), std::move(values));
}

void write_series(const Series& series, const std::filesystem::path& path) {
    if (!series.catalog())
        throw SchemaError("cannot write a series without a catalog");
    if (!series.values().allFinite())
        throw SchemaError("refusing to write non-finite KPI values to " + path.string());

    std::ostringstream out;
    out << "timestamp";
    for (const auto& k : series.catalog()->kpis())
        out << ',' << k.label();
    out << '\n';
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << series.timestamp(i);
        for (Eigen::Index k = 0; k < series.values().cols(); ++k)
            out << ',' << format_double(series.values()(static_cast<Eigen::Index>(i), k));
        out << '\n';
    }

    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open " + path.string() + " for writing");
    file << out.str();
    if (!file)
        throw IoError("write failed for " + path.string());
}

NormStats fit_normalizer(const Series& train) {
    if (train.size() < 2)
        throw InsufficientDataError("normalizer needs at least 2 snapshots, got " + std::to_string(train.size()));
    const auto& x = train.values();
    NormStats stats;
    stats.mean = x.colwise().mean().transpose();
    RowMatrix centered = x.rowwise() - stats.mean.transpose();
    stats.std = (centered.colwise().squaredNorm() / static_cast<double>(x.rows() - 1)).cwiseSqrt().transpose();
    stats.std = stats.std.cwiseMax(NormStats::kStdFloor);
    return stats;
}

namespace {

void check_stats(const Series& series, const NormStats& stats) {
    if (static_cast<std::size_t>(stats.mean.size()) != series.n_kpis() ||
        static_cast<std::size_t>(stats.std.size()) != series.n_kpis())
        throw SchemaError("normalization statistics cover " + std::to_string(stats.mean.size()) +
                          " KPIs, series has " + std::to_string(series.n_kpis()));
}

} // namespace

Series normalize(const Series& series, const NormStats& stats) {
    check_stats(series, stats);
    RowMatrix z = (series.values().rowwise() - stats.mean.transpose()).array().rowwise() /
                  stats.std.transpose().array();
    return Series(series.catalog(), series.timestamps(), std::move(z));
}

Series denormalize(const Series& series, const NormStats& stats) {
    check_stats(series, stats);
    RowMatrix x = (series.values().array().rowwise() * stats.std.transpose().array()).matrix().rowwise() +
                  stats.mean.transpose();
    return Series(series.catalog(), series.timestamps(), std::move(x));
}

std::pair<Series, Series> split_train(const Series& series, Timestamp boundary) {
    if (series.empty())
        throw RangeError("cannot split an empty series");
    if (boundary < series.timestamps().front() || boundary > series.timestamps().back())
        throw RangeError("split boundary " + std::to_string(boundary) + " outside [" +
                         std::to_string(series.timestamps().front()) + ", " +
                         std::to_string(series.timestamps().back()) + "]");
    auto it = std::lower_bound(series.timestamps().begin(), series.timestamps().end(), boundary);
    auto cut = static_cast<std::size_t>(it - series.timestamps().begin());
    return {series.slice(0, cut), series.slice(cut, series.size())};
}

} // namespace kpiguard
