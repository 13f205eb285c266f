#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kpiguard {

using Timestamp = std::int64_t;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A monitored key performance indicator: one metric observed on one node.
struct Kpi {
    std::string metric;
    std::string node;

    std::string label() const { return metric + "@" + node; }
    static Kpi parse(const std::string& label);

    friend bool operator==(const Kpi&, const Kpi&) = default;
};

/// Ordered, duplicate-free set of KPIs. Column i of every Series refers to kpis()[i].
class KpiCatalog {
public:
    explicit KpiCatalog(std::vector<Kpi> kpis);

    std::size_t size() const { return kpis_.size(); }
    const Kpi& operator[](std::size_t i) const { return kpis_[i]; }
    const std::vector<Kpi>& kpis() const { return kpis_; }

    std::optional<std::size_t> index_of(const Kpi& kpi) const;

    /// Distinct node ids in order of first appearance.
    const std::vector<std::string>& nodes() const { return nodes_; }

    /// Stable 64-bit FNV-1a digest of the ordered KPI labels.
    std::uint64_t hash() const { return hash_; }
    std::string hash_hex() const;

    friend bool operator==(const KpiCatalog& a, const KpiCatalog& b) { return a.kpis_ == b.kpis_; }

private:
    std::vector<Kpi> kpis_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> nodes_;
    std::uint64_t hash_ = 0;
};

using CatalogPtr = std::shared_ptr<const KpiCatalog>;

struct Snapshot {
    Timestamp timestamp = 0;
    Eigen::VectorXd values;
};

/// Per-minute KPI matrix: one row per snapshot, one column per catalog KPI.
class Series {
public:
    Series() = default;
    Series(CatalogPtr catalog, std::vector<Timestamp> timestamps, RowMatrix values);

    const CatalogPtr& catalog() const { return catalog_; }
    std::size_t size() const { return timestamps_.size(); }
    bool empty() const { return timestamps_.empty(); }
    std::size_t n_kpis() const { return catalog_ ? catalog_->size() : 0; }

    const std::vector<Timestamp>& timestamps() const { return timestamps_; }
    Timestamp timestamp(std::size_t i) const { return timestamps_[i]; }
    const RowMatrix& values() const { return values_; }

    auto row(std::size_t i) const { return values_.row(static_cast<Eigen::Index>(i)); }
    auto column(std::size_t k) const { return values_.col(static_cast<Eigen::Index>(k)); }
    Snapshot snapshot(std::size_t i) const { return {timestamps_[i], values_.row(static_cast<Eigen::Index>(i)).transpose()}; }

    /// Rows [begin, end) as a new series sharing this catalog.
    Series slice(std::size_t begin, std::size_t end) const;

    friend bool operator==(const Series& a, const Series& b);

private:
    CatalogPtr catalog_;
    std::vector<Timestamp> timestamps_;
    RowMatrix values_;
};

/// Z-score statistics fitted on training data.
struct NormStats {
    static constexpr double kStdFloor = 1e-6;

    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

Series load_series(const std::filesystem::path& path, const KpiCatalog* catalog = nullptr);
void write_series(const Series& series, const std::filesystem::path& path);

NormStats fit_normalizer(const Series& train);
Series normalize(const Series& series, const NormStats& stats);
Series denormalize(const Series& series, const NormStats& stats);

/// Splits at `boundary`: first part strictly before it, second at or after it.
std::pair<Series, Series> split_train(const Series& series, Timestamp boundary);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

} // namespace kpiguard
