#pragma once

#include "kpiguard/random.hpp"
#include "kpiguard/telemetry.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixtures {

inline kpiguard::CatalogPtr catalog(std::size_t nodes, std::size_t metrics) {
    std::vector<kpiguard::Kpi> kpis;
    for (std::size_t n = 0; n < nodes; ++n)
        for (std::size_t m = 0; m < metrics; ++m)
            kpis.push_back({"m" + std::to_string(m), "node" + std::to_string(n)});
    return std::make_shared<const kpiguard::KpiCatalog>(std::move(kpis));
}

inline kpiguard::CatalogPtr flat_catalog(std::size_t n) { return catalog(1, n); }

inline kpiguard::Series random_series(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    kpiguard::Rng rng(seed);
    kpiguard::RowMatrix v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c)
            v(r, c) = scale * rng.normal();
    std::vector<kpiguard::Timestamp> ts(rows);
    for (std::size_t i = 0; i < rows; ++i)
        ts[i] = static_cast<kpiguard::Timestamp>(i);
    return kpiguard::Series(flat_catalog(cols), std::move(ts), std::move(v));
}

/// Rows live near a two-dimensional subspace of R^n, so a bottleneck of n/4 can learn them.
inline kpiguard::Series low_rank_series(std::size_t rows, std::size_t n, std::uint64_t mix_seed, std::uint64_t sample_seed) {
    kpiguard::Rng mixer(mix_seed);
    Eigen::MatrixXd mix(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < mix.size(); ++i)
        mix(i) = mixer.normal();
    kpiguard::Rng rng(sample_seed);
    kpiguard::RowMatrix v(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        const Eigen::Vector2d latent(rng.normal(), rng.normal());
        v.row(r) = (mix * latent).transpose() * 0.5;
        for (Eigen::Index c = 0; c < v.cols(); ++c)
            v(r, c) += 0.05 * rng.normal();
    }
    std::vector<kpiguard::Timestamp> ts(rows);
    for (std::size_t i = 0; i < rows; ++i)
        ts[i] = static_cast<kpiguard::Timestamp>(i);
    return kpiguard::Series(flat_catalog(n), std::move(ts), std::move(v));
}

/// Fresh, empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("kpiguard_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

} // namespace fixtures
