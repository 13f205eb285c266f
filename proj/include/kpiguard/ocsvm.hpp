#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace kpiguard {

/// Fixed-length bit vector: bit i set when KPI i was flagged anomalous.
class BinaryAnomalyVector {
public:
    BinaryAnomalyVector() = default;
    explicit BinaryAnomalyVector(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}
    static BinaryAnomalyVector from_indices(std::size_t size, const std::vector<std::size_t>& set_bits);
    /// Parses a string of '0'/'1' characters, bit 0 first.
    static BinaryAnomalyVector from_string(const std::string& bits);

    std::size_t size() const { return size_; }
    bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }
    void set(std::size_t i, bool value = true);
    std::size_t count() const;
    std::string to_string() const;

    friend std::size_t hamming(const BinaryAnomalyVector& a, const BinaryAnomalyVector& b);
    friend bool operator==(const BinaryAnomalyVector&, const BinaryAnomalyVector&) = default;
    friend auto operator<=>(const BinaryAnomalyVector& a, const BinaryAnomalyVector& b) {
        if (auto c = a.size_ <=> b.size_; c != 0)
            return c;
        return a.words_ <=> b.words_;
    }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

enum class OcsvmClass { Benign, FailureProne };

/// One-class SVM over binary anomaly vectors with an RBF kernel.
///
/// Identical training vectors are merged into one support vector whose
/// coefficient box is widened by its multiplicity, so the decision function is
/// the same as the unmerged dual's.
struct OcsvmModel {
    std::vector<BinaryAnomalyVector> support;
    std::vector<double> alpha;
    std::vector<std::size_t> multiplicity;
    double rho = 0.0;
    double gamma = 0.0;
    double nu = 0.0;
    std::size_t n_train = 0;

    // Solver diagnostics.
    double kkt_gap = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;

    std::size_t dimension() const { return support.empty() ? 0 : support.front().size(); }
    double upper_bound(std::size_t k) const {
        return static_cast<double>(multiplicity[k]) / (nu * static_cast<double>(n_train));
    }
};

struct OcsvmConfig {
    double nu = 0.05;
    double gamma = 0.0; ///< 0 selects 1/n
    double tolerance = 1e-6;
    std::size_t max_iterations = 10'000'000;
    std::uint64_t seed = 1;
};

inline double rbf_kernel(const BinaryAnomalyVector& a, const BinaryAnomalyVector& b, double gamma) {
    return std::exp(-gamma * static_cast<double>(hamming(a, b)));
}

OcsvmModel train_ocsvm(const std::vector<BinaryAnomalyVector>& vectors, const OcsvmConfig& cfg);

/// f(x) = sum_i alpha_i K(x_i, x) - rho.
double decision_value(const OcsvmModel& model, const BinaryAnomalyVector& x);

/// Benign iff decision_value >= 0.
OcsvmClass classify_ocsvm(const OcsvmModel& model, const BinaryAnomalyVector& x);

} // namespace kpiguard
