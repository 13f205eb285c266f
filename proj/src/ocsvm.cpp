#include "kpiguard/ocsvm.hpp"

#include "kpiguard/error.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <map>

namespace kpiguard {

BinaryAnomalyVector BinaryAnomalyVector::from_indices(std::size_t size, const std::vector<std::size_t>& set_bits) {
    BinaryAnomalyVector v(size);
    for (auto i : set_bits) {
        if (i >= size)
            throw SchemaError("anomaly index " + std::to_string(i) + " outside vector of size " + std::to_string(size));
        v.set(i);
    }
    return v;
}

BinaryAnomalyVector BinaryAnomalyVector::from_string(const std::string& bits) {
    BinaryAnomalyVector v(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1')
            v.set(i);
        else if (bits[i] != '0')
            throw ParseError("binary anomaly vector contains '" + std::string(1, bits[i]) + "'");
    }
    return v;
}

void BinaryAnomalyVector::set(std::size_t i, bool value) {
    const auto mask = std::uint64_t{1} << (i % 64);
    if (value)
        words_[i / 64] |= mask;
    else
        words_[i / 64] &= ~mask;
}

std::size_t BinaryAnomalyVector::count() const {
    std::size_t c = 0;
    for (auto w : words_)
        c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

std::string BinaryAnomalyVector::to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
        if (test(i))
            s[i] = '1';
    return s;
}

std::size_t hamming(const BinaryAnomalyVector& a, const BinaryAnomalyVector& b) {
    if (a.size_ != b.size_)
        throw SchemaError("anomaly vectors differ in length (" + std::to_string(a.size_) + " vs " +
                          std::to_string(b.size_) + ")");
    std::size_t d = 0;
    for (std::size_t w = 0; w < a.words_.size(); ++w)
        d += static_cast<std::size_t>(std::popcount(a.words_[w] ^ b.words_[w]));
    return d;
}

OcsvmModel train_ocsvm(const std::vector<BinaryAnomalyVector>& vectors, const OcsvmConfig& cfg) {
    if (!(cfg.nu > 0.0 && cfg.nu <= 1.0))
        throw UsageError("OCSVM nu must lie in (0, 1], got " + std::to_string(cfg.nu));
    if (vectors.size() < 2)
        throw InsufficientDataError("OCSVM needs at least 2 training vectors, got " + std::to_string(vectors.size()));
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors)
        if (v.size() != dim)
            throw SchemaError("OCSVM training vectors differ in length");
    const double gamma = cfg.gamma > 0.0 ? cfg.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(dim, 1));

    // Canonical order over distinct vectors makes the solve independent of input order.
    std::map<BinaryAnomalyVector, std::size_t> counts;
    for (const auto& v : vectors)
        ++counts[v];

    OcsvmModel model;
    model.gamma = gamma;
    model.nu = cfg.nu;
    model.n_train = vectors.size();
    std::vector<BinaryAnomalyVector> points;
    std::vector<std::size_t> mult;
    for (auto& [v, c] : counts) {
        points.push_back(v);
        mult.push_back(c);
    }
    const std::size_t u = points.size();
    std::vector<double> upper(u);
    for (std::size_t k = 0; k < u; ++k)
        upper[k] = static_cast<double>(mult[k]) / (cfg.nu * static_cast<double>(vectors.size()));

    std::vector<double> alpha(u, 0.0);
    double remaining = 1.0;
    for (std::size_t k = 0; k < u && remaining > 0.0; ++k) {
        alpha[k] = std::min(upper[k], remaining);
        remaining -= alpha[k];
    }

    auto kernel_row = [&](std::size_t i, std::vector<double>& row) {
        row.resize(u);
        for (std::size_t k = 0; k < u; ++k)
            row[k] = rbf_kernel(points[i], points[k], gamma);
    };

    std::vector<double> grad(u, 0.0);
    std::vector<double> row_i, row_j;
    for (std::size_t k = 0; k < u; ++k) {
        if (alpha[k] == 0.0)
            continue;
        kernel_row(k, row_i);
        for (std::size_t t = 0; t < u; ++t)
            grad[t] += alpha[k] * row_i[t];
    }

    double gap = 0.0;
    std::size_t iter = 0;
    for (; iter < cfg.max_iterations; ++iter) {
        std::size_t i = u, j = u;
        double gmin = std::numeric_limits<double>::infinity();
        double gmax = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < u; ++k) {
            if (alpha[k] < upper[k] && grad[k] < gmin) {
                gmin = grad[k];
                i = k;
            }
            if (alpha[k] > 0.0 && grad[k] > gmax) {
                gmax = grad[k];
                j = k;
            }
        }
        gap = (i == u || j == u) ? 0.0 : gmax - gmin;
        if (gap < cfg.tolerance)
            break;

        kernel_row(i, row_i);
        kernel_row(j, row_j);
        const double eta = std::max(row_i[i] + row_j[j] - 2.0 * row_i[j], 1e-12);
        double delta = gap / eta;
        bool i_hits_upper = false, j_hits_zero = false;
        if (delta >= upper[i] - alpha[i]) {
            delta = upper[i] - alpha[i];
            i_hits_upper = true;
        }
        if (delta >= alpha[j]) {
            delta = alpha[j];
            j_hits_zero = true;
            i_hits_upper = (delta >= upper[i] - alpha[i]);
        }
        alpha[i] = i_hits_upper ? upper[i] : alpha[i] + delta;
        alpha[j] = j_hits_zero ? 0.0 : alpha[j] - delta;
        for (std::size_t k = 0; k < u; ++k)
            grad[k] += delta * (row_i[k] - row_j[k]);
    }
    if (gap >= cfg.tolerance)
        throw NumericError("OCSVM solver did not reach KKT tolerance after " + std::to_string(iter) +
                           " iterations (gap " + std::to_string(gap) + ")");

    // Refresh the gradient with the summation order decision_value uses, so rho is exact for it.
    for (std::size_t t = 0; t < u; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < u; ++k)
            if (alpha[k] > 0.0)
                acc += alpha[k] * rbf_kernel(points[k], points[t], gamma);
        grad[t] = acc;
    }

    // rho: smallest gradient over free support vectors, so every margin vector scores >= 0 instead of
    // straddling zero by solver round-off; those gradients agree to within the KKT tolerance. Without
    // free vectors, the midpoint of the feasible interval.
    double free_min = std::numeric_limits<double>::infinity();
    std::size_t free_count = 0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper_rho = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < u; ++k) {
        if (alpha[k] > 0.0 && alpha[k] < upper[k]) {
            free_min = std::min(free_min, grad[k]);
            ++free_count;
        } else if (alpha[k] == 0.0) {
            upper_rho = std::min(upper_rho, grad[k]);
        } else {
            lower = std::max(lower, grad[k]);
        }
    }
    if (free_count > 0)
        model.rho = free_min;
    else if (std::isfinite(lower) && std::isfinite(upper_rho))
        model.rho = 0.5 * (lower + upper_rho);
    else if (std::isfinite(lower))
        model.rho = lower;
    else if (std::isfinite(upper_rho))
        model.rho = upper_rho;
    else
        throw NumericError("OCSVM solution has no support vector to fix the offset");
    if (!std::isfinite(model.rho))
        throw NumericError("OCSVM offset is not finite");

    double objective = 0.0;
    for (std::size_t k = 0; k < u; ++k) {
        objective += 0.5 * alpha[k] * grad[k];
        if (alpha[k] > 0.0) {
            model.support.push_back(points[k]);
            model.alpha.push_back(alpha[k]);
            model.multiplicity.push_back(mult[k]);
        }
    }
    model.objective = objective;
    model.kkt_gap = gap;
    model.iterations = iter;
    return model;
}

double decision_value(const OcsvmModel& model, const BinaryAnomalyVector& x) {
    if (x.size() != model.dimension())
        throw SchemaError("anomaly vector has " + std::to_string(x.size()) + " bits, OCSVM expects " +
                          std::to_string(model.dimension()));
    double acc = 0.0;
    for (std::size_t k = 0; k < model.support.size(); ++k)
        acc += model.alpha[k] * rbf_kernel(model.support[k], x, model.gamma);
    return acc - model.rho;
}

OcsvmClass classify_ocsvm(const OcsvmModel& model, const BinaryAnomalyVector& x) {
    return decision_value(model, x) >= 0.0 ? OcsvmClass::Benign : OcsvmClass::FailureProne;
}

} // namespace kpiguard
