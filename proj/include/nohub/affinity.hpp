#pragma once

#include "nohub/core.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace nohub {

/// Per-point inverse temperatures with the entropy each one achieved (bits).
struct KappaVector {
    Vector values;
    Vector achieved_entropy;
    std::vector<char> converged;
};

/// Support/query split of an episode's rows. Query rows carry label -1.
struct SupportLabelInfo {
    std::vector<std::int64_t> labels;
    std::vector<char> is_support;

    static SupportLabelInfo from_labels(std::vector<std::int64_t> labels) {
        SupportLabelInfo info;
        info.is_support.reserve(labels.size());
        for (std::int64_t y : labels) {
            require(y >= -1, "labels must be >= -1 (-1 marks query rows)");
            info.is_support.push_back(y >= 0 ? 1 : 0);
        }
        info.labels = std::move(labels);
        return info;
    }

    Index size() const { return static_cast<Index>(labels.size()); }
};

/// Shannon entropy in bits of a probability vector, with 0 log 0 = 0.
inline double row_entropy(const Vector& p) {
    double sum = 0.0;
    for (Index j = 0; j < p.size(); ++j) {
        require(p(j) >= 0.0, "row_entropy: negative probability");
        sum += p(j);
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw NotNormalizedError("row_entropy: probabilities sum to " + std::to_string(sum));
    double h = 0.0;
    for (Index j = 0; j < p.size(); ++j) {
        if (p(j) > 0.0) h -= p(j) * std::log2(p(j));
    }
    return h;
}

namespace detail {

// Softmax of kappa * s over the off-diagonal entries of row i, with the max
// shifted out of the exponentials. Returns the entropy in bits and fills the
// full-length probability row (diagonal entry zero).
inline double row_softmax(const Matrix& s, Index i, double kappa, Vector& prob) {
    const Index n = s.rows();
    prob.setZero(n);
    double peak = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        peak = std::max(peak, kappa * s(i, j));
    }
    double total = 0.0;
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        prob(j) = std::exp(kappa * s(i, j) - peak);
        total += prob(j);
    }
    double entropy = 0.0;
    for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        prob(j) /= total;
        if (prob(j) > 0.0) entropy -= prob(j) * std::log2(prob(j));
    }
    return entropy;
}

}  // namespace detail

/// Binary search for each kappa_i so that the entropy of the conditional
/// neighbor distribution of row i lands within 10% of log2(perplexity).
/// Rows that cannot reach the tolerance keep the final midpoint, flagged
/// converged = false.
inline KappaVector calibrate_kappa(const Matrix& s, double perplexity, int max_iter = 100) {
    const Index n = s.rows();
    if (!(perplexity >= 2.0 && perplexity <= static_cast<double>(n - 1)))
        throw PerplexityOutOfRangeError("perplexity must lie in [2, n-1], got " +
                                        std::to_string(perplexity));
    const double target = std::log2(perplexity);
    const double tol = 0.1 * target;

    KappaVector result;
    result.values.resize(n);
    result.achieved_entropy.resize(n);
    result.converged.assign(static_cast<std::size_t>(n), 0);

    Vector prob(n);
    for (Index i = 0; i < n; ++i) {
        double lo = 1e-6;
        double hi = 1.0;
        while (detail::row_softmax(s, i, hi, prob) > target && hi < 1e6)
            hi = std::min(hi * 2.0, 1e6);

        double mid = 0.5 * (lo + hi);
        double entropy = detail::row_softmax(s, i, mid, prob);
        bool ok = false;
        for (int iter = 0; iter < max_iter; ++iter) {
            mid = 0.5 * (lo + hi);
            entropy = detail::row_softmax(s, i, mid, prob);
            if (std::abs(entropy - target) <= tol) {
                ok = true;
                break;
            }
            if (entropy > target)
                lo = mid;  // entropy decreases with kappa
            else
                hi = mid;
        }
        result.values(i) = mid;
        result.achieved_entropy(i) = entropy;
        result.converged[static_cast<std::size_t>(i)] = ok ? 1 : 0;
    }
    return result;
}

/// Row-stochastic conditionals p_{j|i} = softmax_j(kappa_i * s_ij), j != i.
inline Matrix conditional_affinities(const Matrix& s, const KappaVector& kappa) {
    const Index n = s.rows();
    require(kappa.values.size() == n, "conditional_affinities: kappa length mismatch");
    Matrix c(n, n);
    Vector prob(n);
    for (Index i = 0; i < n; ++i) {
        detail::row_softmax(s, i, kappa.values(i), prob);
        c.row(i) = prob.transpose();
    }
    return c;
}

/// Symmetrized joint affinities p_ij = (p_{i|j} + p_{j|i}) / (2n); the result
/// is symmetric with zero diagonal and sums to 1.
inline Matrix symmetrize(const Matrix& conditional) {
    const double n = static_cast<double>(conditional.rows());
    return (conditional + conditional.transpose()) / (2.0 * n);
}

/// Label-informed similarities: support pairs of the same class become +1,
/// support pairs of different classes become -1, everything else passes through.
inline Matrix label_informed_gram(const Matrix& s, const SupportLabelInfo& info) {
    require(info.size() == s.rows(), "label_informed_gram: label length mismatch");
    Matrix out = s;
    for (Index i = 0; i < s.rows(); ++i) {
        if (!info.is_support[static_cast<std::size_t>(i)]) continue;
        for (Index j = 0; j < s.cols(); ++j) {
            if (!info.is_support[static_cast<std::size_t>(j)]) continue;
            out(i, j) = info.labels[static_cast<std::size_t>(i)] ==
                                info.labels[static_cast<std::size_t>(j)]
                            ? 1.0
                            : -1.0;
        }
    }
    return out;
}

}  // namespace nohub
