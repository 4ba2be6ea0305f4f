#pragma once

#include "nohub/core.hpp"
#include "nohub/geometry.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace nohub {

enum class Metric { CosineDistance, Euclidean };

/// k-occurrence counts: counts[i] = number of points having i among their
/// k nearest neighbors.
struct KOccurrence {
    std::vector<int> counts;
    int k = 0;
};

struct HubnessReport {
    double skewness = 0.0;
    double hub_occurrence = 0.0;
    int k = 0;
    int hub_threshold = 0;
    Index n = 0;
};

namespace detail {

inline Matrix pairwise_distances(const Matrix& points, Metric metric) {
    const Index n = points.rows();
    Matrix d(n, n);
    if (metric == Metric::CosineDistance) {
        const Matrix g = cosine_matrix(points);
        d = (1.0 - g.array()).matrix();
    } else {
        for (Index i = 0; i < n; ++i) {
            d(i, i) = 0.0;
            for (Index j = i + 1; j < n; ++j) {
                const double dist = (points.row(i) - points.row(j)).norm();
                d(i, j) = dist;
                d(j, i) = dist;
            }
        }
    }
    return d;
}

// k nearest neighbors of every point; distance ties broken by smaller index.
inline std::vector<std::vector<Index>> knn_lists(const Matrix& points, int k, Metric metric) {
    const Index n = points.rows();
    if (k < 1 || k > n - 1)
        throw BadKError("k must lie in [1, n-1], got " + std::to_string(k));
    const Matrix dist = pairwise_distances(points, metric);

    std::vector<std::vector<Index>> lists(static_cast<std::size_t>(n));
    std::vector<std::pair<double, Index>> order;
    order.reserve(static_cast<std::size_t>(n - 1));
    for (Index j = 0; j < n; ++j) {
        order.clear();
        for (Index i = 0; i < n; ++i) {
            if (i != j) order.emplace_back(dist(j, i), i);
        }
        std::partial_sort(order.begin(), order.begin() + k, order.end());
        auto& list = lists[static_cast<std::size_t>(j)];
        list.reserve(static_cast<std::size_t>(k));
        for (int s = 0; s < k; ++s) list.push_back(order[static_cast<std::size_t>(s)].second);
    }
    return lists;
}

inline KOccurrence count_occurrences(const std::vector<std::vector<Index>>& lists, int k) {
    KOccurrence occ;
    occ.k = k;
    occ.counts.assign(lists.size(), 0);
    for (const auto& list : lists) {
        for (Index i : list) occ.counts[static_cast<std::size_t>(i)] += 1;
    }
    return occ;
}

}  // namespace detail

inline KOccurrence k_occurrence(const Matrix& points, int k,
                                Metric metric = Metric::CosineDistance) {
    return detail::count_occurrences(detail::knn_lists(points, k, metric), k);
}

/// Population skewness m3 / m2^(3/2) of the k-occurrence counts; 0 when the
/// counts are constant.
inline double skewness(const KOccurrence& occ) {
    const auto n = static_cast<double>(occ.counts.size());
    require(occ.counts.size() >= 2, "skewness needs n >= 2 counts");
    double mean = 0.0;
    for (int c : occ.counts) mean += c;
    mean /= n;
    double m2 = 0.0;
    double m3 = 0.0;
    for (int c : occ.counts) {
        const double dev = static_cast<double>(c) - mean;
        m2 += dev * dev;
        m3 += dev * dev * dev;
    }
    m2 /= n;
    m3 /= n;
    if (m2 == 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

/// Fraction of k-NN list slots occupied by hubs (counts above the threshold,
/// default 2k).
inline double hub_occurrence(const KOccurrence& occ, const Matrix& points, Metric metric,
                             std::optional<int> hub_threshold = std::nullopt) {
    const int threshold = hub_threshold.value_or(2 * occ.k);
    const auto lists = detail::knn_lists(points, occ.k, metric);
    long hub_slots = 0;
    for (const auto& list : lists) {
        for (Index i : list) {
            if (occ.counts[static_cast<std::size_t>(i)] > threshold) ++hub_slots;
        }
    }
    return static_cast<double>(hub_slots) /
           (static_cast<double>(lists.size()) * static_cast<double>(occ.k));
}

/// One-pass hubness diagnostics over a point set.
inline HubnessReport hubness_report(const Matrix& points, int k,
                                    Metric metric = Metric::CosineDistance,
                                    std::optional<int> hub_threshold = std::nullopt) {
    const auto lists = detail::knn_lists(points, k, metric);
    const KOccurrence occ = detail::count_occurrences(lists, k);
    HubnessReport report;
    report.k = k;
    report.n = points.rows();
    report.hub_threshold = hub_threshold.value_or(2 * k);
    report.skewness = skewness(occ);
    long hub_slots = 0;
    for (const auto& list : lists) {
        for (Index i : list) {
            if (occ.counts[static_cast<std::size_t>(i)] > report.hub_threshold) ++hub_slots;
        }
    }
    report.hub_occurrence = static_cast<double>(hub_slots) /
                            (static_cast<double>(points.rows()) * static_cast<double>(k));
    return report;
}

}  // namespace nohub
