#pragma once

#include "nohub/affinity.hpp"
#include "nohub/core.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <vector>

namespace nohub {

/// One K-way N_S-shot task with N_Q queries per class.
struct Episode {
    Matrix support_x;
    std::vector<std::int64_t> support_y;
    Matrix query_x;
    std::vector<std::int64_t> query_y;  // ground truth, evaluation only
    int way = 0;                        // K
    int shots = 0;                      // N_S
    int queries = 0;                    // N_Q
};

struct FeaturePool {
    Matrix x;
    std::vector<std::int64_t> y;
};

/// Stacked [support; query] features of an episode.
inline Matrix episode_features(const Episode& ep) {
    Matrix x(ep.support_x.rows() + ep.query_x.rows(), ep.support_x.cols());
    x.topRows(ep.support_x.rows()) = ep.support_x;
    x.bottomRows(ep.query_x.rows()) = ep.query_x;
    return x;
}

/// Support labels followed by the -1 sentinel for every query row.
inline SupportLabelInfo episode_label_info(const Episode& ep) {
    std::vector<std::int64_t> labels = ep.support_y;
    labels.insert(labels.end(), static_cast<std::size_t>(ep.query_x.rows()), -1);
    return SupportLabelInfo::from_labels(std::move(labels));
}

namespace detail {

inline void fill_gaussian_row(Matrix& m, Index row, GaussianSampler& gauss) {
    for (Index j = 0; j < m.cols(); ++j) m(row, j) = gauss.next();
}

inline Matrix draw_class_means(int classes, Index dim, double separation,
                               GaussianSampler& gauss) {
    Matrix means(classes, dim);
    for (Index c = 0; c < classes; ++c) {
        do {
            fill_gaussian_row(means, c, gauss);
        } while (means.row(c).norm() < 1e-12);
        means.row(c) *= separation / means.row(c).norm();
    }
    return means;
}

}  // namespace detail

/// Synthetic episode: class means uniform on the sphere of radius `separation`,
/// samples = mean + `within_spread` * standard normal noise. Deterministic per seed.
inline Episode synth_episode(int way, int shots, int queries, Index dim, double separation,
                             double within_spread, std::uint64_t seed) {
    require(way >= 2, "synth_episode needs K >= 2");
    require(shots >= 1 && queries >= 1, "synth_episode needs N_S >= 1 and N_Q >= 1");
    require(dim >= 2, "synth_episode needs dim >= 2");
    require(separation >= 0.0, "separation must be >= 0");
    require(within_spread >= 0.0, "within_spread must be >= 0");

    GaussianSampler gauss(seed);
    const Matrix means = detail::draw_class_means(way, dim, separation, gauss);

    Episode ep;
    ep.way = way;
    ep.shots = shots;
    ep.queries = queries;
    ep.support_x.resize(static_cast<Index>(way) * shots, dim);
    ep.query_x.resize(static_cast<Index>(way) * queries, dim);
    Matrix noise(1, dim);

    for (int c = 0; c < way; ++c) {
        for (int s = 0; s < shots; ++s) {
            const Index row = static_cast<Index>(c) * shots + s;
            detail::fill_gaussian_row(noise, 0, gauss);
            ep.support_x.row(row) = means.row(c) + within_spread * noise.row(0);
            ep.support_y.push_back(c);
        }
    }
    for (int c = 0; c < way; ++c) {
        for (int q = 0; q < queries; ++q) {
            const Index row = static_cast<Index>(c) * queries + q;
            detail::fill_gaussian_row(noise, 0, gauss);
            ep.query_x.row(row) = means.row(c) + within_spread * noise.row(0);
            ep.query_y.push_back(c);
        }
    }
    return ep;
}

/// Labeled pool from the same generative family as synth_episode.
inline FeaturePool synth_pool(int classes, int per_class, Index dim, double separation,
                              double within_spread, std::uint64_t seed) {
    require(classes >= 2, "synth_pool needs at least 2 classes");
    require(per_class >= 1, "synth_pool needs at least 1 row per class");
    require(dim >= 2, "synth_pool needs dim >= 2");
    require(separation >= 0.0, "separation must be >= 0");
    require(within_spread >= 0.0, "within_spread must be >= 0");

    GaussianSampler gauss(seed);
    const Matrix means = detail::draw_class_means(classes, dim, separation, gauss);

    FeaturePool pool;
    pool.x.resize(static_cast<Index>(classes) * per_class, dim);
    Matrix noise(1, dim);
    for (int c = 0; c < classes; ++c) {
        for (int r = 0; r < per_class; ++r) {
            const Index row = static_cast<Index>(c) * per_class + r;
            detail::fill_gaussian_row(noise, 0, gauss);
            pool.x.row(row) = means.row(c) + within_spread * noise.row(0);
            pool.y.push_back(c);
        }
    }
    return pool;
}

/// Samples a K-way episode from a labeled pool: K eligible classes without
/// replacement, then N_S + N_Q distinct rows per class, split support/query.
inline Episode sample_episode(const FeaturePool& pool, int way, int shots, int queries,
                              std::uint64_t seed) {
    require(way >= 2, "sample_episode needs K >= 2");
    require(shots >= 1 && queries >= 1, "sample_episode needs N_S >= 1 and N_Q >= 1");
    require(pool.x.rows() == static_cast<Index>(pool.y.size()),
            "pool features and labels disagree");

    std::map<std::int64_t, std::vector<Index>> by_class;
    for (Index i = 0; i < pool.x.rows(); ++i) by_class[pool.y[static_cast<std::size_t>(i)]].push_back(i);

    const int needed = shots + queries;
    std::vector<std::int64_t> eligible;
    for (const auto& [label, rows] : by_class) {
        if (static_cast<int>(rows.size()) >= needed) eligible.push_back(label);
    }
    if (static_cast<int>(eligible.size()) < way)
        throw InsufficientPoolError("pool has " + std::to_string(eligible.size()) +
                                    " classes with >= " + std::to_string(needed) +
                                    " rows, need " + std::to_string(way));

    GaussianSampler gauss(seed);
    // Partial Fisher-Yates over the eligible class list, then over row indices.
    auto draw_prefix = [&gauss](auto& items, int count) {
        for (int i = 0; i < count; ++i) {
            const auto remaining = static_cast<std::uint64_t>(items.size() - i);
            const auto pick = static_cast<std::size_t>(i) +
                              static_cast<std::size_t>(gauss.next_below(remaining));
            std::swap(items[static_cast<std::size_t>(i)], items[pick]);
        }
    };
    draw_prefix(eligible, way);

    Episode ep;
    ep.way = way;
    ep.shots = shots;
    ep.queries = queries;
    ep.support_x.resize(static_cast<Index>(way) * shots, pool.x.cols());
    ep.query_x.resize(static_cast<Index>(way) * queries, pool.x.cols());

    for (int c = 0; c < way; ++c) {
        auto rows = by_class[eligible[static_cast<std::size_t>(c)]];
        draw_prefix(rows, needed);
        for (int s = 0; s < shots; ++s) {
            ep.support_x.row(static_cast<Index>(c) * shots + s) =
                pool.x.row(rows[static_cast<std::size_t>(s)]);
            ep.support_y.push_back(c);
        }
        for (int q = 0; q < queries; ++q) {
            ep.query_x.row(static_cast<Index>(c) * queries + q) =
                pool.x.row(rows[static_cast<std::size_t>(shots + q)]);
            ep.query_y.push_back(c);
        }
    }
    return ep;
}

}  // namespace nohub
