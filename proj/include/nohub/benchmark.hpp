#pragma once

#include "nohub/embedding.hpp"
#include "nohub/episodes.hpp"
#include "nohub/hubness.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace nohub {

enum class EmbedMethod { None, L2, CL2, ZN, NoHub, NoHubS };

inline const char* method_name(EmbedMethod m) {
    switch (m) {
        case EmbedMethod::None: return "none";
        case EmbedMethod::L2: return "l2";
        case EmbedMethod::CL2: return "cl2";
        case EmbedMethod::ZN: return "zn";
        case EmbedMethod::NoHub: return "nohub";
        case EmbedMethod::NoHubS: return "nohub-s";
    }
    return "?";
}

inline EmbedMethod parse_method(const std::string& name) {
    if (name == "none") return EmbedMethod::None;
    if (name == "l2") return EmbedMethod::L2;
    if (name == "cl2") return EmbedMethod::CL2;
    if (name == "zn") return EmbedMethod::ZN;
    if (name == "nohub") return EmbedMethod::NoHub;
    if (name == "nohub-s") return EmbedMethod::NoHubS;
    throw ValidationError("unknown embedding method '" + name + "'");
}

/// Baseline embeddings. None = identity; L2 = row normalization; CL2 = subtract
/// the column mean of the given rows, then row normalization; ZN = per-row
/// z-scoring over the feature axis (population stddev).
inline Matrix baseline_embed(const Matrix& x, EmbedMethod method) {
    switch (method) {
        case EmbedMethod::None:
            return x;
        case EmbedMethod::L2:
            return l2_normalize_rows(x);
        case EmbedMethod::CL2: {
            require(x.rows() >= 2, "CL2 needs n >= 2 rows");
            const Eigen::RowVectorXd mean = x.colwise().mean();
            return l2_normalize_rows(x.rowwise() - mean);
        }
        case EmbedMethod::ZN: {
            require(x.cols() >= 2, "ZN needs k >= 2 features");
            const double k = static_cast<double>(x.cols());
            Matrix out(x.rows(), x.cols());
            for (Index i = 0; i < x.rows(); ++i) {
                const double mean = x.row(i).mean();
                const double var = (x.row(i).array() - mean).square().sum() / k;
                if (var < 1e-24) throw ZeroVarianceError(i);
                out.row(i) = (x.row(i).array() - mean) / std::sqrt(var);
            }
            return out;
        }
        default:
            throw ValidationError("baseline_embed does not run noHub variants; use embed()");
    }
}

enum class ClassifierMetric { Euclidean, Cosine };

/// Nearest-centroid predictions; distance ties go to the smaller class index.
inline std::vector<std::int64_t> simpleshot_classify(const Matrix& support_z,
                                                     const std::vector<std::int64_t>& support_y,
                                                     const Matrix& query_z,
                                                     ClassifierMetric metric) {
    require(support_z.rows() == static_cast<Index>(support_y.size()),
            "support rows and labels disagree");
    require(support_z.rows() >= 1, "need at least one support row");

    std::int64_t way = 0;
    for (std::int64_t y : support_y) {
        require(y >= 0, "support labels must be non-negative");
        way = std::max(way, y + 1);
    }
    Matrix centroids = Matrix::Zero(way, support_z.cols());
    std::vector<int> members(static_cast<std::size_t>(way), 0);
    for (Index i = 0; i < support_z.rows(); ++i) {
        const auto c = static_cast<Index>(support_y[static_cast<std::size_t>(i)]);
        centroids.row(c) += support_z.row(i);
        members[static_cast<std::size_t>(c)] += 1;
    }
    for (Index c = 0; c < way; ++c) {
        require(members[static_cast<std::size_t>(c)] > 0,
                "class " + std::to_string(c) + " has no support rows");
        centroids.row(c) /= static_cast<double>(members[static_cast<std::size_t>(c)]);
    }

    std::vector<std::int64_t> predictions;
    predictions.reserve(static_cast<std::size_t>(query_z.rows()));
    for (Index q = 0; q < query_z.rows(); ++q) {
        double best = std::numeric_limits<double>::infinity();
        std::int64_t best_class = 0;
        for (Index c = 0; c < way; ++c) {
            double dist;
            if (metric == ClassifierMetric::Euclidean) {
                dist = (query_z.row(q) - centroids.row(c)).squaredNorm();
            } else {
                const double denom = query_z.row(q).norm() * centroids.row(c).norm();
                dist = denom < 1e-12
                           ? std::numeric_limits<double>::infinity()
                           : 1.0 - query_z.row(q).dot(centroids.row(c)) / denom;
            }
            if (dist < best) {
                best = dist;
                best_class = c;
            }
        }
        predictions.push_back(best_class);
    }
    return predictions;
}

struct EpisodeResult {
    double accuracy = 0.0;
    HubnessReport hubness;
    EmbedMethod method = EmbedMethod::None;
    std::vector<std::int64_t> predictions;
};

struct AggregateStats {
    double mean_accuracy = 0.0;
    double ci95_halfwidth = 0.0;
    double mean_skewness = 0.0;
    double mean_hub_occurrence = 0.0;
    int episode_count = 0;
};

struct BenchmarkOptions {
    EmbedMethod method = EmbedMethod::None;
    NoHubConfig nohub = default_config(Variant::NoHub);
    ClassifierMetric classifier = ClassifierMetric::Euclidean;
    int episodes = 500;
    int k_hubness = 5;
    std::uint64_t seed = 0;
    int threads = 0;  ///< <= 0 means all available cores
};

/// Transductive evaluation of one episode: embed support and query jointly,
/// classify queries against support centroids, measure hubness of the
/// embedded points.
inline EpisodeResult run_episode(const Episode& ep, EmbedMethod method,
                                 const NoHubConfig& nohub_cfg, ClassifierMetric classifier,
                                 int k_hubness) {
    const Matrix x = episode_features(ep);
    Matrix embedded;
    if (method == EmbedMethod::NoHub || method == EmbedMethod::NoHubS) {
        NoHubConfig cfg = nohub_cfg;
        cfg.variant = method == EmbedMethod::NoHubS ? Variant::NoHubS : Variant::NoHub;
        if (cfg.variant == Variant::NoHubS) {
            const SupportLabelInfo info = episode_label_info(ep);
            embedded = embed(x, cfg, &info).embeddings;
        } else {
            embedded = embed(x, cfg).embeddings;
        }
    } else {
        embedded = baseline_embed(x, method);
    }

    EpisodeResult result;
    result.method = method;
    const Index n_support = ep.support_x.rows();
    result.predictions = simpleshot_classify(embedded.topRows(n_support), ep.support_y,
                                             embedded.bottomRows(ep.query_x.rows()), classifier);
    int correct = 0;
    for (std::size_t q = 0; q < result.predictions.size(); ++q) {
        if (result.predictions[q] == ep.query_y[q]) ++correct;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(ep.query_y.size());
    result.hubness = hubness_report(embedded, k_hubness, Metric::CosineDistance);
    return result;
}

using EpisodeSource = std::function<Episode(std::uint64_t)>;

/// Runs `options.episodes` independent episodes drawn from `source` and
/// aggregates accuracy and hubness. Episode seeds derive from (run seed,
/// episode index), so results do not depend on the thread count.
inline AggregateStats run_benchmark(const EpisodeSource& source, const BenchmarkOptions& options) {
    require(options.episodes >= 1, "episode count must be >= 1");
    require(static_cast<bool>(source), "episode source is empty");

    const int total = options.episodes;
    std::vector<EpisodeResult> results(static_cast<std::size_t>(total));
    std::atomic<int> cursor{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;

    auto worker = [&]() {
        while (true) {
            const int idx = cursor.fetch_add(1);
            if (idx >= total) return;
            {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (failure) return;
            }
            const std::uint64_t seed = episode_seed(options.seed, static_cast<std::uint64_t>(idx));
            try {
                const Episode ep = source(seed);
                results[static_cast<std::size_t>(idx)] =
                    run_episode(ep, options.method, options.nohub, options.classifier,
                                options.k_hubness);
            } catch (const ValidationError& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::make_exception_ptr(
                        ValidationError("episode seed " + std::to_string(seed) + ": " + e.what()));
            } catch (const NumericError& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::make_exception_ptr(
                        NumericError("episode seed " + std::to_string(seed) + ": " + e.what()));
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    int thread_count = options.threads;
    if (thread_count <= 0) thread_count = static_cast<int>(std::thread::hardware_concurrency());
    thread_count = std::max(1, std::min(thread_count, total));

    if (thread_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(thread_count));
        for (int t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    AggregateStats stats;
    stats.episode_count = total;
    for (const auto& r : results) {
        stats.mean_accuracy += r.accuracy;
        stats.mean_skewness += r.hubness.skewness;
        stats.mean_hub_occurrence += r.hubness.hub_occurrence;
    }
    stats.mean_accuracy /= total;
    stats.mean_skewness /= total;
    stats.mean_hub_occurrence /= total;
    if (total > 1) {
        double ss = 0.0;
        for (const auto& r : results) {
            const double dev = r.accuracy - stats.mean_accuracy;
            ss += dev * dev;
        }
        const double stddev = std::sqrt(ss / static_cast<double>(total - 1));
        stats.ci95_halfwidth = 1.96 * stddev / std::sqrt(static_cast<double>(total));
    }
    return stats;
}

}  // namespace nohub
