#pragma once

#include "nohub/affinity.hpp"
#include "nohub/core.hpp"
#include "nohub/geometry.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace nohub {

enum class Variant { NoHub, NoHubS };

struct NoHubConfig {
    double alpha = 0.2;          ///< tradeoff weight between LSP and uniformity
    double kappa = 0.5;          ///< embedding concentration
    double perplexity = 45.0;    ///< target effective neighbor count
    int iterations = 50;         ///< 50 for NoHub, 150 for NoHubS by default
    double learning_rate = 0.1;
    Index dim = 400;
    double epsilon = 8.0;        ///< between-class exaggeration (NoHubS only)
    Variant variant = Variant::NoHub;
    std::uint64_t seed = 0;      ///< carried for provenance; the pipeline is deterministic
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
};

inline NoHubConfig default_config(Variant v) {
    NoHubConfig cfg;
    cfg.variant = v;
    cfg.iterations = v == Variant::NoHubS ? 150 : 50;
    return cfg;
}

inline void validate_config(const NoHubConfig& cfg) {
    require(cfg.alpha >= 0.0 && cfg.alpha <= 1.0, "alpha must lie in [0, 1]");
    require(cfg.kappa > 0.0 && std::isfinite(cfg.kappa), "kappa must be positive");
    require(cfg.perplexity >= 2.0, "perplexity must be >= 2");
    require(cfg.iterations >= 1, "iterations must be >= 1");
    require(cfg.learning_rate > 0.0, "learning rate must be positive");
    require(cfg.dim >= 2, "dim must be >= 2");
    require(cfg.epsilon >= 0.0, "epsilon must be >= 0");
    require(cfg.adam_beta1 >= 0.0 && cfg.adam_beta1 < 1.0, "adam_beta1 must lie in [0, 1)");
    require(cfg.adam_beta2 >= 0.0 && cfg.adam_beta2 < 1.0, "adam_beta2 must lie in [0, 1)");
    require(cfg.adam_eps > 0.0, "adam_eps must be positive");
}

struct AdamState {
    Matrix first_moment;
    Matrix second_moment;
    long step_count = 0;

    static AdamState zero(Index n, Index d) {
        return AdamState{Matrix::Zero(n, d), Matrix::Zero(n, d), 0};
    }
};

struct LossTriple {
    double lsp = 0.0;
    double unif = 0.0;
    double total = 0.0;
};

struct EmbeddingResult {
    Matrix embeddings;
    std::vector<LossTriple> loss_trace;
    KappaVector kappas;
    bool pca_rank_deficient = false;
};

namespace detail {

enum class PairKind { Normal, Excluded, Scaled };

inline PairKind pair_kind(const SupportLabelInfo* info, Index i, Index j) {
    if (info == nullptr) return PairKind::Normal;
    const auto a = static_cast<std::size_t>(i);
    const auto b = static_cast<std::size_t>(j);
    if (!info->is_support[a] || !info->is_support[b]) return PairKind::Normal;
    return info->labels[a] == info->labels[b] ? PairKind::Excluded : PairKind::Scaled;
}

// Shared evaluation of the uniformity term over off-diagonal pairs.
// Exponents are max-shifted; excluded pairs never enter any sum, including
// the shift itself. `weights`, when requested, holds g_ij * exp(t_ij - peak)
// where g_ij is the derivative scale of the pair similarity (epsilon for
// scaled pairs, 1 otherwise), ready for the gradient contraction.
struct UnifEval {
    double loss = 0.0;
    double weight_sum = 0.0;  // sum of exp(t - peak) over included pairs
    Matrix weights;           // only filled when with_weights
};

inline UnifEval eval_unif(const Matrix& gram, double kappa, const SupportLabelInfo* info,
                          double epsilon, bool with_weights) {
    const Index n = gram.rows();
    double peak = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const PairKind kind = pair_kind(info, i, j);
            if (kind == PairKind::Excluded) continue;
            const double scale = kind == PairKind::Scaled ? epsilon : 1.0;
            peak = std::max(peak, kappa * scale * gram(i, j));
        }
    }
    if (!std::isfinite(peak)) throw EmptySumError("uniformity loss: every pair is masked out");

    UnifEval eval;
    if (with_weights) eval.weights = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j) continue;
            const PairKind kind = pair_kind(info, i, j);
            if (kind == PairKind::Excluded) continue;
            const double scale = kind == PairKind::Scaled ? epsilon : 1.0;
            const double w = std::exp(kappa * scale * gram(i, j) - peak);
            eval.weight_sum += w;
            if (with_weights) eval.weights(i, j) = scale * w;
        }
    }
    eval.loss = peak + std::log(eval.weight_sum);
    return eval;
}

inline double eval_lsp(const Matrix& p, const Matrix& gram, double kappa) {
    double acc = 0.0;
    const Index n = gram.rows();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i != j) acc += p(i, j) * gram(i, j);
        }
    }
    return -kappa * acc;
}

inline LossTriple eval_losses(const Matrix& p, const Matrix& gram, const NoHubConfig& cfg,
                              const SupportLabelInfo* info) {
    LossTriple out;
    out.lsp = eval_lsp(p, gram, cfg.kappa);
    const SupportLabelInfo* mask = cfg.variant == Variant::NoHubS ? info : nullptr;
    out.unif = eval_unif(gram, cfg.kappa, mask, cfg.epsilon, false).loss;
    out.total = cfg.alpha * out.lsp + (1.0 - cfg.alpha) * out.unif;
    return out;
}

inline Matrix eval_gradient(const Matrix& p, const Matrix& z, const Matrix& gram,
                            const NoHubConfig& cfg, const SupportLabelInfo* info) {
    const SupportLabelInfo* mask = cfg.variant == Variant::NoHubS ? info : nullptr;
    const Matrix grad_lsp = -2.0 * cfg.kappa * (p * z);
    const UnifEval unif = eval_unif(gram, cfg.kappa, mask, cfg.epsilon, true);
    const Matrix grad_unif = (2.0 * cfg.kappa / unif.weight_sum) * (unif.weights * z);
    return cfg.alpha * grad_lsp + (1.0 - cfg.alpha) * grad_unif;
}

}  // namespace detail

/// L_LSP = -kappa * sum_{i != j} p_ij z_i . z_j
inline double loss_lsp(const Matrix& p, const Matrix& z, double kappa) {
    return detail::eval_lsp(p, detail::symmetric_gram(z), kappa);
}

/// L_Unif = log sum_{l != m} exp(kappa * s(z_l, z_m)). Under a label mask,
/// same-class support pairs are removed from the sum and different-class
/// support pairs use the exaggerated similarity epsilon * z_l . z_m.
inline double loss_unif(const Matrix& z, double kappa, const SupportLabelInfo* info = nullptr,
                        double epsilon = 1.0) {
    return detail::eval_unif(detail::symmetric_gram(z), kappa, info, epsilon, false).loss;
}

/// Returns (L_LSP, L_Unif, alpha * L_LSP + (1 - alpha) * L_Unif).
inline LossTriple loss_nohub(const Matrix& p, const Matrix& z, const NoHubConfig& cfg,
                             const SupportLabelInfo* info = nullptr) {
    return detail::eval_losses(p, detail::symmetric_gram(z), cfg, info);
}

/// Ambient analytic gradient of loss_nohub with respect to the rows of z.
inline Matrix grad_nohub(const Matrix& p, const Matrix& z, const NoHubConfig& cfg,
                         const SupportLabelInfo* info = nullptr) {
    return detail::eval_gradient(p, z, detail::symmetric_gram(z), cfg, info);
}

/// One bias-corrected Adam step. Returns the updated state and the updated
/// parameters before any reprojection.
inline std::pair<AdamState, Matrix> adam_step(AdamState state, const Matrix& grad, Matrix z,
                                              double eta, double beta1 = 0.9,
                                              double beta2 = 0.999, double eps = 1e-8) {
    state.step_count += 1;
    state.first_moment = beta1 * state.first_moment + (1.0 - beta1) * grad;
    state.second_moment = beta2 * state.second_moment + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
    const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));
    const Matrix m_hat = state.first_moment / bias1;
    const Matrix v_hat = state.second_moment / bias2;
    z -= eta * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
    return {std::move(state), std::move(z)};
}

/// Called after each reprojection with the iteration number (1-based) and the
/// current embeddings.
using IterationObserver = std::function<void(int, const Matrix&)>;

/// Full embedding pipeline: cosine similarities (label-informed for NoHubS),
/// per-point kappa calibration, joint affinities, PCA initialization on the
/// normalized rows, then `iterations` rounds of gradient / Adam / row
/// renormalization. The loss trace is recorded after each update.
inline EmbeddingResult embed(const Matrix& x, const NoHubConfig& cfg,
                             const SupportLabelInfo* info = nullptr,
                             const IterationObserver& observer = {}) {
    validate_config(cfg);
    validate_features(x);
    const Index n = x.rows();
    if (cfg.variant == Variant::NoHubS) {
        require(info != nullptr, "NoHubS requires support label info");
        require(info->size() == n, "support label info length mismatch");
    }

    // Everything downstream depends on the input only through the normalized
    // rows, so exact rescalings of x cannot change the result.
    const Matrix u = l2_normalize_rows(x);
    Matrix s = detail::symmetric_gram(u);
    s.diagonal().setOnes();
    if (cfg.variant == Variant::NoHubS) s = label_informed_gram(s, *info);

    KappaVector kappas = calibrate_kappa(s, cfg.perplexity);
    const Matrix p = symmetrize(conditional_affinities(s, kappas));

    const Index d_init = std::min({cfg.dim, n, x.cols()});
    PcaResult pca = pca_project(u, d_init);
    Matrix z = Matrix::Zero(n, cfg.dim);
    z.leftCols(d_init) = pca.scores;
    z = l2_normalize_rows(z);

    const SupportLabelInfo* mask = cfg.variant == Variant::NoHubS ? info : nullptr;
    AdamState state = AdamState::zero(n, cfg.dim);
    EmbeddingResult result;
    result.pca_rank_deficient = pca.rank_deficient || d_init < cfg.dim;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));

    for (int t = 1; t <= cfg.iterations; ++t) {
        const Matrix gram = detail::symmetric_gram(z);
        const Matrix grad = detail::eval_gradient(p, z, gram, cfg, mask);
        auto [next_state, z_raw] =
            adam_step(std::move(state), grad, std::move(z), cfg.learning_rate, cfg.adam_beta1,
                      cfg.adam_beta2, cfg.adam_eps);
        state = std::move(next_state);
        if (!z_raw.allFinite()) throw NonFiniteError(t);
        z = l2_normalize_rows(z_raw);
        result.loss_trace.push_back(detail::eval_losses(p, detail::symmetric_gram(z), cfg, mask));
        if (observer) observer(t, z);
    }

    result.embeddings = std::move(z);
    result.kappas = std::move(kappas);
    return result;
}

/// KL(P || Q) with q_ij = exp(kappa z_i . z_j) / sum_{l != m} exp(kappa z_l . z_m).
inline double kl_divergence(const Matrix& p, const Matrix& z, double kappa) {
    const Matrix gram = detail::symmetric_gram(z);
    const double log_partition = detail::eval_unif(gram, kappa, nullptr, 1.0, false).loss;
    double kl = 0.0;
    const Index n = gram.rows();
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
            if (i == j || p(i, j) <= 0.0) continue;
            const double log_q = kappa * gram(i, j) - log_partition;
            kl += p(i, j) * (std::log(p(i, j)) - log_q);
        }
    }
    return kl;
}

/// Renyi 2-entropy estimate from the Gaussian kernel over pairwise distances,
/// self-pairs excluded: -log( (1/n^2) sum_{l != m} exp(-kappa/2 ||z_l - z_m||^2) ).
inline double renyi2_entropy(const Matrix& z, double kappa) {
    const Index n = z.rows();
    double peak = -std::numeric_limits<double>::infinity();
    Matrix expo(n, n);
    for (Index l = 0; l < n; ++l) {
        for (Index m = 0; m < n; ++m) {
            if (l == m) continue;
            expo(l, m) = -0.5 * kappa * (z.row(l) - z.row(m)).squaredNorm();
            peak = std::max(peak, expo(l, m));
        }
    }
    double total = 0.0;
    for (Index l = 0; l < n; ++l) {
        for (Index m = 0; m < n; ++m) {
            if (l != m) total += std::exp(expo(l, m) - peak);
        }
    }
    const double log_mean = peak + std::log(total) - 2.0 * std::log(static_cast<double>(n));
    return -log_mean;
}

}  // namespace nohub
