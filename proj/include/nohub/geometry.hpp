#pragma once

#include "nohub/core.hpp"

#include <algorithm>
#include <cmath>

namespace nohub {

/// Row-wise L2 normalization onto the unit sphere.
/// Each row is divided by its peak magnitude before the norm is taken:
/// x/peak has the same exact real value for x and c*x, so inputs that are
/// exact scalar multiples of each other normalize bit-identically.
inline Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Index i = 0; i < m.rows(); ++i) {
        const double peak = m.row(i).cwiseAbs().maxCoeff();
        if (!(peak > 0.0)) throw ZeroRowError(i);
        const Eigen::RowVectorXd scaled = m.row(i) / peak;
        const double scaled_norm = scaled.norm();
        if (peak * scaled_norm < 1e-12) throw ZeroRowError(i);
        out.row(i) = scaled / scaled_norm;
    }
    return out;
}

namespace detail {

// Exactly symmetric Gram product a * a^T (lower triangle computed once, mirrored).
inline Matrix symmetric_gram(const Matrix& a) {
    Matrix g = Matrix::Zero(a.rows(), a.rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
    return g;
}

}  // namespace detail

/// Pairwise cosine similarities; diagonal pinned to 1.
inline Matrix cosine_matrix(const Matrix& m) {
    const Matrix u = l2_normalize_rows(m);
    Matrix g = detail::symmetric_gram(u);
    g.diagonal().setOnes();
    return g;
}

/// Pairwise inner products z_i . z_j of unit-norm rows.
inline Matrix inner_product_matrix(const Matrix& z) {
    validate_embeddings(z);
    return detail::symmetric_gram(z);
}

/// n i.i.d. draws from the uniform distribution on the unit sphere in R^d,
/// via row-normalized standard normals. Deterministic per seed.
inline Matrix sample_uniform_sphere(Index n, Index d, std::uint64_t seed) {
    require(n >= 1, "sample_uniform_sphere needs n >= 1");
    require(d >= 2, "sample_uniform_sphere needs d >= 2");
    GaussianSampler gauss(seed);
    Matrix z(n, d);
    for (Index i = 0; i < n; ++i) {
        do {
            for (Index j = 0; j < d; ++j) z(i, j) = gauss.next();
        } while (z.row(i).norm() < 1e-12);
        const double peak = z.row(i).cwiseAbs().maxCoeff();
        const Eigen::RowVectorXd scaled = z.row(i) / peak;
        z.row(i) = scaled / scaled.norm();
    }
    return z;
}

struct PcaResult {
    Matrix scores;        ///< n x d projections onto the principal directions.
    int rank = 0;         ///< numerical rank of the centered data
    bool rank_deficient = false;  ///< true when d exceeds the rank; missing columns are zero
};

/// Projects rows onto the top-d principal directions of the row-centered data.
/// Directions are ordered by descending singular value and sign-fixed so the
/// largest-magnitude coordinate of each direction is positive (first index on ties).
inline PcaResult pca_project(const Matrix& m, Index d) {
    const Index n = m.rows();
    const Index k = m.cols();
    require(d >= 1, "pca_project needs d >= 1");
    if (d > std::min(n, k))
        throw DimTooLargeError("pca_project: d exceeds min(n, k) = " +
                               std::to_string(std::min(n, k)));

    const Eigen::RowVectorXd mean = m.colwise().mean();
    const Matrix centered = m.rowwise() - mean;

    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cutoff =
        sv.size() > 0 ? sv(0) * static_cast<double>(std::max(n, k)) *
                            std::numeric_limits<double>::epsilon()
                      : 0.0;

    PcaResult result;
    result.scores = Matrix::Zero(n, d);
    for (Index j = 0; j < d && j < sv.size(); ++j) {
        if (sv(j) <= cutoff) break;
        Index peak_row = 0;
        svd.matrixV().col(j).cwiseAbs().maxCoeff(&peak_row);
        const double sign = svd.matrixV()(peak_row, j) < 0.0 ? -1.0 : 1.0;
        result.scores.col(j) = sign * sv(j) * svd.matrixU().col(j);
        ++result.rank;
    }
    result.rank_deficient = result.rank < d;
    return result;
}

}  // namespace nohub
