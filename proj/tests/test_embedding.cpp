#include "nohub/embedding.hpp"
#include "nohub/episodes.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>

using namespace nohub;

namespace {

Matrix random_features(Index n, Index k, std::uint64_t seed) {
    GaussianSampler gauss(seed);
    Matrix m(n, k);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < k; ++j) m(i, j) = gauss.next();
    return m;
}

// Valid joint affinity built directly: abs-random, symmetrized, zero diagonal,
// normalized to total 1.
Matrix random_affinity(Index n, std::uint64_t seed) {
    GaussianSampler gauss(seed);
    Matrix p(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) p(i, j) = std::abs(gauss.next()) + 0.01;
    p = ((p + p.transpose()) / 2.0).eval();
    p.diagonal().setZero();
    p /= p.sum();
    return p;
}

Matrix affinity_from_features(const Matrix& x, double perplexity,
                              const SupportLabelInfo* info = nullptr) {
    Matrix s = cosine_matrix(x);
    if (info) s = label_informed_gram(s, *info);
    const KappaVector kv = calibrate_kappa(s, perplexity);
    return symmetrize(conditional_affinities(s, kv));
}

double frob_diff(const Matrix& a, const Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

bool bit_equal(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

void quantize(Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = std::round(m(i, j) * 1048576.0) / 1048576.0;
}

}  // namespace

TEST_CASE("default configurations carry the reference hyperparameters") {
    const NoHubConfig plain = default_config(Variant::NoHub);
    CHECK(plain.perplexity == 45.0);
    CHECK(plain.iterations == 50);
    CHECK(plain.alpha == 0.2);
    CHECK(plain.learning_rate == 0.1);
    CHECK(plain.kappa == 0.5);
    CHECK(plain.dim == 400);

    const NoHubConfig labeled = default_config(Variant::NoHubS);
    CHECK(labeled.iterations == 150);
    CHECK(labeled.epsilon == 8.0);
    CHECK(labeled.adam_beta1 == 0.9);
    CHECK(labeled.adam_beta2 == 0.999);
    CHECK(labeled.adam_eps == 1e-8);
}

TEST_CASE("loss_lsp closed-form cases and Laplacian identity") {
    Matrix z(2, 3);
    z << 1, 0, 0, 1, 0, 0;
    Matrix p(2, 2);
    p << 0, 0.5, 0.5, 0;
    const double kappa = 1.3;
    CHECK(loss_lsp(p, z, kappa) == Catch::Approx(-kappa).margin(1e-12));

    Matrix orth(2, 3);
    orth << 1, 0, 0, 0, 1, 0;
    CHECK(loss_lsp(p, orth, kappa) == Catch::Approx(0.0).margin(1e-15));

    // Laplacian form: sum ||z_i - z_j||^2 (kappa p_ij / 2) - kappa
    const Matrix zr = sample_uniform_sphere(8, 4, 3);
    const Matrix pr = random_affinity(8, 5);
    double laplacian = 0.0;
    for (Index i = 0; i < 8; ++i)
        for (Index j = 0; j < 8; ++j)
            laplacian += (zr.row(i) - zr.row(j)).squaredNorm() * kappa * pr(i, j) / 2.0;
    laplacian -= kappa;
    CHECK(loss_lsp(pr, zr, kappa) == Catch::Approx(laplacian).margin(1e-10));
}

TEST_CASE("loss_unif coincident and antipodal pairs") {
    Matrix same(2, 3);
    same << 1, 0, 0, 1, 0, 0;
    CHECK(loss_unif(same, 0.5) == Catch::Approx(std::log(2.0) + 0.5).margin(1e-12));

    Matrix anti(2, 3);
    anti << 1, 0, 0, -1, 0, 0;
    CHECK(loss_unif(anti, 0.5) == Catch::Approx(std::log(2.0) - 0.5).margin(1e-12));
}

TEST_CASE("loss_unif equals 2 ln n + kappa - renyi2_entropy") {
    for (std::uint64_t seed : {1, 2, 3}) {
        const Index n = 6 + static_cast<Index>(seed * 3);
        const Matrix z = sample_uniform_sphere(n, 5, seed);
        const double kappa = 0.3 + 0.4 * static_cast<double>(seed);
        const double lhs = loss_unif(z, kappa);
        const double rhs = 2.0 * std::log(static_cast<double>(n)) + kappa - renyi2_entropy(z, kappa);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-10));
    }
}

TEST_CASE("renyi2_entropy coincident case and monotone spreading") {
    Matrix same(2, 3);
    same << 0, 0, 1, 0, 0, 1;
    CHECK(renyi2_entropy(same, 0.5) == Catch::Approx(std::log(2.0)).margin(1e-12));

    // one-parameter family: points on a circle arc that widens
    double prev_h = -std::numeric_limits<double>::infinity();
    double prev_dist = 0.0;
    for (double arc : {0.1, 0.4, 0.8, 1.6, 3.0}) {
        Matrix z(8, 2);
        for (Index i = 0; i < 8; ++i) {
            const double theta = arc * (static_cast<double>(i) / 7.0 - 0.5);
            z(i, 0) = std::cos(theta);
            z(i, 1) = std::sin(theta);
        }
        double mean_dist = 0.0;
        for (Index i = 0; i < 8; ++i)
            for (Index j = 0; j < 8; ++j) mean_dist += (z.row(i) - z.row(j)).norm();
        mean_dist /= 64.0;
        const double h = renyi2_entropy(z, 1.0);
        CHECK(mean_dist > prev_dist);
        CHECK(h > prev_h);
        prev_h = h;
        prev_dist = mean_dist;
    }
}

TEST_CASE("loss_nohub combines the two terms") {
    Matrix z(2, 3);
    z << 1, 0, 0, 1, 0, 0;
    Matrix p(2, 2);
    p << 0, 0.5, 0.5, 0;
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.kappa = 0.5;

    cfg.alpha = 1.0;
    CHECK(loss_nohub(p, z, cfg).total == Catch::Approx(loss_lsp(p, z, 0.5)).margin(1e-15));
    cfg.alpha = 0.0;
    CHECK(loss_nohub(p, z, cfg).total == Catch::Approx(loss_unif(z, 0.5)).margin(1e-15));
    cfg.alpha = 0.2;
    const LossTriple t = loss_nohub(p, z, cfg);
    CHECK(t.total ==
          Catch::Approx(0.2 * (-0.5) + 0.8 * (std::log(2.0) + 0.5)).margin(1e-12));
}

TEST_CASE("grad_nohub closed form for uniform affinities and equal rows") {
    const Index n = 6;
    const Index d = 4;
    Matrix z(n, d);
    Matrix row(1, d);
    row << 0.5, -0.5, 0.5, 0.5;
    for (Index i = 0; i < n; ++i) z.row(i) = row.row(0);
    Matrix p = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
    p.diagonal().setZero();
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.alpha = 1.0;
    cfg.kappa = 0.7;
    const Matrix g = grad_nohub(p, z, cfg);
    const Matrix expected =
        -2.0 * cfg.kappa * (static_cast<double>(n - 1) / static_cast<double>(n)) * z;
    CHECK(frob_diff(g, expected) < 1e-12);
}

TEST_CASE("grad_nohub matches central finite differences") {
    int case_id = 0;
    for (double alpha : {0.0, 0.2, 1.0}) {
        for (int variant = 0; variant < 2; ++variant) {
            ++case_id;
            const Index n = 7 + case_id % 4;
            const Index d = 3 + case_id % 5;
            const Matrix x = random_features(n, 6, 100 + case_id);
            std::vector<std::int64_t> labels(static_cast<std::size_t>(n), -1);
            labels[0] = 0;
            labels[1] = 0;
            labels[2] = 1;
            labels[3] = 1;
            const SupportLabelInfo info = SupportLabelInfo::from_labels(labels);
            const SupportLabelInfo* ip = variant ? &info : nullptr;

            NoHubConfig cfg = default_config(variant ? Variant::NoHubS : Variant::NoHub);
            cfg.alpha = alpha;
            cfg.kappa = 0.8;
            cfg.epsilon = 8.0;
            const Matrix p = affinity_from_features(x, 4.0, ip);
            const Matrix z = sample_uniform_sphere(n, d, 200 + case_id);

            const Matrix g = grad_nohub(p, z, cfg, ip);
            const double h = 1e-5;
            for (Index i = 0; i < n; ++i) {
                for (Index j = 0; j < d; ++j) {
                    Matrix zp = z;
                    Matrix zm = z;
                    zp(i, j) += h;
                    zm(i, j) -= h;
                    const double fd =
                        (loss_nohub(p, zp, cfg, ip).total - loss_nohub(p, zm, cfg, ip).total) /
                        (2.0 * h);
                    const double rel = std::abs(g(i, j) - fd) / std::max(std::abs(fd), 1e-3);
                    REQUIRE(rel <= 1e-4);
                }
            }
        }
    }
}

TEST_CASE("grad_nohub respects antipodal symmetry at alpha = 0") {
    const Index half = 4;
    const Matrix top = sample_uniform_sphere(half, 5, 11);
    Matrix z(2 * half, 5);
    z.topRows(half) = top;
    z.bottomRows(half) = -top;
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.alpha = 0.0;
    cfg.kappa = 1.1;
    const Matrix p = random_affinity(2 * half, 13);
    const Matrix g = grad_nohub(p, z, cfg);
    CHECK(frob_diff(g.topRows(half), Matrix(-g.bottomRows(half))) < 1e-12);
}

TEST_CASE("adam_step first-step magnitude, zero gradient, and scripted oracle") {
    const double eta = 0.1;
    AdamState state = AdamState::zero(2, 2);
    Matrix z = Matrix::Zero(2, 2);
    Matrix g(2, 2);
    g << 3.0, -2.0, 0.5, -1e-12;
    auto [s1, z1] = adam_step(state, g, z, eta);
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            const double step = z1(i, j) - z(i, j);
            CHECK(std::abs(step) <= eta + 1e-12);
            if (std::abs(g(i, j)) > 1e-6) {
                CHECK(step * g(i, j) < 0.0);  // opposite sign of the gradient
                CHECK(std::abs(step) == Catch::Approx(eta).epsilon(1e-6));
            }
        }
    }

    // zero gradient forever leaves parameters unchanged
    AdamState zs = AdamState::zero(1, 3);
    Matrix zz(1, 3);
    zz << 0.3, -0.4, 0.5;
    const Matrix original = zz;
    for (int t = 0; t < 5; ++t) {
        auto [ns, nz] = adam_step(zs, Matrix::Zero(1, 3), zz, eta);
        zs = ns;
        zz = nz;
    }
    CHECK(bit_equal(zz, original));

    // three scripted steps on a 1-D toy against a hand-rolled recurrence
    const double grads[3] = {1.0, -0.5, 0.25};
    double m = 0.0, v = 0.0, theta = 0.7;
    AdamState st = AdamState::zero(1, 1);
    Matrix zt(1, 1);
    zt << 0.7;
    for (int t = 1; t <= 3; ++t) {
        m = 0.9 * m + 0.1 * grads[t - 1];
        v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
        const double mh = m / (1.0 - std::pow(0.9, t));
        const double vh = v / (1.0 - std::pow(0.999, t));
        theta -= eta * mh / (std::sqrt(vh) + 1e-8);
        Matrix gt(1, 1);
        gt << grads[t - 1];
        auto [ns, nz] = adam_step(st, gt, zt, eta);
        st = ns;
        zt = nz;
        REQUIRE(zt(0, 0) == Catch::Approx(theta).margin(1e-12));
    }
}

TEST_CASE("embed descends the uniformity loss at alpha = 0") {
    const Matrix x = random_features(20, 8, 55);
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.alpha = 0.0;
    cfg.perplexity = 8;
    cfg.dim = 6;
    cfg.iterations = 40;
    const EmbeddingResult r = embed(x, cfg);
    REQUIRE(r.loss_trace.size() == 40);
    CHECK(r.loss_trace.back().unif <= r.loss_trace.front().unif);
}

TEST_CASE("embed keeps every iterate on the sphere and is deterministic") {
    const Matrix x = random_features(14, 10, 77);
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.perplexity = 6;
    cfg.dim = 5;
    cfg.iterations = 15;
    int checked = 0;
    const auto observer = [&](int, const Matrix& z) {
        for (Index i = 0; i < z.rows(); ++i)
            REQUIRE(std::abs(z.row(i).norm() - 1.0) < 1e-9);
        ++checked;
    };
    const EmbeddingResult a = embed(x, cfg, nullptr, observer);
    CHECK(checked == 15);
    const EmbeddingResult b = embed(x, cfg);
    CHECK(bit_equal(a.embeddings, b.embeddings));
    validate_embeddings(a.embeddings);
}

TEST_CASE("embed is bit-invariant to a global x10 feature scale") {
    Matrix x = random_features(16, 12, 99);
    quantize(x);  // entries on a 2^-20 grid, so 10 * x is exact
    const Matrix scaled = 10.0 * x;
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.perplexity = 7;
    cfg.dim = 6;
    cfg.iterations = 12;
    const EmbeddingResult a = embed(x, cfg);
    const EmbeddingResult b = embed(scaled, cfg);
    CHECK(bit_equal(a.embeddings, b.embeddings));
}

TEST_CASE("embed validates its configuration and inputs") {
    const Matrix x = random_features(10, 4, 5);
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.perplexity = 5;
    cfg.dim = 4;

    NoHubConfig bad = cfg;
    bad.alpha = 1.5;
    CHECK_THROWS_AS(embed(x, bad), ValidationError);
    bad = cfg;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(embed(x, bad), ValidationError);
    bad = cfg;
    bad.perplexity = 50.0;  // > n-1
    CHECK_THROWS_AS(embed(x, bad), PerplexityOutOfRangeError);

    NoHubConfig s_cfg = default_config(Variant::NoHubS);
    s_cfg.perplexity = 5;
    s_cfg.dim = 4;
    CHECK_THROWS_AS(embed(x, s_cfg), ValidationError);  // missing label info
}

TEST_CASE("kl_divergence vanishes when P equals Q and is non-negative") {
    const Matrix z = sample_uniform_sphere(9, 4, 21);
    const double kappa = 0.9;
    // engineer P := Q from the embedding itself
    const Matrix gram = inner_product_matrix(z);
    Matrix q(9, 9);
    double total = 0.0;
    for (Index i = 0; i < 9; ++i)
        for (Index j = 0; j < 9; ++j)
            if (i != j) total += std::exp(kappa * gram(i, j));
    for (Index i = 0; i < 9; ++i)
        for (Index j = 0; j < 9; ++j)
            q(i, j) = i == j ? 0.0 : std::exp(kappa * gram(i, j)) / total;
    CHECK(kl_divergence(q, z, kappa) == Catch::Approx(0.0).margin(1e-9));

    for (std::uint64_t seed : {4, 5, 6}) {
        const Matrix p = random_affinity(9, seed);
        CHECK(kl_divergence(p, z, kappa) >= -1e-12);
    }
}

TEST_CASE("KL decomposition identity holds for both variants") {
    for (std::uint64_t seed : {10, 11, 12, 13}) {
        const Index n = 8 + static_cast<Index>(seed % 3);
        const Matrix x = random_features(n, 6, seed);
        std::vector<std::int64_t> labels(static_cast<std::size_t>(n), -1);
        labels[0] = 0;
        labels[1] = 0;
        labels[2] = 1;
        const SupportLabelInfo info = SupportLabelInfo::from_labels(labels);
        const bool with_labels = seed % 2 == 0;
        const Matrix p = affinity_from_features(x, 5.0, with_labels ? &info : nullptr);
        const Matrix z = sample_uniform_sphere(n, 4, seed + 50);
        const double kappa = 0.6;

        double p_log_p = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j && p(i, j) > 0.0) p_log_p += p(i, j) * std::log(p(i, j));

        const double lhs = kl_divergence(p, z, kappa) - p_log_p;
        const double rhs = loss_lsp(p, z, kappa) + loss_unif(z, kappa);
        CHECK(lhs == Catch::Approx(rhs).margin(1e-9));
    }
}

TEST_CASE("label mask removes same-class support pairs from L_Unif") {
    // z_0, z_1 form a same-class support pair; rotate z_0 inside the subspace
    // that keeps every other inner product fixed, so only the excluded pair's
    // similarity changes.
    const Index n = 5;
    const Index d = 8;
    const Matrix z = sample_uniform_sphere(n, d, 31);
    const SupportLabelInfo info = SupportLabelInfo::from_labels({0, 0, 1, -1, -1});
    const double kappa = 0.9;
    const double epsilon = 8.0;

    // orthonormal basis of span{z_2, z_3, z_4}
    Matrix others(d, 3);
    others.col(0) = z.row(2).transpose();
    others.col(1) = z.row(3).transpose();
    others.col(2) = z.row(4).transpose();
    const Eigen::HouseholderQR<Matrix> qr(others);
    const Matrix basis = qr.householderQ() * Matrix::Identity(d, 3);

    const Vector z0 = z.row(0).transpose();
    const Vector projected = basis * (basis.transpose() * z0);
    const Vector residual = z0 - projected;
    REQUIRE(residual.norm() > 1e-8);

    // unit direction in the orthogonal complement, not parallel to residual
    Vector probe = Vector::Zero(d);
    probe(d - 1) = 1.0;
    Vector comp = probe - basis * (basis.transpose() * probe);
    comp -= residual * (residual.dot(comp) / residual.squaredNorm());
    REQUIRE(comp.norm() > 1e-8);
    comp.normalize();

    const double rho = residual.norm();
    const Vector rhat = residual / rho;
    Matrix z_perturbed = z;
    const double angle = 0.7;
    z_perturbed.row(0) =
        (projected + rho * (std::cos(angle) * rhat + std::sin(angle) * comp)).transpose();

    // all inner products except (0,1) are preserved up to roundoff
    for (Index j = 2; j < n; ++j)
        REQUIRE(std::abs(z.row(0).dot(z.row(j)) - z_perturbed.row(0).dot(z_perturbed.row(j))) <
                1e-12);
    REQUIRE(std::abs(z.row(0).dot(z.row(1)) - z_perturbed.row(0).dot(z_perturbed.row(1))) > 1e-3);

    const double masked_before = loss_unif(z, kappa, &info, epsilon);
    const double masked_after = loss_unif(z_perturbed, kappa, &info, epsilon);
    CHECK(masked_before == Catch::Approx(masked_after).margin(1e-9));

    const double plain_before = loss_unif(z, kappa);
    const double plain_after = loss_unif(z_perturbed, kappa);
    CHECK(std::abs(plain_before - plain_after) > 1e-6);
}

TEST_CASE("label mask exaggerates different-class support pairs by epsilon") {
    Matrix z(2, 4);
    z << 0.6, 0.8, 0, 0, 0.8, -0.6, 0, 0;
    const SupportLabelInfo info = SupportLabelInfo::from_labels({0, 1});
    const double kappa = 0.5;
    const double epsilon = 8.0;
    const double s = z.row(0).dot(z.row(1));
    const double masked = loss_unif(z, kappa, &info, epsilon);
    const double plain = loss_unif(z, kappa);
    // log of the pair-weight ratio is kappa (epsilon - 1) s
    CHECK(masked - plain == Catch::Approx(kappa * (epsilon - 1.0) * s).margin(1e-12));
}

TEST_CASE("fully masked pair set raises EmptySum") {
    Matrix z(2, 3);
    z << 1, 0, 0, 0, 1, 0;
    const SupportLabelInfo info = SupportLabelInfo::from_labels({0, 0});
    CHECK_THROWS_AS(loss_unif(z, 0.5, &info, 8.0), EmptySumError);
}

TEST_CASE("minimizing L_Unif alone spreads points toward the uniform law") {
    const Matrix x = random_features(64, 3, 2024);
    NoHubConfig cfg = default_config(Variant::NoHub);
    cfg.alpha = 0.0;
    cfg.kappa = 1.0;
    cfg.perplexity = 10;
    cfg.dim = 3;
    cfg.iterations = 600;
    const EmbeddingResult r = embed(x, cfg);
    const Vector mean = r.embeddings.colwise().mean().transpose();
    CHECK(mean.norm() < 0.05);

    // pairwise-cosine histogram against a sampler-established tolerance band
    const int bins = 6;
    const auto histogram = [&](const Matrix& z) {
        std::vector<double> h(bins, 0.0);
        int pairs = 0;
        for (Index i = 0; i < z.rows(); ++i) {
            for (Index j = i + 1; j < z.rows(); ++j) {
                const double c = std::clamp(z.row(i).dot(z.row(j)), -1.0, 1.0);
                int b = static_cast<int>((c + 1.0) / 2.0 * bins);
                b = std::clamp(b, 0, bins - 1);
                h[static_cast<std::size_t>(b)] += 1.0;
                ++pairs;
            }
        }
        for (double& v : h) v /= pairs;
        return h;
    };

    std::vector<double> lo(bins, 1.0);
    std::vector<double> hi(bins, 0.0);
    for (std::uint64_t s = 0; s < 40; ++s) {
        const auto h = histogram(sample_uniform_sphere(64, 3, 3000 + s));
        for (int b = 0; b < bins; ++b) {
            lo[static_cast<std::size_t>(b)] = std::min(lo[static_cast<std::size_t>(b)], h[static_cast<std::size_t>(b)]);
            hi[static_cast<std::size_t>(b)] = std::max(hi[static_cast<std::size_t>(b)], h[static_cast<std::size_t>(b)]);
        }
    }
    const auto h = histogram(r.embeddings);
    for (int b = 0; b < bins; ++b) {
        const double slack = 0.5 * (hi[static_cast<std::size_t>(b)] - lo[static_cast<std::size_t>(b)]) + 0.01;
        CHECK(h[static_cast<std::size_t>(b)] >= lo[static_cast<std::size_t>(b)] - slack);
        CHECK(h[static_cast<std::size_t>(b)] <= hi[static_cast<std::size_t>(b)] + slack);
    }
}
