#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace nohub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error categories map onto process exit codes in the CLI:
// validation -> 2, numeric -> 3, I/O -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ZeroRowError : ValidationError {
    Index row;
    explicit ZeroRowError(Index r)
        : ValidationError("row " + std::to_string(r) + " has norm below 1e-12"), row(r) {}
};

struct DimTooLargeError : ValidationError {
    using ValidationError::ValidationError;
};

struct NotNormalizedError : ValidationError {
    using ValidationError::ValidationError;
};

struct PerplexityOutOfRangeError : ValidationError {
    using ValidationError::ValidationError;
};

struct EmptySumError : ValidationError {
    using ValidationError::ValidationError;
};

struct BadKError : ValidationError {
    using ValidationError::ValidationError;
};

struct ZeroVarianceError : ValidationError {
    Index row;
    explicit ZeroVarianceError(Index r)
        : ValidationError("row " + std::to_string(r) + " has zero feature variance"), row(r) {}
};

struct InsufficientPoolError : ValidationError {
    using ValidationError::ValidationError;
};

struct NonFiniteError : NumericError {
    int iteration;
    explicit NonFiniteError(int iter)
        : NumericError("non-finite embedding entries at iteration " + std::to_string(iter)),
          iteration(iter) {}
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw ValidationError(what);
}

/// Feature matrices must hold at least two finite rows with no all-zero row.
inline void validate_features(const Matrix& x) {
    require(x.rows() >= 2, "feature matrix needs n >= 2 rows");
    require(x.cols() >= 1, "feature matrix needs k >= 1 columns");
    if (!x.allFinite()) throw ValidationError("feature matrix has non-finite entries");
    for (Index i = 0; i < x.rows(); ++i) {
        if (x.row(i).cwiseAbs().maxCoeff() == 0.0) throw ZeroRowError(i);
    }
}

inline void validate_embeddings(const Matrix& z, double tol = 1e-9) {
    if (!z.allFinite()) throw ValidationError("embedding matrix has non-finite entries");
    for (Index i = 0; i < z.rows(); ++i) {
        if (std::abs(z.row(i).norm() - 1.0) > tol)
            throw ValidationError("embedding row " + std::to_string(i) + " is not unit-norm");
    }
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for episode `index` of a run; stable across thread counts.
inline std::uint64_t episode_seed(std::uint64_t run_seed, std::uint64_t index) {
    return splitmix64(run_seed ^ splitmix64(index + 1));
}

/// Deterministic standard-normal stream (Box-Muller over mt19937_64).
/// The C++ distributions are implementation-defined, this is not.
class GaussianSampler {
public:
    explicit GaussianSampler(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
        const double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;          // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform in [0, bound), bound > 0. Modulo bias is < 2^-53 for desk-scale bounds.
    std::uint64_t next_below(std::uint64_t bound) { return eng_() % bound; }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace nohub
