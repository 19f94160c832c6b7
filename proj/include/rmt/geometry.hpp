#pragma once

/// Rotation sampling, Gram matrices and their canonical factorization,
/// and the projected-Gram locus used to anchor partial views.

#include <rmt/common.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace rmt {

/// A proper rotation of 3-space, stored as its matrix.
struct Rotation3 {
    Mat3 m = Mat3::Identity();

    Rotation3() = default;
    explicit Rotation3(const Mat3& r) : m(r) {}

    /// True when m is orthogonal with determinant +1 up to tol.
    bool is_valid(double tol = 1e-9) const {
        return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
               std::abs(m.determinant() - 1.0) <= tol;
    }
};

/// K position vectors in 3-space, one per column.
struct Ensemble3 {
    Matrix m; // 3 x K

    Ensemble3() : m(3, 0) {}
    explicit Ensemble3(Matrix cols) : m(std::move(cols)) {
        if (m.rows() != 3) throw DimensionMismatch("Ensemble3 expects 3 rows");
    }

    int K() const { return static_cast<int>(m.cols()); }
};

/// Matrix of pairwise inner products of an ensemble. Symmetric and
/// positive semidefinite by construction; rank at most the ambient
/// dimension of the vectors it came from.
struct GramMatrix {
    Matrix m; // K x K

    GramMatrix() : m(0, 0) {}
    explicit GramMatrix(Matrix g) : m(std::move(g)) {
        if (m.rows() != m.cols()) throw DimensionMismatch("gram matrix must be square");
    }

    int size() const { return static_cast<int>(m.rows()); }
};

/// Points on the projected-Gram locus of one fixed ensemble, kept with
/// the seed that generated their directions.
struct RomanSample {
    std::vector<Matrix> points;
    std::uint64_t seed = 0;
};

/// Draws a rotation from the invariant distribution on SO(3).
///
/// QR-decomposes a 3x3 standard normal matrix, flips column signs so the
/// triangular factor has a nonnegative diagonal (making Q invariant on
/// O(3)), then negates the last column of reflections. Right-translating
/// the det = -1 coset by a fixed reflection preserves invariance, so the
/// result is exactly uniform on SO(3).
inline Rotation3 sample_haar_rotation(Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat3 a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Mat3> qr(a);
    Mat3 q = qr.householderQ();
    Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < 3; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    if (q.determinant() < 0) q.col(2) = -q.col(2);
    return Rotation3(q);
}

inline Rotation3 sample_haar_rotation(std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return sample_haar_rotation(rng);
}

/// Applies u to every column of the ensemble and drops the third
/// coordinate, i.e. the orthographic view along the rotated z-axis.
inline Matrix project(const Rotation3& u, const Ensemble3& vectors) {
    return (u.m * vectors.m).topRows(2);
}

/// Gram matrix of the columns of `vectors` (any ambient dimension).
inline GramMatrix gram(const Matrix& vectors) {
    const auto k = vectors.cols();
    Matrix g(k, k);
    g.setZero();
    g.selfadjointView<Eigen::Lower>().rankUpdate(vectors.transpose());
    g.triangularView<Eigen::StrictlyUpper>() = g.transpose().triangularView<Eigen::StrictlyUpper>();
    return GramMatrix(std::move(g));
}

/// Factors a PSD matrix of rank <= target_rank into a canonical
/// 3 x K ensemble V with gram(V) = g.
///
/// Eigenvalues below rank_tol (relative to the largest) count as zero;
/// more than target_rank surviving eigenvalues raises NotLowRank, and an
/// eigenvalue below -psd_tol (relative) raises IndefiniteGram. The factor
/// is reduced to row echelon form by a rotation, with the leading nonzero
/// entry of every row made positive, so equal Gram matrices map to the
/// identical factor no matter which ensemble produced them.
inline Ensemble3 factor_gram(const GramMatrix& g, int target_rank = 3, double rank_tol = 1e-6,
                             double psd_tol = 1e-6) {
    const int k = g.size();
    if (target_rank < 0 || target_rank > 3) throw ConfigError("factor target rank must be 0..3");
    if (k > 0) {
        double scale = std::max(1.0, g.m.cwiseAbs().maxCoeff());
        if ((g.m - g.m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
            throw DataError("gram matrix is not symmetric");
    }
    Matrix v = Matrix::Zero(3, k);
    if (k == 0) return Ensemble3(v);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.m);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    const Vector& lam = eig.eigenvalues(); // ascending
    const double lam_max = std::max(lam(k - 1), 0.0);
    if (lam(0) < -psd_tol * std::max(lam_max, 1e-300))
        throw IndefiniteGram("gram matrix has a significantly negative eigenvalue");

    const double cut = rank_tol * lam_max;
    int rank = 0;
    for (int i = 0; i < k; ++i)
        if (lam(i) > cut) ++rank;
    if (rank > target_rank) throw NotLowRank("gram matrix rank exceeds the factor rank");

    for (int r = 0; r < rank; ++r) {
        int src = k - 1 - r; // largest eigenvalues first
        v.row(r) = std::sqrt(std::max(lam(src), 0.0)) * eig.eigenvectors().col(src).transpose();
    }

    // Rotate to echelon form: QR of the 3 x K factor yields an upper
    // trapezoidal matrix with the same Gram matrix.
    Eigen::HouseholderQR<Matrix> qr(v);
    Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    v = r.topRows(3);

    const double zero_tol = 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < k; ++j) {
            if (std::abs(v(i, j)) > zero_tol) {
                if (v(i, j) < 0) v.row(i) = -v.row(i);
                break;
            }
        }
    }
    return Ensemble3(std::move(v));
}

/// Quartic-surface chart: maps a unit direction to the off-diagonal
/// entries of its rank-one projector, (e2*e3, e1*e3, e1*e2).
inline Vec3 roman_embed(const Vec3& e) {
    if (std::abs(e.norm() - 1.0) > 1e-9) throw NotUnit("direction must be a unit vector");
    return Vec3(e(1) * e(2), e(0) * e(2), e(0) * e(1));
}

/// Gram matrix of the ensemble after removing its component along e:
/// V^T (I - e e^T) V for a 3 x K factor V.
inline GramMatrix projected_gram_at(const Ensemble3& factor, const Vec3& e) {
    if (std::abs(e.norm() - 1.0) > 1e-9) throw NotUnit("direction must be a unit vector");
    Vector a = factor.m.transpose() * e;
    Matrix g = gram(factor.m).m - a * a.transpose();
    g = ((g + g.transpose()) * 0.5).eval();
    return GramMatrix(std::move(g));
}

/// Samples `count` points of the projected-Gram locus of `factor` at
/// uniform random unit directions. Deterministic per seed.
inline RomanSample sample_roman_surface(const Ensemble3& factor, int count, std::uint64_t seed) {
    if (count <= 0) throw ConfigError("locus sample count must be positive");
    RomanSample out;
    out.seed = seed;
    out.points.reserve(static_cast<std::size_t>(count));
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        Vec3 e;
        do {
            e = Vec3(normal(rng), normal(rng), normal(rng));
        } while (e.norm() < 1e-12);
        e.normalize();
        out.points.push_back(projected_gram_at(factor, e).m);
    }
    return out;
}

/// Distance from a candidate Gram matrix to the sampled locus:
/// the minimum Frobenius distance over all sample points.
inline double roman_distance(const GramMatrix& candidate, const RomanSample& locus) {
    if (locus.points.empty()) throw DataError("empty locus sample");
    double best = std::numeric_limits<double>::infinity();
    for (const Matrix& s : locus.points) {
        if (s.rows() != candidate.m.rows() || s.cols() != candidate.m.cols())
            throw DimensionMismatch("locus and candidate sizes differ");
        best = std::min(best, (candidate.m - s).norm());
    }
    return best;
}

} // namespace rmt
