#pragma once

/// Recovers the Gram matrix of the 3D bump ensemble from many planar
/// estimates: scaled averaging, consistent relabeling, and candidate
/// selection for profiles that resolve fewer components than the model.

#include <rmt/profile_estimation.hpp>

#include <algorithm>
#include <array>
#include <numeric>
#include <vector>

namespace rmt {

/// Scaled average of the per-profile Gram matrices. Orthographic views
/// at uniform rotations keep two thirds of the expected inner products,
/// so the average is inflated by 3/2 to estimate the spatial Gram
/// matrix.
inline GramMatrix average_gram(const std::vector<ProfileEstimate>& estimates) {
    if (estimates.empty()) throw DataError("no estimates to average");
    const int k = estimates[0].K();
    Matrix acc = Matrix::Zero(k, k);
    for (const auto& e : estimates) {
        if (e.K() != k) throw DimensionMismatch("estimates disagree on component count");
        acc += gram(e.means).m;
    }
    acc *= 3.0 / (2.0 * static_cast<double>(estimates.size()));
    return GramMatrix(std::move(acc));
}

/// Nearest (Frobenius) PSD matrix of rank at most 3: eigenvalues beyond
/// the top three are discarded and negative ones clamped to zero.
inline GramMatrix rank3_truncate(const GramMatrix& g) {
    const int k = g.size();
    if (k == 0) return g;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(g.m);
    if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    Matrix out = Matrix::Zero(k, k);
    for (int r = 0; r < std::min(3, k); ++r) {
        const int src = k - 1 - r;
        const double lam = eig.eigenvalues()(src);
        if (lam <= 0) break;
        out.selfadjointView<Eigen::Lower>().rankUpdate(eig.eigenvectors().col(src), lam);
    }
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose().triangularView<Eigen::StrictlyUpper>();
    return GramMatrix(std::move(out));
}

/// Relabels `means` (one component per column) to match a reference
/// Gram matrix: returns the permutation placing source column perm[i]
/// at position i that minimizes the Frobenius mismatch, found by
/// exhaustive search. Component counts above 8 are rejected.
inline std::vector<int> procrustes_label(const Matrix& means, const GramMatrix& reference) {
    const int k = static_cast<int>(means.cols());
    if (reference.size() != k) throw DimensionMismatch("reference size != component count");
    if (k > 8) throw TooManyComponents("exhaustive relabeling is limited to 8 components");

    const Matrix gc = gram(means).m;
    std::vector<int> perm(k), best(k);
    std::iota(perm.begin(), perm.end(), 0);
    best = perm;
    double best_d = std::numeric_limits<double>::infinity();
    do {
        double d = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double diff = reference.m(i, j) - gc(perm[i], perm[j]);
                d += diff * diff;
            }
        if (d < best_d) {
            best_d = d;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Applies a relabeling permutation to an estimate.
inline ProfileEstimate permute_estimate(const ProfileEstimate& est, const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != est.K())
        throw DimensionMismatch("permutation length != component count");
    ProfileEstimate out = est;
    for (int i = 0; i < est.K(); ++i) {
        out.means.col(i) = est.means.col(perm[i]);
        out.weights(i) = est.weights(perm[i]);
        out.labels[i] = est.labels[perm[i]];
    }
    return out;
}

/// Profiles that resolved the same number of components, aligned to a
/// shared labeling.
struct ProfileClass {
    int class_id = 0;
    int declared_k = 0;
    std::vector<ProfileEstimate> members;
};

/// One hypothesis for how a deficient class maps onto the full model:
/// which components were duplicated and how the columns are arranged.
struct LabeledCandidate {
    GramMatrix gram;             // scaled class average under this labeling
    std::vector<int> column_map; // source component of each of the full_k columns
    std::vector<int> duplicated; // source components that appear twice
    int permutation_id = 0;
};

/// Enumerates every labeling hypothesis for a class that resolved
/// declared_k of full_k components. Merged views repeat a component, so
/// a deficit of 1 duplicates one source column and a deficit of 2
/// duplicates two (possibly the same one twice); each duplication is
/// combined with all column permutations that keep the leading
/// component first. Deficits above 2 are not supported.
inline std::vector<LabeledCandidate> expand_with_multiplicity(const ProfileClass& cls, int full_k) {
    const int kc = cls.declared_k;
    if (cls.members.empty()) throw DataError("class has no members");
    for (const auto& m : cls.members)
        if (m.K() != kc) throw DimensionMismatch("class member disagrees on component count");
    const int deficit = full_k - kc;
    if (deficit < 0 || deficit > 2)
        throw UnsupportedDeficit("class component deficit must be 0, 1 or 2");

    std::vector<std::vector<int>> duplications;
    if (deficit == 0) {
        duplications.push_back({});
    } else if (deficit == 1) {
        for (int k = 0; k < kc; ++k) duplications.push_back({k});
    } else {
        for (int k1 = 0; k1 < kc; ++k1)
            for (int k2 = k1; k2 < kc; ++k2) duplications.push_back({k1, k2});
    }

    std::vector<LabeledCandidate> out;
    const double scale = 3.0 / (2.0 * static_cast<double>(cls.members.size()));
    for (const auto& dup : duplications) {
        std::vector<int> perm(full_k);
        std::iota(perm.begin(), perm.end(), 0);
        int perm_id = 0;
        do {
            LabeledCandidate cand;
            cand.duplicated = dup;
            cand.permutation_id = perm_id++;
            cand.column_map.resize(full_k);
            for (int i = 0; i < full_k; ++i) {
                const int expanded = perm[i];
                cand.column_map[i] = expanded < kc ? expanded : dup[expanded - kc];
            }
            Matrix acc = Matrix::Zero(full_k, full_k);
            for (const auto& member : cls.members) {
                Matrix e(2, full_k);
                for (int i = 0; i < full_k; ++i) e.col(i) = member.means.col(cand.column_map[i]);
                acc += gram(e).m;
            }
            cand.gram = GramMatrix(scale * acc);
            out.push_back(std::move(cand));
        } while (std::next_permutation(perm.begin() + 1, perm.end()));
    }
    return out;
}

struct CandidateSelection {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Picks the labeling hypothesis whose Gram matrix lies closest to the
/// sampled projected-Gram locus of the established model. Ties keep the
/// earliest candidate.
inline CandidateSelection select_candidate(const std::vector<LabeledCandidate>& candidates,
                                           const RomanSample& locus) {
    if (candidates.empty()) throw DataError("no labeling candidates");
    CandidateSelection sel;
    sel.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const double d = roman_distance(candidates[i].gram, locus);
        if (d < sel.distance) {
            sel.distance = d;
            sel.index = i;
        }
    }
    return sel;
}

/// Combines per-class Gram estimates into one, weighting each class by
/// its profile count, then truncating to rank 3.
inline GramMatrix merge_class_grams(const std::vector<std::pair<GramMatrix, int>>& parts) {
    if (parts.empty()) throw DataError("no class estimates to merge");
    const int k = parts[0].first.size();
    Matrix acc = Matrix::Zero(k, k);
    double total = 0.0;
    for (const auto& [g, count] : parts) {
        if (g.size() != k) throw DimensionMismatch("class estimates disagree on size");
        if (count <= 0) throw DataError("class profile count must be positive");
        acc += static_cast<double>(count) * g.m;
        total += static_cast<double>(count);
    }
    return rank3_truncate(GramMatrix(acc / total));
}

/// Exact Gram recovery from three views along pairwise orthogonal axes:
/// the in-plane Gram matrices of the three projections average to the
/// spatial one with factor 1/2, because every coordinate plane omits
/// exactly one axis.
inline GramMatrix triad_gram(const std::array<Matrix, 3>& projections,
                             const std::array<Vec3, 3>& axes) {
    for (int i = 0; i < 3; ++i) {
        if (std::abs(axes[i].norm() - 1.0) > 1e-9) throw NotUnit("axis must be a unit vector");
        for (int j = i + 1; j < 3; ++j)
            if (std::abs(axes[i].dot(axes[j])) > 1e-9)
                throw NotOrthogonal("view axes must be pairwise orthogonal");
    }
    const auto k = projections[0].cols();
    Matrix acc = Matrix::Zero(k, k);
    for (const auto& p : projections) {
        if (p.cols() != k) throw DimensionMismatch("projections disagree on component count");
        acc += gram(p).m;
    }
    return GramMatrix(0.5 * acc);
}

} // namespace rmt
