#pragma once

/// Turns a sparse deconvolution of one profile into component estimates:
/// connected clusters of nonzero pixels become bump centers with masses.

#include <rmt/lasso.hpp>

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

namespace rmt {

/// Partition of the nonzero mask columns into 8-connected clusters.
/// Clusters are ordered by their smallest flat grid index; members are
/// ascending mask-column indices.
struct ClusterSet {
    std::vector<std::vector<int>> clusters;

    int size() const { return static_cast<int>(clusters.size()); }
};

namespace detail {
/// Union-find partition of mask columns; 8-adjacency joins pixels whose
/// grid coordinates differ by at most one in each direction.
inline std::vector<std::vector<int>> partition_support(const std::vector<int>& support,
                                                       const CandidateMask& mask,
                                                       const PixelGrid& grid) {
    const int n = static_cast<int>(support.size());
    std::vector<std::pair<int, int>> coords(n);
    for (int r = 0; r < n; ++r) coords[r] = grid.coords(mask.indices[support[r]]);

    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (std::abs(coords[a].first - coords[b].first) <= 1 &&
                std::abs(coords[a].second - coords[b].second) <= 1)
                parent[find(a)] = find(b);

    std::vector<std::vector<int>> groups(n);
    for (int r = 0; r < n; ++r) groups[find(r)].push_back(support[r]);

    std::vector<std::pair<int, std::vector<int>>> keyed; // (smallest grid index, members)
    for (auto& g : groups) {
        if (g.empty()) continue;
        std::sort(g.begin(), g.end());
        int key = mask.indices[g.front()];
        for (int c : g) key = std::min(key, mask.indices[c]);
        keyed.emplace_back(key, std::move(g));
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& x, const auto& z) { return x.first < z.first; });
    std::vector<std::vector<int>> out;
    for (auto& [key, members] : keyed) out.push_back(std::move(members));
    return out;
}
} // namespace detail

inline ClusterSet cluster_nonzeros(const SparseSolution& sol, const CandidateMask& mask,
                                   const PixelGrid& grid) {
    const std::vector<int> support = sol.support();
    if (support.empty()) throw EmptySupport("deconvolution produced an empty support");
    return ClusterSet{detail::partition_support(support, mask, grid)};
}

/// Number of 8-connected clusters a support would produce. Used while
/// walking the solution path to find where the cluster count changes.
inline int count_support_clusters(const std::vector<int>& support, const CandidateMask& mask,
                                  const PixelGrid& grid) {
    if (support.empty()) return 0;
    return static_cast<int>(detail::partition_support(support, mask, grid).size());
}

/// Coefficient-weighted centroid of each cluster, one column per cluster.
inline Matrix cluster_means(const ClusterSet& cs, const SparseSolution& sol,
                            const CandidateMask& mask, const PixelGrid& grid) {
    Matrix means(2, cs.size());
    for (int k = 0; k < cs.size(); ++k) {
        double wsum = 0.0;
        Vec2 acc(0.0, 0.0);
        for (int col : cs.clusters[k]) {
            auto [i, j] = grid.coords(mask.indices[col]);
            wsum += sol.beta(col);
            acc += sol.beta(col) * grid.center(i, j);
        }
        if (!(wsum > 0)) throw ZeroWeightCluster("cluster carries no positive mass");
        means.col(k) = acc / wsum;
    }
    return means;
}

/// Cluster coefficient sums rescaled to the profile's mass estimate.
inline Vector cluster_weights(const ClusterSet& cs, const SparseSolution& sol, double mass) {
    if (!(mass > 0)) throw DataError("profile mass must be positive");
    Vector raw(cs.size());
    for (int k = 0; k < cs.size(); ++k) {
        double wsum = 0.0;
        for (int col : cs.clusters[k]) wsum += sol.beta(col);
        if (!(wsum > 0)) throw ZeroWeightCluster("cluster carries no positive mass");
        raw(k) = wsum;
    }
    return (mass / raw.sum()) * raw;
}

/// Component estimates recovered from one profile: planar means with
/// masses summing to the profile's mass estimate.
struct ProfileEstimate {
    Matrix means; // 2 x K, descending weight after order_components
    Vector weights;
    int profile_id = 0;
    double m_hat = 0.0;
    bool merge_suspect = false;    // some cluster spans more than 5x5 pixels
    std::vector<int> labels;       // position in the pre-ordering partition

    int K() const { return static_cast<int>(means.cols()); }
};

/// Sorts components by descending weight; exact ties fall back to the
/// lexicographic order of the means. Idempotent.
inline ProfileEstimate order_components(ProfileEstimate est) {
    const int k = est.K();
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (est.weights(a) != est.weights(b)) return est.weights(a) > est.weights(b);
        if (est.means(0, a) != est.means(0, b)) return est.means(0, a) < est.means(0, b);
        return est.means(1, a) < est.means(1, b);
    });
    ProfileEstimate out = est;
    for (int i = 0; i < k; ++i) {
        out.means.col(i) = est.means.col(order[i]);
        out.weights(i) = est.weights(order[i]);
        out.labels[i] = est.labels[order[i]];
    }
    return out;
}

/// Full estimation step for one profile: cluster, locate, weigh, order.
inline ProfileEstimate estimate_profile(const SparseSolution& sol, const CandidateMask& mask,
                                        const PixelGrid& grid, double mass, int profile_id) {
    const ClusterSet cs = cluster_nonzeros(sol, mask, grid);
    ProfileEstimate est;
    est.means = cluster_means(cs, sol, mask, grid);
    est.weights = cluster_weights(cs, sol, mass);
    est.profile_id = profile_id;
    est.m_hat = mass;
    est.labels.resize(cs.size());
    std::iota(est.labels.begin(), est.labels.end(), 0);
    for (const auto& members : cs.clusters) {
        int imin = grid.T, imax = -1, jmin = grid.T, jmax = -1;
        for (int col : members) {
            auto [i, j] = grid.coords(mask.indices[col]);
            imin = std::min(imin, i);
            imax = std::max(imax, i);
            jmin = std::min(jmin, j);
            jmax = std::max(jmax, j);
        }
        if (imax - imin + 1 > 5 || jmax - jmin + 1 > 5) est.merge_suspect = true;
    }
    return order_components(std::move(est));
}

namespace detail {
/// Linear-interpolation quantile of a sorted sample (the common
/// spreadsheet convention).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = static_cast<double>(n - 1) * p;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= n) return sorted.back();
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}
} // namespace detail

/// Screens a stack of estimates: profiles whose component count differs
/// from expected_k are dropped, and of the rest, those whose smallest
/// weight falls below the lower boxplot fence (Q1 - 1.5 IQR of the
/// pooled smallest weights) are dropped as split-component suspects.
/// Returns (kept, rejected), both in the original order.
inline std::pair<std::vector<ProfileEstimate>, std::vector<ProfileEstimate>>
reject_outlier_profiles(const std::vector<ProfileEstimate>& estimates, int expected_k) {
    std::vector<ProfileEstimate> kept, rejected;
    std::vector<double> min_w;
    for (const auto& e : estimates) {
        if (e.K() == expected_k)
            min_w.push_back(e.weights.minCoeff());
    }

    double fence = -std::numeric_limits<double>::infinity();
    if (min_w.size() >= 2) {
        std::sort(min_w.begin(), min_w.end());
        const double q1 = detail::quantile_sorted(min_w, 0.25);
        const double q3 = detail::quantile_sorted(min_w, 0.75);
        fence = q1 - 1.5 * (q3 - q1);
    }

    for (const auto& e : estimates) {
        if (e.K() == expected_k && e.weights.minCoeff() >= fence)
            kept.push_back(e);
        else
            rejected.push_back(e);
    }
    return {kept, rejected};
}

} // namespace rmt
