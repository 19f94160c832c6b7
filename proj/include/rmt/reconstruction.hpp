#pragma once

/// Final model assembly: global component masses by stacked least
/// squares, kernel width by grid search, and shape comparison metrics.

#include <rmt/shape_recovery.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

namespace rmt {

struct WeightFitOptions {
    double row_radius_sigmas = 3.0; // rows farther than this from every bump are ignored
    double clamp_floor = 1e-6;      // replacement for non-positive solved masses
};

struct GlobalWeightFit {
    Vector weights;
    double sse = 0.0; // evaluated on every pixel, not only the fitted rows
    int clamped = 0;
};

namespace detail {
/// Unit-mass Gaussian bump at mu, point-sampled on the grid, as the
/// outer product of two 1D tables.
inline void bump_tables(const PixelGrid& grid, const Vec2& mu, double sigma2, Vector& gx,
                        Vector& gy) {
    const int t = grid.T;
    const double side = grid.pixel_side();
    const double amp = 1.0 / std::sqrt(2.0 * pi * sigma2);
    gx.resize(t);
    gy.resize(t);
    for (int i = 0; i < t; ++i) {
        const double c = -grid.extent + (i + 0.5) * side;
        gx(i) = amp * std::exp(-(c - mu(0)) * (c - mu(0)) / (2.0 * sigma2));
        gy(i) = amp * std::exp(-(c - mu(1)) * (c - mu(1)) / (2.0 * sigma2));
    }
}
} // namespace detail

/// Solves one least squares problem for the component masses across the
/// whole stack: every profile contributes rows tying its labeled bump
/// positions to its pixels, and all profiles share the K unknowns.
/// Rows far from every bump carry no signal and are left out of the
/// normal equations; the reported error still covers all pixels so
/// different kernel widths remain comparable.
inline GlobalWeightFit fit_global_weights(const std::vector<Profile>& profiles,
                                          const std::vector<Matrix>& labeled_means, double sigma2,
                                          const WeightFitOptions& opt = {}) {
    if (profiles.empty()) throw DataError("no profiles to fit");
    if (profiles.size() != labeled_means.size())
        throw DimensionMismatch("profile count != labeled mean count");
    if (!(sigma2 > 0)) throw ConfigError("kernel variance must be positive");
    const int k = static_cast<int>(labeled_means[0].cols());
    if (k == 0) throw DataError("no components to fit");

    Matrix normal = Matrix::Zero(k, k);
    Vector rhs = Vector::Zero(k);
    const double radius2 = opt.row_radius_sigmas * opt.row_radius_sigmas * sigma2;

    std::vector<Matrix> columns(profiles.size()); // per profile: T^2 x k bump images
    for (std::size_t n = 0; n < profiles.size(); ++n) {
        const Profile& prof = profiles[n];
        const Matrix& means = labeled_means[n];
        if (means.cols() != k) throw DimensionMismatch("labeled means disagree on count");
        const int t = prof.grid.T;
        Matrix a(t * t, k);
        Vector gx, gy;
        for (int c = 0; c < k; ++c) {
            detail::bump_tables(prof.grid, Vec2(means.col(c)), sigma2, gx, gy);
            Eigen::Map<Matrix> img(a.col(c).data(), t, t);
            img.noalias() = gx * gy.transpose();
        }
        columns[n] = std::move(a);

        const Vector y = prof.vectorized();
        for (int p = 0; p < t * t; ++p) {
            const auto [i, j] = prof.grid.coords(p);
            const Vec2 u = prof.grid.center(i, j);
            bool near = false;
            for (int c = 0; c < k && !near; ++c)
                near = (u - Vec2(means.col(c))).squaredNorm() <= radius2;
            if (!near) continue;
            const auto row = columns[n].row(p);
            normal.selfadjointView<Eigen::Lower>().rankUpdate(row.transpose(), 1.0);
            rhs += y(p) * row.transpose();
        }
    }
    normal.triangularView<Eigen::StrictlyUpper>() =
        normal.transpose().triangularView<Eigen::StrictlyUpper>();

    Eigen::SelfAdjointEigenSolver<Matrix> eig(normal);
    if (eig.info() != Eigen::Success) throw NumericalError("normal equations decomposition failed");
    if (eig.eigenvalues()(0) <= 1e-10 * std::max(eig.eigenvalues()(k - 1), 1e-300))
        throw RankDeficient("bump positions do not determine the masses");

    GlobalWeightFit fit;
    fit.weights = eig.eigenvectors() *
                  (eig.eigenvalues().cwiseInverse().asDiagonal() * (eig.eigenvectors().transpose() * rhs));
    for (int c = 0; c < k; ++c) {
        if (fit.weights(c) <= 0) {
            fit.weights(c) = opt.clamp_floor;
            ++fit.clamped;
        }
    }
    if (fit.clamped > 0)
        std::fprintf(stderr, "warning: %d mass estimate(s) were not positive and were clamped\n",
                     fit.clamped);

    for (std::size_t n = 0; n < profiles.size(); ++n) {
        const Vector resid = profiles[n].vectorized() - columns[n] * fit.weights;
        fit.sse += resid.squaredNorm();
    }
    return fit;
}

inline Vector estimate_weights_global(const std::vector<Profile>& profiles,
                                      const std::vector<Matrix>& labeled_means, double sigma2,
                                      const WeightFitOptions& opt = {}) {
    return fit_global_weights(profiles, labeled_means, sigma2, opt).weights;
}

struct GridSearchResult {
    double sigma2_hat = 0.0;
    Vector weights;
    double sse = 0.0;
    std::vector<std::pair<double, double>> grid_sse; // (sigma2, sse) per grid point
};

/// Refits the masses at every kernel variance in the grid and keeps the
/// best total squared error. Ties keep the earliest grid point.
inline GridSearchResult sigma2_grid_search(const std::vector<Profile>& profiles,
                                           const std::vector<Matrix>& labeled_means,
                                           const std::vector<double>& grid,
                                           const WeightFitOptions& opt = {}) {
    if (grid.empty()) throw ConfigError("kernel variance grid is empty");
    GridSearchResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (double s2 : grid) {
        const GlobalWeightFit fit = fit_global_weights(profiles, labeled_means, s2, opt);
        best.grid_sse.emplace_back(s2, fit.sse);
        if (fit.sse < best.sse) {
            best.sse = fit.sse;
            best.sigma2_hat = s2;
            best.weights = fit.weights;
        }
    }
    return best;
}

/// Logarithmic grid of `points` kernel variances spanning
/// [center/span, center*span]; with an odd point count the center value
/// itself is the middle grid point.
inline std::vector<double> log_variance_grid(double center, double span = 4.0, int points = 21) {
    if (!(center > 0) || !(span >= 1) || points < 1) throw ConfigError("invalid variance grid");
    std::vector<double> grid;
    if (points == 1) {
        grid.push_back(center);
        return grid;
    }
    const double l0 = std::log(center / span), l1 = std::log(center * span);
    for (int i = 0; i < points; ++i)
        grid.push_back(std::exp(l0 + (l1 - l0) * static_cast<double>(i) / (points - 1)));
    return grid;
}

/// A recovered model with the evidence that produced it.
struct ReconstructionResult {
    RadialMixture3 mixture;
    GramMatrix gram_estimate; // rank-3 truncated input
    double sigma2_hat = 0.0;
    double fit_sse = 0.0;
    std::string provenance;
};

/// Builds the 3D mixture from a Gram estimate, masses and kernel
/// variance: truncates to rank 3, factors into the canonical ensemble,
/// and attaches the masses. The mixture is one fixed representative of
/// the orthogonal-equivalence class the data determine.
inline ReconstructionResult assemble(const GramMatrix& gram_est, const Vector& weights,
                                     double sigma2) {
    if (weights.size() != gram_est.size())
        throw DimensionMismatch("weight count != gram size");
    if (weights.size() == 0) throw DataError("empty model");
    if (weights.minCoeff() <= 0) throw DataError("masses must be positive");
    if (!(sigma2 > 0)) throw ConfigError("kernel variance must be positive");

    ReconstructionResult res;
    res.gram_estimate = rank3_truncate(gram_est);
    res.mixture.means = factor_gram(res.gram_estimate);
    res.mixture.weights = weights;
    res.mixture.kernel_sigma = std::sqrt(sigma2);
    res.mixture.total_mass = weights.sum();
    res.sigma2_hat = sigma2;
    res.mixture.validate();
    return res;
}

/// Cubic voxel grid of mixture density samples, matching the pixel
/// center convention of PixelGrid on each axis. The flat index is
/// ix + V*(iy + V*iz).
struct VolumeGrid {
    int V = 0;
    double extent = 0.0;
    std::vector<double> values;

    double voxel_side() const { return 2.0 * extent / V; }
    double axis_center(int i) const { return -extent + (i + 0.5) * voxel_side(); }
    int flat_index(int ix, int iy, int iz) const { return ix + V * (iy + V * iz); }
};

inline VolumeGrid render_volume(const RadialMixture3& mix, int v, double extent) {
    mix.validate();
    if (v <= 0 || !(extent > 0)) throw ConfigError("volume grid must be positive");
    VolumeGrid vol;
    vol.V = v;
    vol.extent = extent;
    vol.values.assign(static_cast<std::size_t>(v) * v * v, 0.0);

    const double s2 = mix.kernel_sigma * mix.kernel_sigma;
    const double norm = std::pow(2.0 * pi * s2, -1.5);
    Vector gx(v), gy(v), gz(v);
    for (int k = 0; k < mix.K(); ++k) {
        const Vec3 mu = mix.means.m.col(k);
        for (int i = 0; i < v; ++i) {
            const double c = vol.axis_center(i);
            gx(i) = std::exp(-(c - mu(0)) * (c - mu(0)) / (2.0 * s2));
            gy(i) = std::exp(-(c - mu(1)) * (c - mu(1)) / (2.0 * s2));
            gz(i) = std::exp(-(c - mu(2)) * (c - mu(2)) / (2.0 * s2));
        }
        const double amp = norm * mix.weights(k);
        for (int iz = 0; iz < v; ++iz)
            for (int iy = 0; iy < v; ++iy) {
                const double f = amp * gy(iy) * gz(iz);
                double* slab = vol.values.data() + vol.flat_index(0, iy, iz);
                for (int ix = 0; ix < v; ++ix) slab[ix] += f * gx(ix);
            }
    }
    return vol;
}

/// Pixelwise difference between an observed and a fitted profile.
inline Matrix residual_map(const Profile& data, const Profile& fitted) {
    if (!(data.grid == fitted.grid)) throw GridMismatch("profiles live on different grids");
    return data.pixels - fitted.pixels;
}

/// Distance between two mixtures modulo rigid motion and relabeling:
/// the best-permutation Frobenius gap between their centered Gram
/// matrices plus the gap between their sorted mass vectors.
inline double shape_distance(const RadialMixture3& a, const RadialMixture3& b) {
    if (a.K() != b.K()) throw ComponentMismatch("mixtures have different component counts");
    const int k = a.K();
    if (k > 8) throw TooManyComponents("exhaustive comparison is limited to 8 components");

    auto centered_gram = [](const RadialMixture3& m) {
        Matrix c = m.means.m;
        const Vec3 centroid = c.rowwise().mean();
        c.colwise() -= centroid;
        return gram(c).m;
    };
    const Matrix ga = centered_gram(a);
    const Matrix gb = centered_gram(b);

    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double d = 0.0;
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                const double diff = ga(i, j) - gb(perm[i], perm[j]);
                d += diff * diff;
            }
        best = std::min(best, d);
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<double> qa(a.weights.data(), a.weights.data() + k);
    std::vector<double> qb(b.weights.data(), b.weights.data() + k);
    std::sort(qa.rbegin(), qa.rend());
    std::sort(qb.rbegin(), qb.rend());
    double wgap = 0.0;
    for (int i = 0; i < k; ++i) wgap += std::abs(qa[i] - qb[i]);
    return std::sqrt(best) + wgap;
}

} // namespace rmt
