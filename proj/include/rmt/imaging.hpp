#pragma once

/// Pixel grids, noisy profile rendering, and the Gaussian design matrix
/// restricted to the candidate disk.

#include <rmt/mixture.hpp>

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace rmt {

/// Square T x T grid of pixel centers covering [-extent, extent]^2.
/// Pixels are indexed by (i, j) with i along x and j along y; the flat
/// index is column-major, p = j*T + i.
struct PixelGrid {
    int T = 64;
    double extent = 2.0;

    double pixel_side() const { return 2.0 * extent / T; }
    double pixel_area() const { return pixel_side() * pixel_side(); }
    int pixel_count() const { return T * T; }

    Vec2 center(int i, int j) const {
        const double s = pixel_side();
        return Vec2(-extent + (i + 0.5) * s, -extent + (j + 0.5) * s);
    }

    int flat_index(int i, int j) const { return j * T + i; }
    std::pair<int, int> coords(int p) const { return {p % T, p / T}; }

    bool operator==(const PixelGrid& o) const { return T == o.T && extent == o.extent; }
};

/// One observed view: point samples of a projected mixture on the grid,
/// plus white pixel noise.
struct Profile {
    PixelGrid grid;
    Matrix pixels; // T x T, (i, j) as in PixelGrid
    int id = 0;

    /// Column-major flattening, consistent with PixelGrid::flat_index.
    Vector vectorized() const {
        return Eigen::Map<const Vector>(pixels.data(), pixels.size());
    }
};

/// Flat indices of the pixels whose center lies within distance w of
/// the grid origin, ascending.
struct CandidateMask {
    std::vector<int> indices;
    double w = 0.0;

    int size() const { return static_cast<int>(indices.size()); }
};

/// Dictionary of unit-mass Gaussian bumps centered on the mask pixels,
/// point-sampled on the full grid. Column p corresponds to
/// mask.indices[p].
struct DesignMatrix {
    PixelGrid grid;
    CandidateMask mask;
    double kernel_sigma2 = 0.0;
    Matrix X; // T^2 x |mask|
    std::string ref;
};

/// Renders the view of `mix` along rotation `u`: projects the mixture,
/// samples its density at every pixel center, and adds iid Gaussian
/// noise of standard deviation noise_sd. Noise is drawn in column-major
/// pixel order, so the result is deterministic for a given engine state.
inline Profile render_profile(const RadialMixture3& mix, const Rotation3& u, const PixelGrid& grid,
                              double noise_sd, Rng& rng) {
    mix.validate();
    if (noise_sd < 0) throw ConfigError("noise level must be nonnegative");
    RadialMixture2 flat = project_mixture(mix, u);
    const int t = grid.T;
    const double s2 = flat.kernel_sigma * flat.kernel_sigma;
    const double norm = 1.0 / (2.0 * pi * s2);

    Profile out;
    out.grid = grid;
    out.pixels = Matrix::Zero(t, t);

    // Isotropic kernels factor over the axes, so each bump is an outer
    // product of two 1D Gaussian tables.
    Vector gx(t), gy(t);
    const double side = grid.pixel_side();
    for (int k = 0; k < flat.K(); ++k) {
        const Vec2 mu = flat.means.col(k);
        for (int i = 0; i < t; ++i) {
            const double c = -grid.extent + (i + 0.5) * side; // coordinate of index i on either axis
            gx(i) = std::exp(-(c - mu(0)) * (c - mu(0)) / (2.0 * s2));
            gy(i) = std::exp(-(c - mu(1)) * (c - mu(1)) / (2.0 * s2));
        }
        out.pixels.noalias() += (norm * flat.weights(k)) * (gx * gy.transpose());
    }

    if (noise_sd > 0) {
        std::normal_distribution<double> normal(0.0, noise_sd);
        for (int j = 0; j < t; ++j)
            for (int i = 0; i < t; ++i) out.pixels(i, j) += normal(rng);
    }
    return out;
}

/// Pixels eligible to carry a bump center: those within distance w of
/// the origin. Throws EmptyMask when no center qualifies.
inline CandidateMask candidate_mask(const PixelGrid& grid, double w) {
    if (!(w > 0)) throw ConfigError("candidate radius must be positive");
    CandidateMask mask;
    mask.w = w;
    for (int j = 0; j < grid.T; ++j)
        for (int i = 0; i < grid.T; ++i)
            if (grid.center(i, j).norm() <= w) mask.indices.push_back(grid.flat_index(i, j));
    if (mask.indices.empty()) throw EmptyMask("no pixel center lies within the candidate radius");
    return mask;
}

/// Fraction of a unit-mass kernel centered at (cx, cy) that lands
/// inside the field of view.
inline double fov_mass(const PixelGrid& grid, double cx, double cy, double sigma) {
    auto phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    const double l = grid.extent;
    return (phi((l - cx) / sigma) - phi((-l - cx) / sigma)) *
           (phi((l - cy) / sigma) - phi((-l - cy) / sigma));
}

/// Smallest in-view mass over the mask columns; the dictionary quality
/// diagnostic behind the build warning.
inline double min_fov_mass(const PixelGrid& grid, const CandidateMask& mask, double sigma2) {
    const double sigma = std::sqrt(sigma2);
    double worst = 1.0;
    for (int p : mask.indices) {
        auto [i, j] = grid.coords(p);
        const Vec2 c = grid.center(i, j);
        worst = std::min(worst, fov_mass(grid, c(0), c(1), sigma));
    }
    return worst;
}

/// Builds the bump dictionary: column p holds the unit-mass Gaussian of
/// variance kernel_sigma2 centered at mask pixel p, point-sampled at
/// every grid center. Warns on stderr when any column keeps less than
/// 99% of its mass inside the field of view.
inline DesignMatrix build_design_matrix(const PixelGrid& grid, const CandidateMask& mask,
                                        double kernel_sigma2) {
    if (!(kernel_sigma2 > 0)) throw ConfigError("kernel variance must be positive");
    if (mask.indices.empty()) throw EmptyMask("candidate mask is empty");

    DesignMatrix d;
    d.grid = grid;
    d.mask = mask;
    d.kernel_sigma2 = kernel_sigma2;
    d.X.resize(grid.pixel_count(), mask.size());

    const int t = grid.T;
    const double side = grid.pixel_side();
    // Center distances only depend on index offsets, so one 1D table
    // serves every column.
    Vector g1(t);
    const double amp = 1.0 / std::sqrt(2.0 * pi * kernel_sigma2);
    for (int k = 0; k < t; ++k)
        g1(k) = amp * std::exp(-(k * side) * (k * side) / (2.0 * kernel_sigma2));

    for (int p = 0; p < mask.size(); ++p) {
        auto [ip, jp] = grid.coords(mask.indices[p]);
        for (int j = 0; j < t; ++j) {
            const double gj = g1(std::abs(j - jp));
            for (int i = 0; i < t; ++i) d.X(grid.flat_index(i, j), p) = g1(std::abs(i - ip)) * gj;
        }
    }

    const double worst = min_fov_mass(grid, mask, kernel_sigma2);
    if (worst < 0.99)
        std::fprintf(stderr,
                     "warning: dictionary columns lose mass outside the field of view "
                     "(worst in-view fraction %.4f < 0.99)\n",
                     worst);

    std::ostringstream ref;
    ref << "design:T=" << t << ",L=" << grid.extent << ",w=" << mask.w << ",s2=" << kernel_sigma2
        << ",M=" << mask.size();
    d.ref = ref.str();
    return d;
}

/// Mass estimate of a stack: average over profiles of pixel area times
/// the pixel sum, floored at zero.
inline double estimate_mass(const std::vector<Profile>& profiles) {
    if (profiles.empty()) throw DataError("cannot estimate mass from an empty stack");
    double acc = 0.0;
    for (const Profile& p : profiles) acc += p.grid.pixel_area() * p.pixels.sum();
    return std::max(0.0, acc / static_cast<double>(profiles.size()));
}

} // namespace rmt
