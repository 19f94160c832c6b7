#pragma once

/// Isotropic Gaussian mixtures in 3-space and their orthographic
/// projections to the view plane.

#include <rmt/geometry.hpp>

#include <cmath>

namespace rmt {

inline constexpr double pi = 3.14159265358979323846;

/// Mixture of K isotropic Gaussian bumps with a shared kernel width.
/// Weights are masses, not probabilities: they are positive and sum to
/// total_mass (1 for a normalized density).
struct RadialMixture3 {
    Ensemble3 means;     // 3 x K bump centers
    Vector weights;      // K positive masses
    double kernel_sigma; // shared isotropic standard deviation
    double total_mass;   // sum of weights

    int K() const { return means.K(); }

    void validate() const {
        if (weights.size() != means.K()) throw DimensionMismatch("weight count != component count");
        if (!(kernel_sigma > 0)) throw DataError("kernel width must be positive");
        if (weights.size() > 0 && weights.minCoeff() <= 0) throw DataError("weights must be positive");
        if (std::abs(weights.sum() - total_mass) > 1e-9 * std::max(1.0, std::abs(total_mass)))
            throw DataError("weights do not sum to the declared total mass");
    }
};

/// Planar counterpart of RadialMixture3, produced by projection.
struct RadialMixture2 {
    Matrix means; // 2 x K
    Vector weights;
    double kernel_sigma;
    double total_mass;

    int K() const { return static_cast<int>(means.cols()); }
};

/// Density of the 3D mixture at x.
inline double eval3(const RadialMixture3& mix, const Vec3& x) {
    const double s2 = mix.kernel_sigma * mix.kernel_sigma;
    const double norm = std::pow(2.0 * pi * s2, -1.5);
    double acc = 0.0;
    for (int k = 0; k < mix.K(); ++k) {
        const double d2 = (x - mix.means.m.col(k)).squaredNorm();
        acc += mix.weights(k) * std::exp(-d2 / (2.0 * s2));
    }
    return norm * acc;
}

/// Density of the planar mixture at x.
inline double eval2(const RadialMixture2& mix, const Vec2& x) {
    const double s2 = mix.kernel_sigma * mix.kernel_sigma;
    const double norm = 1.0 / (2.0 * pi * s2);
    double acc = 0.0;
    for (int k = 0; k < mix.K(); ++k) {
        const double d2 = (x - Vec2(mix.means.col(k))).squaredNorm();
        acc += mix.weights(k) * std::exp(-d2 / (2.0 * s2));
    }
    return norm * acc;
}

/// Rotates every bump center by u; widths and weights are unchanged
/// because the kernel is isotropic.
inline RadialMixture3 rotate(const RadialMixture3& mix, const Rotation3& u) {
    RadialMixture3 out = mix;
    out.means = Ensemble3(u.m * mix.means.m);
    return out;
}

/// Integrates the rotated mixture along the viewing axis. Isotropic
/// Gaussians marginalize to isotropic planar Gaussians with the same
/// width, so the projection just drops the third coordinate of each
/// rotated center.
inline RadialMixture2 project_mixture(const RadialMixture3& mix, const Rotation3& u) {
    RadialMixture2 out;
    out.means = project(u, mix.means);
    out.weights = mix.weights;
    out.kernel_sigma = mix.kernel_sigma;
    out.total_mass = mix.total_mass;
    return out;
}

/// Four-bump test mixture: an off-center tripod with an apex. Used
/// throughout the tests because its Gram matrix and projections are
/// known in closed form.
inline RadialMixture3 pyramid_fixture() {
    RadialMixture3 mix;
    Matrix means(3, 4);
    means.col(0) = Vec3(0.0, 0.8, -0.3);
    means.col(1) = Vec3(0.7, -0.4, -0.3);
    means.col(2) = Vec3(-0.7, -0.4, -0.3);
    means.col(3) = Vec3(0.0, 0.0, 0.8);
    mix.means = Ensemble3(means);
    mix.weights = Vector(4);
    mix.weights << 0.18, 0.26, 0.21, 0.35;
    mix.kernel_sigma = 0.46;
    mix.total_mass = 1.0;
    mix.validate();
    return mix;
}

} // namespace rmt
