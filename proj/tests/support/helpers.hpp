#pragma once

// Shared fixtures for the test binaries.

#include <rmt/imaging.hpp>
#include <rmt/mixture.hpp>

#include <random>
#include <string>
#include <vector>

namespace testsup {

/// Centered pyramid means in descending-weight order: columns are the
/// fixture means minus their centroid, sorted by mixing weight from
/// largest to smallest. This is the labeling every shape comparison in
/// the suite uses.
inline rmt::Matrix centered_pyramid_desc() {
    const rmt::RadialMixture3 pyr = rmt::pyramid_fixture();
    const rmt::Vec3 centroid = pyr.means.m.rowwise().mean();
    const int order[4] = {3, 1, 2, 0}; // weights 0.35, 0.26, 0.21, 0.18
    rmt::Matrix v(3, 4);
    for (int k = 0; k < 4; ++k) v.col(k) = pyr.means.m.col(order[k]) - centroid;
    return v;
}

/// Known Gram matrix of the centered pyramid shape, rounded to three
/// decimals; the reference every recovered estimate is judged against.
inline rmt::GramMatrix pyramid_true_gram() {
    rmt::Matrix g(4, 4);
    g << 0.681, -0.227, -0.227, -0.227, //
        -0.227, 0.726, -0.254, -0.244,  //
        -0.227, -0.254, 0.726, -0.244,  //
        -0.227, -0.244, -0.244, 0.716;
    return rmt::GramMatrix(std::move(g));
}

/// Canonical echelon factor of the pyramid shape, same rounding.
inline rmt::Matrix pyramid_true_factor() {
    rmt::Matrix v(3, 4);
    v << 0.825, -0.275, -0.275, -0.275, //
        0.000, 0.806, -0.409, -0.397,   //
        0.000, 0.000, 0.695, -0.695;
    return v;
}

/// Gram estimate recovered by a full 150-profile reference run of the
/// pipeline on the pyramid fixture; kept as a regression anchor for the
/// comparison tooling.
inline rmt::GramMatrix pyramid_recovered_gram() {
    rmt::Matrix g(4, 4);
    g << 0.696, -0.176, -0.279, -0.241, //
        -0.176, 0.660, -0.247, -0.237,  //
        -0.279, -0.247, 0.736, -0.209,  //
        -0.241, -0.237, -0.209, 0.687;
    return rmt::GramMatrix(std::move(g));
}

/// Wraps a raw matrix as a design so the path solver can run on
/// hand-written geometry (identity designs, duplicated columns, dense
/// random designs) that no pixel dictionary would produce.
inline rmt::DesignMatrix design_from(rmt::Matrix X, std::string ref) {
    rmt::DesignMatrix d;
    d.X = std::move(X);
    d.ref = std::move(ref);
    return d;
}

/// Candidate mask over explicit flat pixel indices (ascending), for
/// tiny instances where enumerating a radius is beside the point.
inline rmt::CandidateMask mask_of(std::vector<int> indices, double w) {
    rmt::CandidateMask m;
    m.indices = std::move(indices);
    m.w = w;
    return m;
}

} // namespace testsup
