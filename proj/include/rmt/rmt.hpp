#pragma once

/// Umbrella header for the radial-mixture tomography library.

#include <rmt/common.hpp>
#include <rmt/geometry.hpp>
#include <rmt/mixture.hpp>
#include <rmt/imaging.hpp>
#include <rmt/lasso.hpp>
#include <rmt/profile_estimation.hpp>
#include <rmt/shape_recovery.hpp>
#include <rmt/reconstruction.hpp>
#include <rmt/io.hpp>
#include <rmt/config.hpp>
#include <rmt/pipeline.hpp>
