#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rmt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

using Rng = std::mt19937_64;

/// Base of the error taxonomy. The CLI maps these onto exit codes:
/// ConfigError -> 2, DataError -> 3, NumericalError -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};

// geometry
struct NotUnit : DataError {
    using DataError::DataError;
};
struct NotLowRank : NumericalError {
    using NumericalError::NumericalError;
};
struct IndefiniteGram : NumericalError {
    using NumericalError::NumericalError;
};
struct DimensionMismatch : DataError {
    using DataError::DataError;
};

// imaging
struct EmptyMask : ConfigError {
    using ConfigError::ConfigError;
};

// sparse solver
struct NumericalBreakdown : NumericalError {
    using NumericalError::NumericalError;
};

// profile estimation
struct EmptySupport : DataError {
    using DataError::DataError;
};
struct ZeroWeightCluster : DataError {
    using DataError::DataError;
};

// shape recovery
struct TooManyComponents : DataError {
    using DataError::DataError;
};
struct UnsupportedDeficit : DataError {
    using DataError::DataError;
};
struct NotOrthogonal : DataError {
    using DataError::DataError;
};

// reconstruction
struct RankDeficient : NumericalError {
    using NumericalError::NumericalError;
};
struct GridMismatch : DataError {
    using DataError::DataError;
};
struct ComponentMismatch : DataError {
    using DataError::DataError;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
} // namespace detail

/// Derives the seed of an independent stream from a master seed.
/// Stream n of master s is splitmix64(s XOR splitmix64(n + 1)), so
/// workers can be seeded per item regardless of scheduling order.
inline std::uint64_t seed_stream(std::uint64_t master, std::uint64_t stream) {
    return detail::splitmix64(master ^ detail::splitmix64(stream + 1));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (0 = hardware
/// concurrency). Results must be written to preallocated slots indexed
/// by i so that the outcome does not depend on scheduling.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    unsigned workers = jobs > 0 ? static_cast<unsigned>(jobs) : std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    if (workers > n) workers = static_cast<unsigned>(n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex err_mtx;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(err_mtx);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace rmt
