#pragma once

/// Text serialization of stacks, mixtures, Gram matrices, volumes and
/// estimates, plus a process-wide audit of which files were opened.

#include <rmt/reconstruction.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace rmt::io {

/// Records every path opened through this layer. Tests use it to prove
/// that reconstruction never touches the rotation sidecar.
class FileAudit {
  public:
    static FileAudit& instance() {
        static FileAudit audit;
        return audit;
    }

    void reset() {
        std::lock_guard<std::mutex> lk(mtx_);
        reads_.clear();
        writes_.clear();
    }
    void note_read(const std::string& path) {
        std::lock_guard<std::mutex> lk(mtx_);
        reads_.push_back(path);
    }
    void note_write(const std::string& path) {
        std::lock_guard<std::mutex> lk(mtx_);
        writes_.push_back(path);
    }
    std::vector<std::string> reads() const {
        std::lock_guard<std::mutex> lk(mtx_);
        return reads_;
    }
    std::vector<std::string> writes() const {
        std::lock_guard<std::mutex> lk(mtx_);
        return writes_;
    }

  private:
    FileAudit() = default;
    mutable std::mutex mtx_;
    std::vector<std::string> reads_, writes_;
};

inline std::ifstream open_input(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open for reading: " + path);
    FileAudit::instance().note_read(path);
    return f;
}

inline std::ofstream open_output(const std::string& path, bool binary = false) {
    std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
    if (!f) throw DataError("cannot open for writing: " + path);
    FileAudit::instance().note_write(path);
    return f;
}

namespace detail {
/// Shortest decimal form that parses back to the identical double;
/// comfortably beyond the 9 significant digits the formats require.
inline std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
    return os.str();
}

inline void fail(const std::string& path, const std::string& what) {
    throw DataError(path + ": " + what);
}

inline std::string next_content_line(std::istream& in, const std::string& path,
                                     const std::string& expect) {
    std::string line;
    if (!std::getline(in, line)) fail(path, "unexpected end of file, expected " + expect);
    return line;
}
} // namespace detail

// ---------------------------------------------------------------- stacks

/// PFS1 stack: header, dimensions, then per profile a marker line and
/// T rows of T values (row i across, entry j within the row).
inline void write_profile_stack(const std::string& path, const std::vector<Profile>& profiles) {
    if (profiles.empty()) throw DataError("refusing to write an empty stack");
    const PixelGrid grid = profiles[0].grid;
    std::ofstream f = open_output(path);
    f << "PFS1\n" << profiles.size() << ' ' << grid.T << ' ' << detail::fmt(grid.extent) << '\n';
    for (std::size_t n = 0; n < profiles.size(); ++n) {
        if (!(profiles[n].grid == grid)) throw GridMismatch("stack profiles on different grids");
        f << "# profile " << n << '\n';
        for (int i = 0; i < grid.T; ++i) {
            for (int j = 0; j < grid.T; ++j) {
                if (j) f << ' ';
                f << detail::fmt(profiles[n].pixels(i, j));
            }
            f << '\n';
        }
    }
    if (!f) throw DataError("failed writing stack: " + path);
}

inline std::vector<Profile> read_profile_stack(const std::string& path) {
    std::ifstream f = open_input(path);
    std::string magic;
    f >> magic;
    if (magic != "PFS1") detail::fail(path, "not a PFS1 stack");
    int n = 0, t = 0;
    double extent = 0.0;
    if (!(f >> n >> t >> extent) || n <= 0 || t <= 0 || !(extent > 0))
        detail::fail(path, "bad stack dimensions");
    std::vector<Profile> out(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        std::string hash, word;
        int idx = -1;
        if (!(f >> hash >> word >> idx) || hash != "#" || word != "profile" || idx != p)
            detail::fail(path, "bad profile marker");
        Profile& prof = out[static_cast<std::size_t>(p)];
        prof.grid = PixelGrid{t, extent};
        prof.id = p;
        prof.pixels.resize(t, t);
        for (int i = 0; i < t; ++i)
            for (int j = 0; j < t; ++j)
                if (!(f >> prof.pixels(i, j))) detail::fail(path, "truncated profile block");
    }
    return out;
}

// ------------------------------------------------------------- rotations

/// ROT1 sidecar: the rotations a simulation drew, one 3x3 block per
/// profile. Written for post-hoc inspection only; the reconstruction
/// commands must never read it.
inline void write_rotations(const std::string& path, const std::vector<Rotation3>& rotations) {
    std::ofstream f = open_output(path);
    f << "ROT1\n" << rotations.size() << '\n';
    for (std::size_t n = 0; n < rotations.size(); ++n) {
        f << "# rotation " << n << '\n';
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                if (j) f << ' ';
                f << detail::fmt(rotations[n].m(i, j));
            }
            f << '\n';
        }
    }
    if (!f) throw DataError("failed writing rotations: " + path);
}

inline std::vector<Rotation3> read_rotations(const std::string& path) {
    std::ifstream f = open_input(path);
    std::string magic;
    f >> magic;
    if (magic != "ROT1") detail::fail(path, "not a ROT1 file");
    int n = 0;
    if (!(f >> n) || n < 0) detail::fail(path, "bad rotation count");
    std::vector<Rotation3> out(static_cast<std::size_t>(n));
    for (int p = 0; p < n; ++p) {
        std::string hash, word;
        int idx = -1;
        if (!(f >> hash >> word >> idx) || hash != "#" || word != "rotation" || idx != p)
            detail::fail(path, "bad rotation marker");
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (!(f >> out[static_cast<std::size_t>(p)].m(i, j)))
                    detail::fail(path, "truncated rotation block");
    }
    return out;
}

// -------------------------------------------------------------- mixtures

/// RM3 mixture: header `RM3 K sigma total_mass`, then one line
/// `q mu_x mu_y mu_z` per component.
inline void write_mixture(const std::string& path, const RadialMixture3& mix) {
    mix.validate();
    std::ofstream f = open_output(path);
    f << "RM3 " << mix.K() << ' ' << detail::fmt(mix.kernel_sigma) << ' '
      << detail::fmt(mix.total_mass) << '\n';
    for (int k = 0; k < mix.K(); ++k)
        f << detail::fmt(mix.weights(k)) << ' ' << detail::fmt(mix.means.m(0, k)) << ' '
          << detail::fmt(mix.means.m(1, k)) << ' ' << detail::fmt(mix.means.m(2, k)) << '\n';
    if (!f) throw DataError("failed writing mixture: " + path);
}

inline RadialMixture3 read_mixture(const std::string& path) {
    std::ifstream f = open_input(path);
    std::string magic;
    f >> magic;
    if (magic != "RM3") detail::fail(path, "not an RM3 mixture");
    int k = 0;
    double sigma = 0.0, mass = 0.0;
    if (!(f >> k >> sigma >> mass) || k <= 0) detail::fail(path, "bad mixture header");
    RadialMixture3 mix;
    mix.kernel_sigma = sigma;
    mix.total_mass = mass;
    mix.weights.resize(k);
    Matrix means(3, k);
    for (int i = 0; i < k; ++i)
        if (!(f >> mix.weights(i) >> means(0, i) >> means(1, i) >> means(2, i)))
            detail::fail(path, "truncated component line");
    mix.means = Ensemble3(means);
    mix.validate();
    return mix;
}

// ----------------------------------------------------------------- grams

/// GRAM file: `GRAM K` then K rows of K values; when an ensemble is
/// given, an `ENS 3 K` block with the canonical factor follows.
inline void write_gram(const std::string& path, const GramMatrix& g,
                       const Ensemble3* factor = nullptr) {
    std::ofstream f = open_output(path);
    f << "GRAM " << g.size() << '\n';
    for (int i = 0; i < g.size(); ++i) {
        for (int j = 0; j < g.size(); ++j) {
            if (j) f << ' ';
            f << detail::fmt(g.m(i, j));
        }
        f << '\n';
    }
    if (factor) {
        f << "ENS 3 " << factor->K() << '\n';
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < factor->K(); ++j) {
                if (j) f << ' ';
                f << detail::fmt(factor->m(i, j));
            }
            f << '\n';
        }
    }
    if (!f) throw DataError("failed writing gram: " + path);
}

inline GramMatrix read_gram(const std::string& path, Ensemble3* factor = nullptr) {
    std::ifstream f = open_input(path);
    std::string magic;
    f >> magic;
    if (magic != "GRAM") detail::fail(path, "not a GRAM file");
    int k = 0;
    if (!(f >> k) || k <= 0) detail::fail(path, "bad gram size");
    Matrix g(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            if (!(f >> g(i, j))) detail::fail(path, "truncated gram row");
    if (factor) {
        std::string ens;
        int three = 0, kk = 0;
        if ((f >> ens >> three >> kk)) {
            if (ens != "ENS" || three != 3 || kk != k) detail::fail(path, "bad ensemble block");
            Matrix v(3, k);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < k; ++j)
                    if (!(f >> v(i, j))) detail::fail(path, "truncated ensemble row");
            *factor = Ensemble3(v);
        }
    }
    return GramMatrix(std::move(g));
}

// --------------------------------------------------------------- volumes

/// VOL1 volume: header, `V extent`, then V z-blocks each holding V
/// lines (x index) of V values (y index).
inline void write_volume(const std::string& path, const VolumeGrid& vol) {
    std::ofstream f = open_output(path);
    f << "VOL1\n" << vol.V << ' ' << detail::fmt(vol.extent) << '\n';
    for (int iz = 0; iz < vol.V; ++iz) {
        f << "# slice " << iz << '\n';
        for (int ix = 0; ix < vol.V; ++ix) {
            for (int iy = 0; iy < vol.V; ++iy) {
                if (iy) f << ' ';
                f << detail::fmt(vol.values[static_cast<std::size_t>(vol.flat_index(ix, iy, iz))]);
            }
            f << '\n';
        }
    }
    if (!f) throw DataError("failed writing volume: " + path);
}

inline VolumeGrid read_volume(const std::string& path) {
    std::ifstream f = open_input(path);
    std::string magic;
    f >> magic;
    if (magic != "VOL1") detail::fail(path, "not a VOL1 volume");
    VolumeGrid vol;
    if (!(f >> vol.V >> vol.extent) || vol.V <= 0 || !(vol.extent > 0))
        detail::fail(path, "bad volume header");
    vol.values.assign(static_cast<std::size_t>(vol.V) * vol.V * vol.V, 0.0);
    for (int iz = 0; iz < vol.V; ++iz) {
        std::string hash, word;
        int idx = -1;
        if (!(f >> hash >> word >> idx) || hash != "#" || word != "slice" || idx != iz)
            detail::fail(path, "bad slice marker");
        for (int ix = 0; ix < vol.V; ++ix)
            for (int iy = 0; iy < vol.V; ++iy)
                if (!(f >> vol.values[static_cast<std::size_t>(vol.flat_index(ix, iy, iz))]))
                    detail::fail(path, "truncated slice");
    }
    return vol;
}

// ------------------------------------------------------------- estimates

/// One profile's entry in an estimate file: the estimate plus its
/// screening status ("ok", "count", "outlier", or "failed:<why>").
struct EstimateRecord {
    ProfileEstimate estimate;
    std::string status = "ok";

    bool kept() const { return status == "ok"; }
};

/// Estimate file: per profile a line `profile n K m_hat status`, then
/// K lines `label q x y`. Profiles whose solve failed carry K = 0.
inline void write_estimates(const std::string& path, const std::vector<EstimateRecord>& records) {
    std::ofstream f = open_output(path);
    for (const auto& rec : records) {
        const ProfileEstimate& e = rec.estimate;
        f << "profile " << e.profile_id << ' ' << e.K() << ' ' << detail::fmt(e.m_hat) << ' '
          << rec.status << '\n';
        for (int k = 0; k < e.K(); ++k) {
            const int label = k < static_cast<int>(e.labels.size()) ? e.labels[k] : k;
            f << label << ' ' << detail::fmt(e.weights(k)) << ' ' << detail::fmt(e.means(0, k))
              << ' ' << detail::fmt(e.means(1, k)) << '\n';
        }
    }
    if (!f) throw DataError("failed writing estimates: " + path);
}

inline std::vector<EstimateRecord> read_estimates(const std::string& path) {
    std::ifstream f = open_input(path);
    std::vector<EstimateRecord> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string word;
        is >> word;
        if (word != "profile") detail::fail(path, "expected a profile line");
        EstimateRecord rec;
        int k = 0;
        if (!(is >> rec.estimate.profile_id >> k >> rec.estimate.m_hat))
            detail::fail(path, "bad profile line");
        if (!(is >> rec.status)) rec.status = "ok"; // status column is optional on input
        rec.estimate.means.resize(2, k);
        rec.estimate.weights.resize(k);
        rec.estimate.labels.resize(k);
        for (int i = 0; i < k; ++i) {
            if (!std::getline(f, line)) detail::fail(path, "truncated estimate block");
            std::istringstream cs(line);
            if (!(cs >> rec.estimate.labels[i] >> rec.estimate.weights(i) >>
                  rec.estimate.means(0, i) >> rec.estimate.means(1, i)))
                detail::fail(path, "bad component line");
        }
        out.push_back(std::move(rec));
    }
    return out;
}

// ---------------------------------------------------------------- report

/// Machine-readable run report: ordered `key = value` lines.
inline void write_report(const std::string& path,
                         const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream f = open_output(path);
    for (const auto& [key, value] : entries) f << key << " = " << value << '\n';
    if (!f) throw DataError("failed writing report: " + path);
}

inline std::map<std::string, std::string> read_report(const std::string& path) {
    std::ifstream f = open_input(path);
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        out[key] = value;
    }
    return out;
}

// --------------------------------------------------------------- imagery

/// 8-bit binary PGM. `rows x cols` bytes follow the header row-major.
inline void write_pgm(const std::string& path, const std::vector<unsigned char>& bytes, int rows,
                      int cols) {
    if (static_cast<std::size_t>(rows) * cols != bytes.size())
        throw DimensionMismatch("pixel byte count != rows*cols");
    std::ofstream f = open_output(path, true);
    f << "P5\n" << cols << ' ' << rows << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("failed writing image: " + path);
}

// ------------------------------------------------------------- path dump

/// Debug dump of a solution path: per breakpoint one line
/// `t active_count sse` followed by `index:value` pairs.
inline void append_path_dump(std::ostream& f, int profile_id, const LassoPath& path) {
    f << "# profile " << profile_id << '\n';
    for (const auto& pt : path.points) {
        f << detail::fmt(pt.t) << ' ' << pt.active.size() << ' ' << detail::fmt(pt.sse);
        for (std::size_t r = 0; r < pt.active.size(); ++r)
            f << ' ' << pt.active[r] << ':' << detail::fmt(pt.coef[r]);
        f << '\n';
    }
}

} // namespace rmt::io
