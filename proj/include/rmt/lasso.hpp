#pragma once

/// Homotopy solver for the L1-constrained least squares problem
///
///     min ||y - X b||^2   subject to  ||b||_1 <= t   (and b >= 0
///     unless negative coefficients are explicitly allowed),
///
/// tracing the full piecewise-linear path of minimizers as t grows.

#include <rmt/imaging.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rmt {

/// One breakpoint of the solution path. `active` lists the columns that
/// are strictly nonzero on the open segment ending at this breakpoint
/// (a column entering here is excluded; one dropping here is included
/// with coefficient zero). `seg_sv` is s^T (G_AA)^-1 s for that segment,
/// which makes the quadratic error profile between breakpoints exact.
struct PathPoint {
    double t = 0.0;
    double lambda = 0.0;
    double sse = 0.0;
    double seg_sv = 0.0;
    std::vector<int> active;
    std::vector<double> coef;
};

struct LassoPath {
    std::vector<PathPoint> points;
    int n_columns = 0;
    bool nonnegative = true;
    std::string design_ref;
};

/// A single point on (or between) path breakpoints.
struct SparseSolution {
    Vector beta;
    double t = 0.0;
    double lambda = 0.0;
    double sse = 0.0;

    std::vector<int> support() const {
        std::vector<int> s;
        for (int j = 0; j < beta.size(); ++j)
            if (beta(j) != 0.0) s.push_back(j);
        return s;
    }
};

struct LarsOptions {
    int max_steps = 1000;
    double t_stop = std::numeric_limits<double>::infinity();
    bool nonnegative = true;
};

/// Path solver with a cached column Gram matrix, so that one design
/// shared by many right-hand sides pays the O(M^2 n) product once.
class LarsSolver {
  public:
    explicit LarsSolver(const DesignMatrix& design) : X_(design.X), design_ref_(design.ref) {
        const auto m = X_.cols();
        G_.resize(m, m);
        G_.setZero();
        G_.selfadjointView<Eigen::Lower>().rankUpdate(X_.transpose());
        G_.triangularView<Eigen::StrictlyUpper>() =
            G_.transpose().triangularView<Eigen::StrictlyUpper>();
    }

    LassoPath path(const Vector& y, const LarsOptions& opt = {}) const {
        if (y.size() != X_.rows()) throw DimensionMismatch("observation length != design rows");
        const int m = static_cast<int>(X_.cols());

        LassoPath out;
        out.n_columns = m;
        out.nonnegative = opt.nonnegative;
        out.design_ref = design_ref_;

        const Vector c0 = X_.transpose() * y;
        const double sse0 = y.squaredNorm();

        // Threshold at which the first column enters: the largest
        // (signed or absolute) correlation with y.
        double lam0 = 0.0;
        int first = -1;
        int first_sign = 1;
        for (int j = 0; j < m; ++j) {
            const double cp = opt.nonnegative ? c0(j) : std::abs(c0(j));
            if (cp > lam0) {
                lam0 = cp;
                first = j;
                first_sign = c0(j) >= 0 ? 1 : -1;
            }
        }

        PathPoint origin;
        origin.t = 0.0;
        origin.lambda = std::max(lam0, 0.0);
        origin.sse = sse0;
        out.points.push_back(std::move(origin));
        if (first < 0 || lam0 <= 1e-300) return out; // zero is optimal at every t

        std::vector<int> active{first};
        std::vector<double> sign{static_cast<double>(first_sign)};
        std::vector<char> in_active(m, 0);
        in_active[first] = 1;
        double lam = lam0;
        const double tie_tol = 1e-12 * std::max(lam0, 1.0);
        int stalled = 0; // consecutive zero-length segments

        for (int step = 0; step < opt.max_steps; ++step) {
            const int a = static_cast<int>(active.size());
            Matrix gaa(a, a);
            Vector ca(a), sa(a);
            for (int r = 0; r < a; ++r) {
                ca(r) = c0(active[r]);
                sa(r) = sign[r];
                for (int c = 0; c < a; ++c) gaa(r, c) = G_(active[r], active[c]);
            }
            Eigen::LDLT<Matrix> ldlt(gaa);
            if (ldlt.info() != Eigen::Success)
                throw NumericalBreakdown("active-set system factorization failed");
            const Vector dvec = ldlt.vectorD();
            if (dvec.minCoeff() <= 1e-12 * std::max(dvec.maxCoeff(), 1e-300))
                throw NumericalBreakdown("active columns are numerically dependent");
            const Vector w = ldlt.solve(ca);
            const Vector v = ldlt.solve(sa);
            const double sv = sa.dot(v);
            if (!(sv > 0)) throw NumericalBreakdown("degenerate path direction");

            // Correlations of inactive columns evolve as p_j + lambda*q_j.
            Matrix gsub(m, a);
            for (int c = 0; c < a; ++c) gsub.col(c) = G_.col(active[c]);
            const Vector pvec = c0 - gsub * w;
            const Vector qvec = gsub * v;

            // Next entry event: the largest lambda below the current one
            // at which an inactive correlation punches through the bound
            // from the feasible side. That crossing direction requires the
            // correlation to move slower than the bound (q < 1 on the
            // positive side, q > -1 on the negative side); it also makes
            // the entering coefficient's own direction strictly feasible,
            // which rules out drop/re-entry cycles. A column whose q sits
            // on the wrong side only touches the bound tangentially and
            // stays inactive.
            double best_entry = -1.0;
            int entry_j = -1;
            int entry_sign = 1;
            for (int j = 0; j < m; ++j) {
                if (in_active[j]) continue;
                double cand = -1.0;
                int csign = 1;
                if (qvec(j) < 1.0) {
                    const double cand_pos = pvec(j) / (1.0 - qvec(j));
                    if (std::isfinite(cand_pos) && cand_pos > 0 &&
                        cand_pos <= lam * (1.0 + 1e-12))
                        cand = std::min(cand_pos, lam);
                }
                if (!opt.nonnegative && qvec(j) > -1.0) {
                    const double cand_neg = -pvec(j) / (1.0 + qvec(j));
                    if (std::isfinite(cand_neg) && cand_neg > 0 &&
                        cand_neg <= lam * (1.0 + 1e-12) && std::min(cand_neg, lam) > cand) {
                        cand = std::min(cand_neg, lam);
                        csign = -1;
                    }
                }
                if (cand > best_entry + tie_tol) {
                    best_entry = cand;
                    entry_j = j;
                    entry_sign = csign;
                }
            }

            // Next drop event: the largest lambda not above the current
            // one at which an active coefficient crosses zero. Equality
            // with the current lambda is a zero-length segment (several
            // coefficients hit zero at the same point). A genuine crossing
            // has the coefficient shrinking as lambda falls (sign*v < 0);
            // without that condition a column entering at this lambda,
            // whose coefficient is zero but growing, would be dropped on
            // the spot.
            double best_drop = -1.0;
            int drop_pos = -1;
            for (int r = 0; r < a; ++r) {
                if (!(sa(r) * v(r) < 0.0)) continue;
                const double cand = w(r) / v(r);
                if (cand <= 0 || cand > lam * (1.0 + 1e-12)) continue;
                const double capped = std::min(cand, lam);
                const bool better = capped > best_drop + tie_tol;
                const bool tied_lower = std::abs(capped - best_drop) <= tie_tol && drop_pos >= 0 &&
                                        active[r] < active[drop_pos];
                if (better || tied_lower) {
                    best_drop = std::max(capped, best_drop);
                    drop_pos = r;
                }
            }

            enum { kNone, kEntry, kDrop } event = kNone;
            double lam_next = 0.0;
            if (drop_pos >= 0 && best_drop >= best_entry - tie_tol) {
                event = kDrop;
                lam_next = best_drop;
            } else if (entry_j >= 0) {
                event = kEntry;
                lam_next = best_entry;
            }

            Vector beta = w - lam_next * v;
            if (event == kDrop) beta(drop_pos) = 0.0;
            const double t = beta.cwiseAbs().sum();
            const double sse = sse0 - beta.dot(2.0 * ca - gaa * beta);

            PathPoint pt;
            pt.t = t;
            pt.lambda = lam_next;
            pt.sse = sse;
            pt.seg_sv = sv;
            pt.active = active;
            pt.coef.assign(beta.data(), beta.data() + a);
            sort_by_column(pt);

            PathPoint& last = out.points.back();
            if (t <= last.t + 1e-14 * std::max(1.0, t)) {
                if (t < last.t - 1e-9 * std::max(1.0, last.t))
                    throw NumericalBreakdown("path lost monotonicity");
                if (++stalled > 4 * m + 16)
                    throw NumericalBreakdown("path stalled at a degenerate breakpoint");
                if (last.t == 0.0) {
                    // Columns tied at the starting correlation enter in
                    // back-to-back zero-length segments; the origin must
                    // remain the exact zero solution while adopting the
                    // enlarged active set.
                    pt.t = 0.0;
                    pt.sse = sse0;
                    std::fill(pt.coef.begin(), pt.coef.end(), 0.0);
                }
                last = std::move(pt); // zero-length segment: keep the later state
            } else {
                stalled = 0;
                out.points.push_back(std::move(pt));
            }

            if (event == kNone) return out; // reached the unconstrained end
            if (out.points.back().t >= opt.t_stop) return out;

            if (event == kEntry) {
                active.push_back(entry_j);
                sign.push_back(static_cast<double>(entry_sign));
                in_active[entry_j] = 1;
            } else {
                in_active[active[drop_pos]] = 0;
                active.erase(active.begin() + drop_pos);
                sign.erase(sign.begin() + drop_pos);
            }
            lam = lam_next;
        }
        throw NumericalBreakdown("path exceeded the step budget");
    }

    const Matrix& column_gram() const { return G_; }

  private:
    static void sort_by_column(PathPoint& pt) {
        const int a = static_cast<int>(pt.active.size());
        std::vector<int> order(a);
        for (int i = 0; i < a; ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](int x, int z) { return pt.active[x] < pt.active[z]; });
        std::vector<int> act(a);
        std::vector<double> cf(a);
        for (int i = 0; i < a; ++i) {
            act[i] = pt.active[order[i]];
            cf[i] = pt.coef[order[i]];
        }
        pt.active = std::move(act);
        pt.coef = std::move(cf);
    }

    Matrix X_;
    Matrix G_;
    std::string design_ref_;
};

inline LassoPath lars_lasso_path(const DesignMatrix& design, const Vector& y, int max_steps = 1000,
                                 bool nonnegative = true) {
    LarsOptions opt;
    opt.max_steps = max_steps;
    opt.nonnegative = nonnegative;
    return LarsSolver(design).path(y, opt);
}

/// Exact minimizer at L1 level min(t, path end), by linear interpolation
/// between the bracketing breakpoints. Error and penalty level follow
/// the segment's quadratic profile, not a linear blend.
inline SparseSolution solve_at(const LassoPath& path, double t) {
    if (path.points.empty()) throw DataError("empty solution path");
    if (t < 0) throw ConfigError("L1 level must be nonnegative");
    const auto& pts = path.points;
    const double t_eff = std::min(t, pts.back().t);

    SparseSolution sol;
    sol.beta = Vector::Zero(path.n_columns);

    std::size_t hi = 0;
    while (hi < pts.size() && pts[hi].t < t_eff) ++hi;
    if (hi >= pts.size()) hi = pts.size() - 1;

    if (pts[hi].t == t_eff || hi == 0) {
        for (std::size_t r = 0; r < pts[hi].active.size(); ++r)
            sol.beta(pts[hi].active[r]) = pts[hi].coef[r];
        sol.t = pts[hi].t;
        sol.lambda = pts[hi].lambda;
        sol.sse = pts[hi].sse;
        return sol;
    }

    const PathPoint& lo = pts[hi - 1];
    const PathPoint& up = pts[hi];
    const double alpha = (t_eff - lo.t) / (up.t - lo.t);
    for (std::size_t r = 0; r < up.active.size(); ++r) {
        const int j = up.active[r];
        double at_lo = 0.0;
        auto it = std::lower_bound(lo.active.begin(), lo.active.end(), j);
        if (it != lo.active.end() && *it == j)
            at_lo = lo.coef[static_cast<std::size_t>(it - lo.active.begin())];
        sol.beta(j) = (1.0 - alpha) * at_lo + alpha * up.coef[r];
    }
    sol.t = t_eff;
    sol.lambda = up.lambda + (up.t - t_eff) / up.seg_sv;
    sol.sse = up.sse + (sol.lambda * sol.lambda - up.lambda * up.lambda) * up.seg_sv;
    return sol;
}

struct KktReport {
    bool ok = false;
    double lambda = 0.0;
    double max_violation = 0.0;
};

/// Verifies subgradient optimality of beta for the constrained problem
/// at level t: active correlations agree with lambda * sign, inactive
/// ones stay below lambda, and beta is feasible.
inline KktReport kkt_check(const DesignMatrix& design, const Vector& y, const Vector& beta,
                           double t, bool nonnegative = true, double tol = 1e-7) {
    if (beta.size() != design.X.cols()) throw DimensionMismatch("coefficient length != columns");
    const Vector c = design.X.transpose() * (y - design.X * beta);

    KktReport rep;
    double viol = 0.0;
    std::vector<int> act;
    for (int j = 0; j < beta.size(); ++j)
        if (beta(j) != 0.0) act.push_back(j);

    if (act.empty()) {
        double top = 0.0;
        for (int j = 0; j < c.size(); ++j) top = std::max(top, nonnegative ? c(j) : std::abs(c(j)));
        rep.lambda = top;
        if (t > tol) viol = top; // at t > 0 an improving direction must not exist
    } else {
        double lam = 0.0;
        for (int j : act) lam += (beta(j) >= 0 ? c(j) : -c(j));
        lam /= static_cast<double>(act.size());
        rep.lambda = lam;
        viol = std::max(viol, -lam);
        for (int j = 0; j < beta.size(); ++j) {
            if (beta(j) != 0.0) {
                const double s = beta(j) >= 0 ? 1.0 : -1.0;
                viol = std::max(viol, std::abs(c(j) - lam * s));
                if (nonnegative) viol = std::max(viol, -beta(j));
            } else {
                viol = std::max(viol, (nonnegative ? c(j) : std::abs(c(j))) - lam);
            }
        }
        viol = std::max(viol, beta.cwiseAbs().sum() - t);
    }
    rep.max_violation = viol;
    rep.ok = viol <= tol;
    return rep;
}

/// Walks the path upward from t_start and returns the solution at the
/// last breakpoint not above t_max at which `count` (evaluated on the
/// support of each segment) still equals its value at t_start; if the
/// count never changes, returns the solution at t_max itself.
inline SparseSolution calibrate_constraint(const LassoPath& path, double t_start, double t_max,
                                           const std::function<int(const std::vector<int>&)>& count) {
    if (!(t_start >= 0) || !(t_max >= t_start)) throw ConfigError("need 0 <= t_start <= t_max");
    const auto& pts = path.points;
    if (pts.empty()) throw DataError("empty solution path");

    // Segment containing t_start: first breakpoint strictly above it.
    std::size_t hi = 0;
    while (hi < pts.size() && pts[hi].t <= t_start) ++hi;
    if (hi >= pts.size()) return solve_at(path, t_max); // support is frozen past the path end

    const int k0 = count(pts[hi].active);
    for (std::size_t m = hi; m + 1 < pts.size(); ++m) {
        if (pts[m].t >= t_max) break;
        if (count(pts[m + 1].active) != k0) return solve_at(path, pts[m].t);
    }
    return solve_at(path, t_max);
}

} // namespace rmt
