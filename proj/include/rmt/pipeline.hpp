#pragma once

/// Batch commands behind the CLI: simulate, deconvolve, reconstruct,
/// evaluate, render. Stage timing and counts go to stderr; results go
/// to the files named in the config.

#include <rmt/config.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace rmt::pipeline {

namespace detail {
using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string fmt(double x) { return io::detail::fmt(x); }

/// Sorts mixture components by descending weight (ties by mean order)
/// so two mixtures can be compared position by position.
inline RadialMixture3 sort_components(const RadialMixture3& mix) {
    std::vector<int> order(mix.K());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (mix.weights(a) != mix.weights(b)) return mix.weights(a) > mix.weights(b);
        for (int r = 0; r < 3; ++r)
            if (mix.means.m(r, a) != mix.means.m(r, b)) return mix.means.m(r, a) < mix.means.m(r, b);
        return false;
    });
    RadialMixture3 out = mix;
    Matrix means(3, mix.K());
    for (int i = 0; i < mix.K(); ++i) {
        means.col(i) = mix.means.m.col(order[i]);
        out.weights(i) = mix.weights(order[i]);
    }
    out.means = Ensemble3(means);
    return out;
}

inline Matrix centered_means(const RadialMixture3& mix) {
    Matrix c = mix.means.m;
    const Vec3 centroid = c.rowwise().mean();
    c.colwise() -= centroid;
    return c;
}
} // namespace detail

/// Normalized cross-correlation of every profile against a chosen
/// generator profile, descending. The optional aid for assembling
/// class lists by visual similarity.
inline std::vector<std::pair<int, double>> correlation_ranking(const std::vector<Profile>& profiles,
                                                               int generator_id) {
    const Profile* gen = nullptr;
    for (const auto& p : profiles)
        if (p.id == generator_id) gen = &p;
    if (!gen) throw DataError("generator profile not in stack");
    const Vector g = gen->vectorized();
    const Vector gc = g.array() - g.mean();
    const double gn = gc.norm();
    std::vector<std::pair<int, double>> out;
    for (const auto& p : profiles) {
        const Vector y = p.vectorized();
        const Vector yc = y.array() - y.mean();
        const double denom = gn * yc.norm();
        out.emplace_back(p.id, denom > 0 ? gc.dot(yc) / denom : 0.0);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

// ---------------------------------------------------------------- simulate

inline void cmd_simulate(const RunConfig& cfg) {
    if (cfg.N < 1) throw ConfigError("simulate requires N >= 1");
    if (cfg.stack.empty()) throw ConfigError("simulate requires a stack output path");
    RadialMixture3 mix;
    if (cfg.fixture == "pyramid")
        mix = pyramid_fixture();
    else if (!cfg.fixture.empty())
        throw ConfigError("unknown fixture: " + cfg.fixture);
    else if (!cfg.mixture_in.empty())
        mix = io::read_mixture(cfg.mixture_in);
    else
        throw ConfigError("simulate needs fixture = pyramid or mixture_in");

    const auto t0 = detail::Clock::now();
    const PixelGrid grid{cfg.T, cfg.L};
    std::vector<Profile> profiles(static_cast<std::size_t>(cfg.N));
    std::vector<Rotation3> rotations(static_cast<std::size_t>(cfg.N));
    parallel_for(profiles.size(), cfg.jobs, [&](std::size_t n) {
        Rng rng = make_rng(seed_stream(cfg.seed, n));
        rotations[n] = sample_haar_rotation(rng);
        profiles[n] = render_profile(mix, rotations[n], grid, cfg.noise_sd, rng);
        profiles[n].id = static_cast<int>(n);
    });
    io::write_profile_stack(cfg.stack, profiles);
    if (!cfg.sidecar.empty()) io::write_rotations(cfg.sidecar, rotations);
    if (!cfg.mixture_out.empty()) io::write_mixture(cfg.mixture_out, mix);
    std::fprintf(stderr, "simulate: %d profiles (T=%d, L=%g, noise %g) in %.2fs\n", cfg.N, cfg.T,
                 cfg.L, cfg.noise_sd, detail::seconds_since(t0));
}

// -------------------------------------------------------------- deconvolve

inline void cmd_deconvolve(const RunConfig& cfg) {
    if (cfg.stack.empty()) throw ConfigError("deconvolve requires a stack path");
    if (cfg.estimates.empty()) throw ConfigError("deconvolve requires an estimates output path");

    const auto t0 = detail::Clock::now();
    const std::vector<Profile> profiles = io::read_profile_stack(cfg.stack);
    const PixelGrid grid = profiles[0].grid;
    const double mass = estimate_mass(profiles);
    const CandidateMask mask = candidate_mask(grid, cfg.w);
    const DesignMatrix design = build_design_matrix(grid, mask, cfg.kernel_sigma2);
    const LarsSolver solver(design);
    std::fprintf(stderr, "deconvolve: dictionary %d x %d ready in %.2fs, stack mass %.6f\n",
                 grid.pixel_count(), mask.size(), detail::seconds_since(t0), mass);

    if (cfg.rank_against >= 0) {
        const auto ranking = correlation_ranking(profiles, cfg.rank_against);
        std::fprintf(stderr, "deconvolve: correlation against profile %d:\n", cfg.rank_against);
        for (std::size_t i = 0; i < ranking.size() && i < 20; ++i)
            std::fprintf(stderr, "  profile %d: %.4f\n", ranking[i].first, ranking[i].second);
    }

    struct Outcome {
        io::EstimateRecord record;
        LassoPath path;
        bool has_path = false;
    };
    std::vector<Outcome> outcomes(profiles.size());
    LarsOptions opt;
    opt.max_steps = cfg.max_steps;
    opt.nonnegative = !cfg.allow_negative;
    opt.t_stop = mass;
    const bool want_paths = !cfg.path_dump.empty();

    parallel_for(profiles.size(), cfg.jobs, [&](std::size_t n) {
        Outcome& out = outcomes[n];
        out.record.estimate.profile_id = profiles[n].id;
        out.record.estimate.m_hat = mass;
        try {
            LassoPath path = solver.path(profiles[n].vectorized(), opt);
            const SparseSolution sol = calibrate_constraint(
                path, cfg.t_factor * mass, mass, [&](const std::vector<int>& support) {
                    return count_support_clusters(support, mask, grid);
                });
            out.record.estimate = estimate_profile(sol, mask, grid, mass, profiles[n].id);
            out.record.status = "ok";
            if (want_paths) {
                out.path = std::move(path);
                out.has_path = true;
            }
        } catch (const EmptySupport&) {
            out.record.status = "failed:empty";
        } catch (const ZeroWeightCluster&) {
            out.record.status = "failed:zero-weight";
        } catch (const NumericalError&) {
            out.record.status = "failed:numerical";
        }
    });

    std::vector<ProfileEstimate> solved;
    for (const auto& o : outcomes)
        if (o.record.status == "ok") solved.push_back(o.record.estimate);
    const auto [kept, rejected] = reject_outlier_profiles(solved, cfg.expected_K);
    std::set<int> kept_ids;
    for (const auto& e : kept) kept_ids.insert(e.profile_id);

    std::size_t n_count = 0, n_outlier = 0, n_failed = 0, n_suspect = 0;
    std::vector<io::EstimateRecord> records;
    for (auto& o : outcomes) {
        if (o.record.status == "ok" && !kept_ids.count(o.record.estimate.profile_id))
            o.record.status = o.record.estimate.K() != cfg.expected_K ? "count" : "outlier";
        if (o.record.status == "count") ++n_count;
        if (o.record.status == "outlier") ++n_outlier;
        if (o.record.status.rfind("failed", 0) == 0) ++n_failed;
        if (o.record.estimate.merge_suspect) ++n_suspect;
        records.push_back(o.record);
    }
    io::write_estimates(cfg.estimates, records);

    if (want_paths) {
        std::ofstream dump = io::open_output(cfg.path_dump);
        for (const auto& o : outcomes)
            if (o.has_path) io::append_path_dump(dump, o.record.estimate.profile_id, o.path);
    }
    std::fprintf(stderr,
                 "deconvolve: kept %zu of %zu profiles "
                 "(%zu wrong count, %zu outlier, %zu failed, %zu merge-suspect) in %.2fs\n",
                 kept.size(), profiles.size(), n_count, n_outlier, n_failed, n_suspect,
                 detail::seconds_since(t0));
}

// ------------------------------------------------------------- reconstruct

inline void cmd_reconstruct(const RunConfig& cfg) {
    if (cfg.estimates.empty()) throw ConfigError("reconstruct requires an estimates path");
    if (cfg.stack.empty()) throw ConfigError("reconstruct requires a stack path");
    if (cfg.mixture_out.empty()) throw ConfigError("reconstruct requires mixture_out");

    const auto t0 = detail::Clock::now();
    const std::vector<io::EstimateRecord> records = io::read_estimates(cfg.estimates);
    std::map<int, const ProfileEstimate*> kept_by_id;
    std::vector<const ProfileEstimate*> kept;
    for (const auto& r : records)
        if (r.kept()) {
            kept.push_back(&r.estimate);
            kept_by_id[r.estimate.profile_id] = &r.estimate;
        }
    if (kept.empty()) throw DataError("no usable profile estimates");

    const std::vector<Profile> stack = io::read_profile_stack(cfg.stack);
    std::map<int, const Profile*> profile_by_id;
    for (const auto& p : stack) profile_by_id[p.id] = &p;

    // Class structure: explicit lists from the config, or one class of
    // everything when the estimates agree on the component count.
    std::vector<ProfileClass> classes;
    if (cfg.classes.empty()) {
        ProfileClass cls;
        cls.class_id = 1;
        cls.declared_k = kept[0]->K();
        for (const auto* e : kept) {
            if (e->K() != cls.declared_k)
                throw ConfigError("estimates carry mixed component counts; "
                                  "class assignments (class1 = ids...) are required");
            cls.members.push_back(*e);
        }
        classes.push_back(std::move(cls));
    } else {
        for (std::size_t c = 0; c < cfg.classes.size(); ++c) {
            ProfileClass cls;
            cls.class_id = static_cast<int>(c) + 1;
            for (int id : cfg.classes[c]) {
                const auto it = kept_by_id.find(id);
                if (it == kept_by_id.end())
                    throw ConfigError("class" + std::to_string(c + 1) + " references profile " +
                                      std::to_string(id) + " which is not a kept estimate");
                cls.members.push_back(*it->second);
            }
            if (cls.members.empty())
                throw ConfigError("class" + std::to_string(c + 1) + " is empty");
            cls.declared_k = cls.members[0].K();
            for (const auto& m : cls.members)
                if (m.K() != cls.declared_k)
                    throw ConfigError("class" + std::to_string(c + 1) +
                                      " members disagree on component count");
            classes.push_back(std::move(cls));
        }
    }
    const int full_k = cfg.full_K > 0 ? cfg.full_K : classes[0].declared_k;
    if (classes[0].declared_k != full_k)
        throw ConfigError("the first class must resolve all components");

    // Members of an explicit class are near-duplicates of the class
    // reference (its first member) up to an in-plane rotation or
    // reflection, so each member's Gram matrix should match the
    // reference Gram once components are labeled consistently; the
    // Frobenius-minimizing permutation restores that correspondence
    // where close mixing weights make the weight ordering unstable.
    // A pooled run mixes unrelated viewing directions whose projected
    // Grams share no labeling signal, so there the weight-descending
    // labels from deconvolution stand.
    if (!cfg.classes.empty()) {
        for (auto& cls : classes) {
            const GramMatrix ref = gram(cls.members[0].means);
            for (std::size_t i = 1; i < cls.members.size(); ++i) {
                const auto perm = procrustes_label(cls.members[i].means, ref);
                cls.members[i] = permute_estimate(cls.members[i], perm);
            }
        }
    }

    std::vector<std::pair<std::string, std::string>> rep;
    rep.emplace_back("command", "reconstruct");
    rep.emplace_back("seed", std::to_string(cfg.seed));
    rep.emplace_back("full_K", std::to_string(full_k));

    // Class 1 fixes the labeling; each later class contributes through
    // its best multiplicity/permutation hypothesis against the locus of
    // the model so far.
    std::vector<std::pair<GramMatrix, int>> parts;
    parts.emplace_back(average_gram(classes[0].members),
                       static_cast<int>(classes[0].members.size()));
    GramMatrix g_cum = merge_class_grams(parts);

    std::vector<Profile> fit_profiles;
    std::vector<Matrix> fit_means;
    auto add_fit_rows = [&](const ProfileEstimate& member, const Matrix& labeled) {
        const auto it = profile_by_id.find(member.profile_id);
        if (it == profile_by_id.end())
            throw DataError("stack lacks profile " + std::to_string(member.profile_id));
        fit_profiles.push_back(*it->second);
        fit_means.push_back(labeled);
    };
    for (const auto& member : classes[0].members) add_fit_rows(member, member.means);

    for (std::size_t c = 1; c < classes.size(); ++c) {
        const RomanSample locus = sample_roman_surface(factor_gram(g_cum), cfg.roman_samples,
                                                       seed_stream(cfg.seed, 9000 + c));
        const auto candidates = expand_with_multiplicity(classes[c], full_k);
        const CandidateSelection sel = select_candidate(candidates, locus);
        const LabeledCandidate& winner = candidates[sel.index];
        parts.emplace_back(winner.gram, static_cast<int>(classes[c].members.size()));
        g_cum = merge_class_grams(parts);

        for (const auto& member : classes[c].members) {
            Matrix labeled(2, full_k);
            for (int i = 0; i < full_k; ++i) labeled.col(i) = member.means.col(winner.column_map[i]);
            add_fit_rows(member, labeled);
        }
        const std::string tag = "class" + std::to_string(c + 1);
        std::string dup;
        for (std::size_t d = 0; d < winner.duplicated.size(); ++d)
            dup += (d ? "," : "") + std::to_string(winner.duplicated[d]);
        rep.emplace_back(tag + "_duplicated", dup.empty() ? "none" : dup);
        rep.emplace_back(tag + "_permutation", std::to_string(winner.permutation_id));
        rep.emplace_back(tag + "_locus_distance", detail::fmt(sel.distance));
    }

    const std::vector<double> grid_values =
        cfg.sigma2_grid.empty()
            ? log_variance_grid(cfg.kernel_sigma2, 4.0, cfg.sigma2_grid_points)
            : cfg.sigma2_grid;
    const GridSearchResult gs = sigma2_grid_search(fit_profiles, fit_means, grid_values);

    ReconstructionResult res = assemble(g_cum, gs.weights, gs.sigma2_hat);
    res.fit_sse = gs.sse;
    {
        std::string prov = "seed=" + std::to_string(cfg.seed) +
                           ";profiles=" + std::to_string(fit_profiles.size()) +
                           ";classes=" + std::to_string(classes.size()) +
                           ";grid=" + std::to_string(grid_values.size());
        res.provenance = prov;
    }

    io::write_mixture(cfg.mixture_out, res.mixture);
    if (!cfg.gram_out.empty()) io::write_gram(cfg.gram_out, res.gram_estimate, &res.mixture.means);
    if (!cfg.volume_out.empty()) {
        const double extent = cfg.volume_extent > 0 ? cfg.volume_extent : stack[0].grid.extent;
        io::write_volume(cfg.volume_out, render_volume(res.mixture, cfg.volume_size, extent));
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(g_cum.m);
    std::string eigs;
    for (int i = g_cum.size() - 1; i >= 0; --i)
        eigs += detail::fmt(eig.eigenvalues()(i)) + (i ? "," : "");
    rep.emplace_back("profiles_used", std::to_string(fit_profiles.size()));
    for (std::size_t c = 0; c < classes.size(); ++c)
        rep.emplace_back("class" + std::to_string(c + 1) + "_members",
                         std::to_string(classes[c].members.size()));
    rep.emplace_back("gram_eigenvalues", eigs);
    rep.emplace_back("third_eigenvalue",
                     detail::fmt(g_cum.size() >= 3 ? eig.eigenvalues()(g_cum.size() - 3) : 0.0));
    rep.emplace_back("sigma2_hat", detail::fmt(res.sigma2_hat));
    rep.emplace_back("fit_sse", detail::fmt(res.fit_sse));
    std::string wlist;
    for (int k = 0; k < res.mixture.K(); ++k)
        wlist += detail::fmt(res.mixture.weights(k)) + (k + 1 < res.mixture.K() ? "," : "");
    rep.emplace_back("weights", wlist);
    rep.emplace_back("total_mass", detail::fmt(res.mixture.total_mass));
    rep.emplace_back("provenance", res.provenance);
    if (!cfg.report_out.empty()) io::write_report(cfg.report_out, rep);

    std::fprintf(stderr,
                 "reconstruct: %zu profiles, %zu class(es), sigma2_hat %.6g, sse %.6g in %.2fs\n",
                 fit_profiles.size(), classes.size(), res.sigma2_hat, res.fit_sse,
                 detail::seconds_since(t0));
}

// ---------------------------------------------------------------- evaluate

inline void cmd_evaluate(const RunConfig& cfg) {
    if (cfg.report_out.empty()) throw ConfigError("evaluate requires report_out");
    std::vector<std::pair<std::string, std::string>> rep;
    rep.emplace_back("command", "evaluate");
    bool compared = false;

    if (!cfg.truth_gram.empty() || !cfg.recon_gram.empty()) {
        if (cfg.truth_gram.empty() || cfg.recon_gram.empty())
            throw ConfigError("gram comparison needs both truth_gram and recon_gram");
        const GramMatrix gt = io::read_gram(cfg.truth_gram);
        const GramMatrix gr = io::read_gram(cfg.recon_gram);
        if (gt.size() != gr.size()) throw ComponentMismatch("gram sizes differ");
        for (int i = 0; i < gt.size(); ++i)
            for (int j = 0; j < gt.size(); ++j)
                rep.emplace_back("gram_delta_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                                 detail::fmt(gr.m(i, j) - gt.m(i, j)));
        rep.emplace_back("gram_frobenius", detail::fmt((gr.m - gt.m).norm()));
        compared = true;
    }

    if (!cfg.truth.empty() || !cfg.recon.empty()) {
        if (cfg.truth.empty() || cfg.recon.empty())
            throw ConfigError("mixture comparison needs both truth and recon");
        const RadialMixture3 truth = detail::sort_components(io::read_mixture(cfg.truth));
        const RadialMixture3 recon = detail::sort_components(io::read_mixture(cfg.recon));
        rep.emplace_back("shape_distance", detail::fmt(shape_distance(truth, recon)));

        // The Gram contrast re-pairs components by the Frobenius-minimizing
        // permutation: ensembles with symmetric geometry (equal-norm columns)
        // admit several equivalent pairings and the contrast should not be
        // charged for picking among them.
        const Matrix ct = detail::centered_means(truth);
        Matrix cr = detail::centered_means(recon);
        const GramMatrix gt = gram(ct);
        const auto perm = procrustes_label(cr, gt);
        Matrix aligned(3, cr.cols());
        for (int i = 0; i < recon.K(); ++i) aligned.col(i) = cr.col(perm[i]);
        const GramMatrix gr = gram(aligned);
        for (int i = 0; i < gt.size(); ++i)
            for (int j = 0; j < gt.size(); ++j)
                rep.emplace_back("gram_delta_" + std::to_string(i + 1) + "_" + std::to_string(j + 1),
                                 detail::fmt(gr.m(i, j) - gt.m(i, j)));
        rep.emplace_back("gram_frobenius", detail::fmt((gr.m - gt.m).norm()));

        // Weight contrasts pair by weight rank (both mixtures are sorted
        // descending above), matching the labeling convention; geometric
        // symmetry must not reshuffle this pairing.
        double wmax = 0.0;
        for (int k = 0; k < truth.K(); ++k) {
            const double d = recon.weights(k) - truth.weights(k);
            rep.emplace_back("weight_delta_" + std::to_string(k + 1), detail::fmt(d));
            wmax = std::max(wmax, std::abs(d));
        }
        rep.emplace_back("weight_delta_max", detail::fmt(wmax));
        compared = true;

        if (!cfg.estimates.empty() && !cfg.stack.empty() && !cfg.residuals_out.empty() &&
            cfg.residual_count > 0) {
            const auto records = io::read_estimates(cfg.estimates);
            const auto stack = io::read_profile_stack(cfg.stack);
            std::map<int, const Profile*> by_id;
            for (const auto& p : stack) by_id[p.id] = &p;

            std::vector<Profile> residuals;
            std::string ids;
            const double s2 = recon.kernel_sigma * recon.kernel_sigma;
            for (const auto& r : records) {
                if (static_cast<int>(residuals.size()) >= cfg.residual_count) break;
                if (!r.kept() || r.estimate.K() != recon.K()) continue;
                const auto it = by_id.find(r.estimate.profile_id);
                if (it == by_id.end()) continue;
                const Profile& data = *it->second;

                Profile fitted;
                fitted.grid = data.grid;
                fitted.id = data.id;
                fitted.pixels = Matrix::Zero(data.grid.T, data.grid.T);
                Vector gx, gy;
                for (int k = 0; k < recon.K(); ++k) {
                    rmt::detail::bump_tables(data.grid, Vec2(r.estimate.means.col(k)), s2, gx, gy);
                    fitted.pixels.noalias() += recon.weights(k) * (gx * gy.transpose());
                }
                Profile resid = fitted;
                resid.pixels = residual_map(data, fitted);
                residuals.push_back(std::move(resid));
                ids += (ids.empty() ? "" : ",") + std::to_string(data.id);
            }
            if (!residuals.empty()) {
                io::write_profile_stack(cfg.residuals_out, residuals);
                rep.emplace_back("residuals_file", cfg.residuals_out);
                rep.emplace_back("residual_profiles", ids);
            }
        }
    }

    if (!compared) throw ConfigError("evaluate needs truth/recon mixtures or gram files");
    io::write_report(cfg.report_out, rep);
    std::fprintf(stderr, "evaluate: report written to %s\n", cfg.report_out.c_str());
}

// ------------------------------------------------------------------ render

inline void cmd_render(const RunConfig& cfg) {
    bool did = false;
    char name[32];

    if (!cfg.volume_in.empty()) {
        if (cfg.slices_out.empty()) throw ConfigError("render needs slices_out with volume_in");
        const VolumeGrid vol = io::read_volume(cfg.volume_in);
        double top = 0.0;
        for (double v : vol.values) top = std::max(top, v);
        for (int iz = 0; iz < vol.V; ++iz) {
            std::vector<unsigned char> bytes(static_cast<std::size_t>(vol.V) * vol.V);
            for (int row = 0; row < vol.V; ++row) {
                const int iy = vol.V - 1 - row; // image rows top-down, y axis up
                for (int ix = 0; ix < vol.V; ++ix) {
                    const double v =
                        vol.values[static_cast<std::size_t>(vol.flat_index(ix, iy, iz))];
                    const double b = top > 0 ? 255.0 * v / top : 0.0;
                    bytes[static_cast<std::size_t>(row) * vol.V + ix] =
                        static_cast<unsigned char>(std::min(255.0, std::max(0.0, std::round(b))));
                }
            }
            std::snprintf(name, sizeof name, "%04d.pgm", iz);
            io::write_pgm(cfg.slices_out + name, bytes, vol.V, vol.V);
        }
        std::fprintf(stderr, "render: %d volume slices -> %s*.pgm\n", vol.V,
                     cfg.slices_out.c_str());
        did = true;
    }

    if (!cfg.residuals_in.empty()) {
        if (cfg.heatmaps_out.empty()) throw ConfigError("render needs heatmaps_out with residuals_in");
        const auto residuals = io::read_profile_stack(cfg.residuals_in);
        double amp = 0.0;
        for (const auto& p : residuals) amp = std::max(amp, p.pixels.cwiseAbs().maxCoeff());
        for (std::size_t n = 0; n < residuals.size(); ++n) {
            const int t = residuals[n].grid.T;
            std::vector<unsigned char> bytes(static_cast<std::size_t>(t) * t);
            for (int row = 0; row < t; ++row) {
                const int j = t - 1 - row;
                for (int i = 0; i < t; ++i) {
                    const double v = residuals[n].pixels(i, j);
                    const double b = amp > 0 ? 127.5 + 127.5 * v / amp : 127.5;
                    bytes[static_cast<std::size_t>(row) * t + i] =
                        static_cast<unsigned char>(std::min(255.0, std::max(0.0, std::round(b))));
                }
            }
            std::snprintf(name, sizeof name, "%04zu.pgm", n);
            io::write_pgm(cfg.heatmaps_out + name, bytes, t, t);
        }
        std::fprintf(stderr, "render: %zu residual heat-maps -> %s*.pgm\n", residuals.size(),
                     cfg.heatmaps_out.c_str());
        did = true;
    }

    if (!did) throw ConfigError("render needs volume_in or residuals_in");
}

} // namespace rmt::pipeline
