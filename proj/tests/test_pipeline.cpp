#include <catch2/catch_amalgamated.hpp>

#include <rmt/rmt.hpp>

#include "support/helpers.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

using Catch::Approx;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("rmt-pipe-" + std::to_string(::getpid()) + "-" +
               std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(dir);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

double report_value(const std::map<std::string, std::string>& rep, const std::string& key) {
    REQUIRE(rep.count(key) == 1);
    return std::stod(rep.at(key));
}

bool contains_path(const std::vector<std::string>& paths, const std::string& needle) {
    return std::find(paths.begin(), paths.end(), needle) != paths.end();
}

/// Four well-spread components with the heaviest strictly ahead of the
/// combined weight of the two lightest, so a merged pair never outranks
/// it when components are ordered by weight.
rmt::RadialMixture3 spread_mixture() {
    rmt::RadialMixture3 mix;
    rmt::Matrix means(3, 4);
    means << 0.80, -0.55, -0.35, 0.05, //
        0.10, 0.55, -0.65, 0.15,       //
        -0.20, 0.15, 0.05, 0.75;
    mix.means = rmt::Ensemble3(means);
    mix.weights = (rmt::Vector(4) << 0.40, 0.25, 0.20, 0.15).finished();
    mix.kernel_sigma = 0.46;
    mix.total_mass = 1.0;
    return mix;
}

} // namespace

TEST_CASE("five-stage run produces coherent outputs end to end", "[pipeline]") {
    const TempDir tmp;
    const std::string stack = tmp / "stack.pfs";
    const std::string sidecar = tmp / "angles.rot";
    const std::string truth_mix = tmp / "truth.rm3";
    const std::string estimates = tmp / "estimates.txt";
    const std::string recon_mix = tmp / "recon.rm3";
    const std::string recon_gram = tmp / "recon.gram";
    const std::string volume = tmp / "recon.vol";
    const std::string recon_report = tmp / "recon_report.txt";
    const std::string eval_report = tmp / "eval_report.txt";
    const std::string residuals = tmp / "residuals.pfs";

    rmt::RunConfig cfg;
    cfg.seed = 31415;
    cfg.fixture = "pyramid";
    cfg.N = 24;
    cfg.T = 64;
    cfg.noise_sd = 1e-4;
    cfg.stack = stack;
    cfg.sidecar = sidecar;
    cfg.mixture_out = truth_mix;
    rmt::pipeline::cmd_simulate(cfg);
    REQUIRE(fs::exists(stack));
    REQUIRE(fs::exists(sidecar));
    REQUIRE(fs::exists(truth_mix));

    // Everything after simulation must run blind to the orientations,
    // so from here on the sidecar may appear in no audit list.
    rmt::io::FileAudit::instance().reset();

    cfg.mixture_out.clear();
    cfg.sidecar.clear();
    cfg.estimates = estimates;
    rmt::pipeline::cmd_deconvolve(cfg);

    const auto records = rmt::io::read_estimates(estimates);
    REQUIRE(records.size() == 24);
    int kept = 0;
    for (const auto& r : records) {
        if (!r.kept()) continue;
        ++kept;
        REQUIRE(r.estimate.K() == 4);
        REQUIRE(r.estimate.weights.minCoeff() > 0.0);
    }
    REQUIRE(kept >= 8);

    cfg.mixture_out = recon_mix;
    cfg.gram_out = recon_gram;
    cfg.volume_out = volume;
    cfg.volume_size = 24;
    cfg.report_out = recon_report;
    rmt::pipeline::cmd_reconstruct(cfg);

    const auto rec_rep = rmt::io::read_report(recon_report);
    REQUIRE(rec_rep.at("command") == "reconstruct");
    REQUIRE(rec_rep.at("seed") == "31415");
    REQUIRE(rec_rep.at("full_K") == "4");
    REQUIRE(std::stoi(rec_rep.at("profiles_used")) == kept);
    REQUIRE(std::stoi(rec_rep.at("class1_members")) == kept);
    REQUIRE(report_value(rec_rep, "sigma2_hat") > 0.0);
    REQUIRE(report_value(rec_rep, "fit_sse") >= 0.0);
    REQUIRE(report_value(rec_rep, "total_mass") > 0.0);
    REQUIRE(std::count(rec_rep.at("gram_eigenvalues").begin(),
                       rec_rep.at("gram_eigenvalues").end(), ',') == 3);
    REQUIRE(report_value(rec_rep, "third_eigenvalue") > 0.0);
    REQUIRE(rec_rep.at("provenance").find("profiles=") != std::string::npos);

    const rmt::RadialMixture3 recon = rmt::io::read_mixture(recon_mix);
    REQUIRE(recon.K() == 4);
    REQUIRE(recon.weights.minCoeff() > 0.0);
    // The fitted weights carry the stack mass; they are not renormalized.
    REQUIRE(recon.total_mass == Approx(recon.weights.sum()).epsilon(1e-12));
    REQUIRE(recon.weights.sum() == Approx(1.0).margin(0.05));
    const rmt::GramMatrix ghat = rmt::io::read_gram(recon_gram);
    REQUIRE(ghat.size() == 4);

    cfg.truth = truth_mix;
    cfg.recon = recon_mix;
    cfg.report_out = eval_report;
    cfg.residuals_out = residuals;
    cfg.residual_count = 2;
    rmt::pipeline::cmd_evaluate(cfg);

    const auto ev = rmt::io::read_report(eval_report);
    REQUIRE(ev.at("command") == "evaluate");
    const double shape = report_value(ev, "shape_distance");
    const double gfrob = report_value(ev, "gram_frobenius");
    const double wmax = report_value(ev, "weight_delta_max");
    // Two dozen views bound the shape loosely (the average over
    // projected gram matrices converges slowly); the tight thresholds
    // belong to the statistical runs at full view counts.
    REQUIRE(shape > 0.0);
    REQUIRE(shape < 0.6);
    REQUIRE(gfrob > 0.0);
    REQUIRE(gfrob < 0.6);
    REQUIRE(wmax < 0.02);
    for (int i = 1; i <= 4; ++i)
        for (int j = 1; j <= 4; ++j)
            REQUIRE(ev.count("gram_delta_" + std::to_string(i) + "_" + std::to_string(j)) == 1);
    REQUIRE(ev.at("residuals_file") == residuals);
    REQUIRE(!ev.at("residual_profiles").empty());
    const auto resid_stack = rmt::io::read_profile_stack(residuals);
    REQUIRE(resid_stack.size() == 2);
    REQUIRE(resid_stack[0].grid.T == 64);

    rmt::RunConfig render_cfg;
    render_cfg.volume_in = volume;
    render_cfg.slices_out = tmp / "sl-";
    render_cfg.residuals_in = residuals;
    render_cfg.heatmaps_out = tmp / "hm-";
    rmt::pipeline::cmd_render(render_cfg);

    for (int iz = 0; iz < 24; ++iz) {
        char name[16];
        std::snprintf(name, sizeof name, "sl-%04d.pgm", iz);
        REQUIRE(fs::exists(tmp / name));
    }
    const std::string slice0 = slurp(tmp / "sl-0000.pgm");
    REQUIRE(slice0.rfind("P5\n24 24\n255\n", 0) == 0);
    REQUIRE(slice0.size() == 13 + 24 * 24);
    const std::string heat0 = slurp(tmp / "hm-0000.pgm");
    REQUIRE(heat0.rfind("P5\n64 64\n255\n", 0) == 0);
    REQUIRE(heat0.size() == 13 + 64 * 64);
    REQUIRE(fs::exists(tmp / "hm-0001.pgm"));

    // The blindness audit: the analysis stages read the stack and their
    // own intermediates, never the rotation sidecar.
    const auto reads = rmt::io::FileAudit::instance().reads();
    const auto writes = rmt::io::FileAudit::instance().writes();
    REQUIRE(contains_path(reads, stack));
    REQUIRE(!contains_path(reads, sidecar));
    REQUIRE(!contains_path(writes, sidecar));
}

TEST_CASE("repeated runs and worker counts do not change outputs", "[pipeline]") {
    const TempDir tmp;
    rmt::RunConfig cfg;
    cfg.seed = 99;
    cfg.fixture = "pyramid";
    cfg.N = 8;
    cfg.T = 32;
    cfg.noise_sd = 1e-4;

    cfg.stack = tmp / "a.pfs";
    rmt::pipeline::cmd_simulate(cfg);
    cfg.stack = tmp / "b.pfs";
    rmt::pipeline::cmd_simulate(cfg);
    REQUIRE(slurp(tmp / "a.pfs") == slurp(tmp / "b.pfs"));

    cfg.stack = tmp / "a.pfs";
    cfg.jobs = 1;
    cfg.estimates = tmp / "est1.txt";
    rmt::pipeline::cmd_deconvolve(cfg);
    cfg.jobs = 2;
    cfg.estimates = tmp / "est2.txt";
    rmt::pipeline::cmd_deconvolve(cfg);
    REQUIRE(slurp(tmp / "est1.txt") == slurp(tmp / "est2.txt"));
}

TEST_CASE("commands validate their configuration up front", "[pipeline]") {
    const TempDir tmp;
    rmt::RunConfig cfg;

    SECTION("simulate") {
        cfg.stack = tmp / "s.pfs";
        cfg.fixture = "pyramid";
        cfg.N = 0;
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_simulate(cfg), rmt::ConfigError);
        cfg.N = 4;
        cfg.stack.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_simulate(cfg), rmt::ConfigError);
        cfg.stack = tmp / "s.pfs";
        cfg.fixture = "icosahedron";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_simulate(cfg), rmt::ConfigError);
        cfg.fixture.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_simulate(cfg), rmt::ConfigError);
    }

    SECTION("deconvolve") {
        cfg.estimates = tmp / "e.txt";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_deconvolve(cfg), rmt::ConfigError);
        cfg.stack = tmp / "s.pfs";
        cfg.estimates.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_deconvolve(cfg), rmt::ConfigError);
    }

    SECTION("reconstruct") {
        cfg.estimates = tmp / "e.txt";
        cfg.stack = tmp / "s.pfs";
        cfg.mixture_out.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_reconstruct(cfg), rmt::ConfigError);
        cfg.mixture_out = tmp / "m.rm3";
        cfg.estimates.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_reconstruct(cfg), rmt::ConfigError);
        cfg.estimates = tmp / "e.txt";
        cfg.stack.clear();
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_reconstruct(cfg), rmt::ConfigError);
    }

    SECTION("evaluate") {
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_evaluate(cfg), rmt::ConfigError);
        cfg.report_out = tmp / "r.txt";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_evaluate(cfg), rmt::ConfigError);
        cfg.truth_gram = tmp / "t.gram";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_evaluate(cfg), rmt::ConfigError);
        cfg.truth_gram.clear();
        cfg.truth = tmp / "t.rm3";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_evaluate(cfg), rmt::ConfigError);
    }

    SECTION("render") {
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_render(cfg), rmt::ConfigError);
        cfg.volume_in = tmp / "v.vol";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_render(cfg), rmt::ConfigError);
        cfg.volume_in.clear();
        cfg.residuals_in = tmp / "r.pfs";
        REQUIRE_THROWS_AS(rmt::pipeline::cmd_render(cfg), rmt::ConfigError);
    }
}

TEST_CASE("config text parses with strict keys and later-wins overrides", "[config]") {
    const rmt::RunConfig def = rmt::parse_config_text("");
    REQUIRE(def.seed == 12345);
    REQUIRE(def.jobs == 0);
    REQUIRE(def.T == 64);
    REQUIRE(def.L == 2.0);
    REQUIRE(def.noise_sd == 1e-4);
    REQUIRE(def.w == Approx(rmt::pi / 3.0));
    REQUIRE(def.kernel_sigma2 == 0.2116);
    REQUIRE(def.t_factor == 0.95);
    REQUIRE(def.expected_K == 4);
    REQUIRE(def.allow_negative == false);
    REQUIRE(def.rank_against == -1);
    REQUIRE(def.volume_size == 64);
    REQUIRE(def.residual_count == 3);
    REQUIRE(def.classes.empty());

    const rmt::RunConfig cfg = rmt::parse_config_text("# a run\n"
                                                      "seed = 7\n"
                                                      "seed = 9   # later assignment wins\n"
                                                      "\n"
                                                      "fixture = pyramid\n"
                                                      "N = 12\n"
                                                      "allow_negative = yes\n"
                                                      "sigma2_grid = 0.1, 0.2 ,0.3\n"
                                                      "class1 = 0,1, 2\n"
                                                      "class2 = 3\n"
                                                      "stack = out/stack.pfs\n");
    REQUIRE(cfg.seed == 9);
    REQUIRE(cfg.fixture == "pyramid");
    REQUIRE(cfg.N == 12);
    REQUIRE(cfg.allow_negative == true);
    REQUIRE(cfg.sigma2_grid == std::vector<double>{0.1, 0.2, 0.3});
    REQUIRE(cfg.classes.size() == 2);
    REQUIRE(cfg.classes[0] == std::vector<int>{0, 1, 2});
    REQUIRE(cfg.classes[1] == std::vector<int>{3});
    REQUIRE(cfg.stack == "out/stack.pfs");

    REQUIRE(rmt::parse_config_text("allow_negative = 0\n").allow_negative == false);
    REQUIRE(rmt::parse_config_text("allow_negative = true\n").allow_negative == true);

    REQUIRE_THROWS_WITH(rmt::parse_config_text("granularity = 3\n"),
                        Catch::Matchers::ContainsSubstring("unknown config key"));
    REQUIRE_THROWS_WITH(rmt::parse_config_text("just a line\n"),
                        Catch::Matchers::ContainsSubstring("not key = value"));
    REQUIRE_THROWS_WITH(rmt::parse_config_text("stack =\n"),
                        Catch::Matchers::ContainsSubstring("empty key or value"));
    REQUIRE_THROWS_AS(rmt::parse_config_text("N = twelve\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("allow_negative = maybe\n"), rmt::ConfigError);
    REQUIRE_THROWS_WITH(rmt::parse_config_text("class1 = 0\nclass3 = 1\n"),
                        Catch::Matchers::ContainsSubstring("consecutive"));
    REQUIRE_THROWS_WITH(rmt::parse_config_text("class0 = 1\n"),
                        Catch::Matchers::ContainsSubstring("start at 1"));

    REQUIRE_THROWS_AS(rmt::parse_config_text("T = 0\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("jobs = -1\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("noise_sd = -1\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("t_factor = 1.5\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("t_factor = 0\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("volume_size = 1\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("sigma2_grid = 0.1, -0.2\n"), rmt::ConfigError);
    REQUIRE_THROWS_AS(rmt::parse_config_text("expected_K = 0\n"), rmt::ConfigError);

    const TempDir tmp;
    spit(tmp / "run.cfg", "seed = 11\nfixture = pyramid\n");
    REQUIRE(rmt::load_config(tmp / "run.cfg").seed == 11);
    REQUIRE_THROWS_AS(rmt::load_config(tmp / "absent.cfg"), rmt::ConfigError);
}

TEST_CASE("signal-free stacks fail every profile and reconstruction refuses them", "[pipeline]") {
    const TempDir tmp;
    const rmt::PixelGrid grid{16, 2.0};
    std::vector<rmt::Profile> blank(6);
    for (int n = 0; n < 6; ++n) {
        blank[n].grid = grid;
        blank[n].id = n;
        blank[n].pixels = rmt::Matrix::Zero(16, 16);
    }
    rmt::io::write_profile_stack(tmp / "blank.pfs", blank);

    rmt::RunConfig cfg;
    cfg.stack = tmp / "blank.pfs";
    cfg.estimates = tmp / "est.txt";
    rmt::pipeline::cmd_deconvolve(cfg);

    const auto records = rmt::io::read_estimates(tmp / "est.txt");
    REQUIRE(records.size() == 6);
    for (const auto& r : records) {
        REQUIRE(r.status == "failed:empty");
        REQUIRE(r.estimate.K() == 0);
    }

    cfg.mixture_out = tmp / "m.rm3";
    REQUIRE_THROWS_AS(rmt::pipeline::cmd_reconstruct(cfg), rmt::DataError);
}

TEST_CASE("mixed component counts require explicit class assignments", "[pipeline]") {
    const TempDir tmp;
    const rmt::PixelGrid grid{8, 2.0};
    std::vector<rmt::Profile> stack(2);
    for (int n = 0; n < 2; ++n) {
        stack[n].grid = grid;
        stack[n].id = n;
        stack[n].pixels = rmt::Matrix::Constant(8, 8, 0.1);
    }
    rmt::io::write_profile_stack(tmp / "stack.pfs", stack);

    std::vector<rmt::io::EstimateRecord> records(2);
    for (int n = 0; n < 2; ++n) {
        const int k = n == 0 ? 4 : 3;
        rmt::ProfileEstimate& e = records[n].estimate;
        e.profile_id = n;
        e.m_hat = 1.0;
        e.means = rmt::Matrix::Zero(2, k);
        for (int c = 0; c < k; ++c) e.means(0, c) = 0.3 * c - 0.5;
        e.weights = rmt::Vector::Constant(k, 1.0 / k);
        e.labels.resize(k);
        std::iota(e.labels.begin(), e.labels.end(), 0);
    }
    rmt::io::write_estimates(tmp / "est.txt", records);

    rmt::RunConfig cfg;
    cfg.stack = tmp / "stack.pfs";
    cfg.estimates = tmp / "est.txt";
    cfg.mixture_out = tmp / "m.rm3";
    REQUIRE_THROWS_WITH(rmt::pipeline::cmd_reconstruct(cfg),
                        Catch::Matchers::ContainsSubstring("class assignments"));

    // Classes must also name kept estimates and agree internally.
    cfg.classes = {{0}, {5}};
    REQUIRE_THROWS_WITH(rmt::pipeline::cmd_reconstruct(cfg),
                        Catch::Matchers::ContainsSubstring("not a kept estimate"));
    cfg.classes = {{0, 1}};
    REQUIRE_THROWS_WITH(rmt::pipeline::cmd_reconstruct(cfg),
                        Catch::Matchers::ContainsSubstring("disagree"));
    // The first class fixes the labeling, so it must resolve everything.
    cfg.classes = {{1}, {0}};
    cfg.full_K = 4;
    REQUIRE_THROWS_WITH(rmt::pipeline::cmd_reconstruct(cfg),
                        Catch::Matchers::ContainsSubstring("first class"));
}

TEST_CASE("two-class reconstruction reports a multiplicity decision", "[pipeline]") {
    const TempDir tmp;
    const rmt::RadialMixture3 mix = spread_mixture();
    const rmt::PixelGrid grid{32, 2.0};

    // Each class observes the model down a narrow cone of directions, so
    // its members look like slightly perturbed copies of one another.
    // The second cone follows the separation of the two lightest
    // components, which therefore merge into a single spot in that class.
    const rmt::Vec3 d1 = rmt::Vec3(0.9, 0.1, -0.45).normalized();
    const rmt::Vec3 d2 = (mix.means.m.col(2) - mix.means.m.col(3)).normalized();
    auto cone_rotation = [](const rmt::Vec3& axis, rmt::Rng& rng) {
        std::normal_distribution<double> jit(0.0, 0.05);
        rmt::Vec3 e = axis + rmt::Vec3(jit(rng), jit(rng), jit(rng));
        e.normalize();
        rmt::Vec3 b1 = e.cross(std::abs(e(0)) < 0.9 ? rmt::Vec3(1, 0, 0) : rmt::Vec3(0, 1, 0));
        b1.normalize();
        const rmt::Vec3 b2 = e.cross(b1);
        rmt::Rotation3 r;
        r.m.row(0) = b1.transpose();
        r.m.row(1) = b2.transpose();
        r.m.row(2) = e.transpose();
        return r;
    };

    std::vector<rmt::Profile> stack(10);
    std::vector<rmt::Rotation3> rots(10);
    for (int n = 0; n < 10; ++n) {
        rmt::Rng rng = rmt::make_rng(rmt::seed_stream(777, n));
        rots[n] = cone_rotation(n < 6 ? d1 : d2, rng);
        stack[n] = rmt::render_profile(mix, rots[n], grid, 0.0, rng);
        stack[n].id = n;
    }
    rmt::io::write_profile_stack(tmp / "stack.pfs", stack);

    // Six profiles resolve all four components but list them in rotated
    // column orders, as weight estimation noise would when weights sit
    // close together; the class alignment must restore the reference
    // correspondence before anything is averaged. Four other profiles
    // see the two lightest components merged into one spot.
    std::vector<rmt::io::EstimateRecord> records(10);
    for (int n = 0; n < 10; ++n) {
        const rmt::Matrix proj = (rots[n].m * mix.means.m).topRows(2);
        rmt::ProfileEstimate& e = records[n].estimate;
        e.profile_id = n;
        e.m_hat = 1.0;
        if (n < 6) {
            e.means.resize(2, 4);
            e.weights.resize(4);
            for (int c = 0; c < 4; ++c) {
                const int src = (c + n) % 4;
                e.means.col(c) = proj.col(src);
                e.weights(c) = mix.weights(src);
            }
        } else {
            e.means.resize(2, 3);
            e.means.col(0) = proj.col(0);
            e.means.col(1) = (0.20 * proj.col(2) + 0.15 * proj.col(3)) / 0.35;
            e.means.col(2) = proj.col(1);
            e.weights = (rmt::Vector(3) << 0.40, 0.35, 0.25).finished();
        }
        e.labels.resize(e.K());
        std::iota(e.labels.begin(), e.labels.end(), 0);
    }
    rmt::io::write_estimates(tmp / "est.txt", records);

    rmt::RunConfig cfg;
    cfg.seed = 4711;
    cfg.stack = tmp / "stack.pfs";
    cfg.estimates = tmp / "est.txt";
    cfg.classes = {{0, 1, 2, 3, 4, 5}, {6, 7, 8, 9}};
    cfg.sigma2_grid = {0.46 * 0.46};
    cfg.roman_samples = 600;
    cfg.mixture_out = tmp / "m.rm3";
    cfg.report_out = tmp / "report.txt";
    rmt::pipeline::cmd_reconstruct(cfg);

    const auto rep = rmt::io::read_report(tmp / "report.txt");
    REQUIRE(rep.at("full_K") == "4");
    REQUIRE(rep.at("class1_members") == "6");
    REQUIRE(rep.at("class2_members") == "4");
    REQUIRE(rep.at("profiles_used") == "10");
    // The merged pair sits in the second-heaviest class column, and the
    // locus comparison identifies exactly that column as duplicated.
    REQUIRE(rep.at("class2_duplicated") == "1");
    REQUIRE(rep.count("class2_permutation") == 1);
    REQUIRE(report_value(rep, "class2_locus_distance") >= 0.0);

    const rmt::RadialMixture3 recon = rmt::io::read_mixture(tmp / "m.rm3");
    REQUIRE(recon.K() == 4);
    REQUIRE(recon.weights.minCoeff() > 0.0);

    // Accurate pooled weights are only possible if the rotated column
    // orders were undone: a misaligned member feeds the stacked fit
    // wrong locations and shreds the estimates.
    rmt::Vector w = recon.weights;
    std::sort(w.data(), w.data() + w.size(), std::greater<>());
    for (int k = 0; k < 4; ++k) REQUIRE(w(k) == Approx(mix.weights(k)).margin(0.02));

    // Two view cones bound the shape loosely; tight accuracy needs view
    // counts in the hundreds and belongs to the statistical runs.
    REQUIRE(rmt::shape_distance(mix, recon) < 0.6);
}

TEST_CASE("gram-only evaluation reports entrywise deltas", "[pipeline]") {
    const TempDir tmp;
    const rmt::GramMatrix gt = testsup::pyramid_true_gram();
    const rmt::GramMatrix gr = testsup::pyramid_recovered_gram();
    rmt::io::write_gram(tmp / "truth.gram", gt);
    rmt::io::write_gram(tmp / "recon.gram", gr);

    rmt::RunConfig cfg;
    cfg.truth_gram = tmp / "truth.gram";
    cfg.recon_gram = tmp / "recon.gram";
    cfg.report_out = tmp / "report.txt";
    rmt::pipeline::cmd_evaluate(cfg);

    const auto rep = rmt::io::read_report(tmp / "report.txt");
    REQUIRE(rep.at("command") == "evaluate");
    REQUIRE(report_value(rep, "gram_delta_1_2") == Approx(0.051).margin(1e-12));
    REQUIRE(report_value(rep, "gram_delta_2_1") == Approx(0.051).margin(1e-12));
    REQUIRE(report_value(rep, "gram_delta_1_1") == Approx(0.015).margin(1e-12));
    REQUIRE(report_value(rep, "gram_frobenius") == Approx((gr.m - gt.m).norm()).epsilon(1e-12));
    REQUIRE(rep.count("shape_distance") == 0);
    REQUIRE(rep.count("weight_delta_max") == 0);

    rmt::io::write_gram(tmp / "small.gram", rmt::GramMatrix(rmt::Matrix::Identity(3, 3)));
    cfg.recon_gram = tmp / "small.gram";
    REQUIRE_THROWS_AS(rmt::pipeline::cmd_evaluate(cfg), rmt::ComponentMismatch);
}

TEST_CASE("correlation ranking orders profiles by similarity to the generator", "[pipeline]") {
    const rmt::PixelGrid grid{12, 2.0};
    auto with_pixels = [&](int id, const rmt::Matrix& px) {
        rmt::Profile p;
        p.grid = grid;
        p.id = id;
        p.pixels = px;
        return p;
    };
    rmt::Matrix base = rmt::Matrix::Zero(12, 12);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) base(i, j) = std::sin(0.7 * i) + 0.3 * std::cos(1.1 * j);

    std::vector<rmt::Profile> profiles;
    profiles.push_back(with_pixels(3, base));
    profiles.push_back(with_pixels(7, 2.0 * base));              // same pattern, brighter
    profiles.push_back(with_pixels(1, (-base).eval()));          // anti-correlated
    profiles.push_back(with_pixels(5, base.transpose().eval())); // scrambled

    const auto ranking = rmt::pipeline::correlation_ranking(profiles, 3);
    REQUIRE(ranking.size() == 4);
    REQUIRE(ranking[0].first == 3);
    REQUIRE(ranking[0].second == Approx(1.0).margin(1e-12));
    REQUIRE(ranking[1].first == 7);
    REQUIRE(ranking[1].second == Approx(1.0).margin(1e-12));
    REQUIRE(ranking[3].first == 1);
    REQUIRE(ranking[3].second == Approx(-1.0).margin(1e-12));
    REQUIRE(ranking[2].second < ranking[1].second);
    REQUIRE(ranking[2].second > ranking[3].second);

    REQUIRE_THROWS_AS(rmt::pipeline::correlation_ranking(profiles, 42), rmt::DataError);
}

TEST_CASE("hundredfold noise variance keeps most profiles usable", "[pipeline]") {
    const TempDir tmp;
    rmt::RunConfig cfg;
    cfg.seed = 4242;
    cfg.fixture = "pyramid";
    cfg.N = 20;
    cfg.T = 64;
    cfg.noise_sd = 1e-3;
    cfg.stack = tmp / "stack.pfs";
    rmt::pipeline::cmd_simulate(cfg);
    cfg.estimates = tmp / "est.txt";
    rmt::pipeline::cmd_deconvolve(cfg);

    const auto records = rmt::io::read_estimates(tmp / "est.txt");
    REQUIRE(records.size() == 20);
    int usable = 0;
    for (const auto& r : records)
        if (r.status == "ok" || r.status == "outlier") ++usable;
    REQUIRE(usable >= 12);
}
