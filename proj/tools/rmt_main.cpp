// Command line front end. Each subcommand reads a key = value config
// file, applies the flag overrides, and runs one pipeline stage.
//
// Exit codes: 0 success, 2 configuration problem, 3 unreadable or
// malformed data, 4 numerical failure.

#include <rmt/rmt.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <string>

namespace {

struct CommonFlags {
    std::string config_path;
    long long seed = -1;
    bool seed_set = false;
    int jobs = -1;
    bool allow_negative = false;
};

void add_common(CLI::App* sub, CommonFlags& flags, bool with_negative) {
    sub->add_option("--config", flags.config_path, "run configuration file")->required();
    sub->add_option("--seed", flags.seed, "override the seed from the config")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--jobs", flags.jobs, "worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    if (with_negative)
        sub->add_flag("--allow-negative", flags.allow_negative,
                      "permit negative deconvolution coefficients");
}

rmt::RunConfig load(const CommonFlags& flags) {
    rmt::RunConfig cfg = rmt::load_config(flags.config_path);
    if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
    if (flags.jobs >= 0) cfg.jobs = flags.jobs;
    if (flags.allow_negative) cfg.allow_negative = true;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"radial mixture tomography pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    CLI::App* sim = app.add_subcommand("simulate", "render a profile stack at random orientations");
    CLI::App* dec = app.add_subcommand("deconvolve", "sparse per-profile component estimates");
    CLI::App* rec = app.add_subcommand("reconstruct", "assemble the 3D mixture estimate");
    CLI::App* eva = app.add_subcommand("evaluate", "compare an estimate against a reference");
    CLI::App* ren = app.add_subcommand("render", "write volume slices or residual heat-maps as PGM");
    CLI::App* con = app.add_subcommand("convert", "import external stack formats (not implemented)");
    add_common(sim, flags, false);
    add_common(dec, flags, true);
    add_common(rec, flags, false);
    add_common(eva, flags, false);
    add_common(ren, flags, false);
    con->allow_extras();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        app.exit(e);
        return 2;
    }

    try {
        if (con->parsed()) {
            std::fprintf(stderr, "convert: no importers are available in this build; "
                                 "produce a native stack with simulate instead\n");
            return 2;
        }
        if (sim->parsed()) rmt::pipeline::cmd_simulate(load(flags));
        if (dec->parsed()) rmt::pipeline::cmd_deconvolve(load(flags));
        if (rec->parsed()) rmt::pipeline::cmd_reconstruct(load(flags));
        if (eva->parsed()) rmt::pipeline::cmd_evaluate(load(flags));
        if (ren->parsed()) rmt::pipeline::cmd_render(load(flags));
    } catch (const rmt::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const rmt::DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const rmt::NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}
