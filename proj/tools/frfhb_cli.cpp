// Command-line front end: simulate | estimate-frf | fit | predict | diagnose.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "frfhb/frfhb.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> pooling;
    std::optional<std::size_t> chains;
    std::optional<std::size_t> warmup;
    std::optional<std::size_t> draws;
    std::optional<std::size_t> threads;
    std::optional<double> target_accept;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("-c,--config", o.config, "JSON configuration file");
    cmd->add_option("--seed", o.seed, "Random seed");
    cmd->add_option("-o,--out-dir", o.out_dir, "Output directory");
}

void add_sampler(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--pooling", o.pooling, "none | partial | complete");
    cmd->add_option("--chains", o.chains, "Number of chains");
    cmd->add_option("--warmup", o.warmup, "Warm-up draws per chain");
    cmd->add_option("--draws", o.draws, "Post-warm-up draws per chain");
    cmd->add_option("--threads", o.threads, "Worker threads (0: one per chain)");
    cmd->add_option("--target-accept", o.target_accept, "Target mean acceptance statistic");
}

frfhb::RunConfig load(const Overrides& o)
{
    frfhb::RunConfig cfg = o.config.empty() ? frfhb::RunConfig{} : frfhb::load_run_config(o.config);
    if (o.seed)
        cfg.seed = *o.seed;
    if (o.out_dir)
        cfg.out_dir = *o.out_dir;
    if (o.pooling)
        cfg.pooling = frfhb::parse_pooling(*o.pooling);
    if (o.chains)
        cfg.sampler.chains = *o.chains;
    if (o.warmup)
        cfg.sampler.warmup_draws = *o.warmup;
    if (o.draws)
        cfg.sampler.sampling_draws = *o.draws;
    if (o.threads)
        cfg.sampler.threads = *o.threads;
    if (o.target_accept)
        cfg.sampler.target_accept = *o.target_accept;
    try {
        cfg.sampler.validate();
    } catch (const frfhb::InvalidArgument& e) {
        throw frfhb::ConfigError(e.what());
    }
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical Bayesian modelling of frequency response functions"};
    app.require_subcommand(1);
    Overrides o;

    auto* simulate = app.add_subcommand("simulate", "Write synthetic truth and training FRFs");
    auto* estimate = app.add_subcommand("estimate-frf", "H1 FRF estimate from force/response time series");
    auto* fit = app.add_subcommand("fit", "Sample the posterior of the configured model");
    auto* predict = app.add_subcommand("predict", "Extrapolate a temperature model and score test FRFs");
    auto* diagnose = app.add_subcommand("diagnose", "Convergence diagnostics of a stored trace");
    for (auto* cmd : {simulate, estimate, fit, predict, diagnose})
        add_common(cmd, o);
    add_sampler(fit, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? frfhb::exit_ok : frfhb::exit_usage;
    }

    try {
        const auto cfg = load(o);
        if (simulate->parsed())
            return frfhb::cmd_simulate(cfg, std::cout);
        if (estimate->parsed())
            return frfhb::cmd_estimate_frf(cfg, std::cout);
        if (fit->parsed())
            return frfhb::cmd_fit(cfg, std::cout);
        if (predict->parsed())
            return frfhb::cmd_predict(cfg, std::cout);
        return frfhb::cmd_diagnose(cfg, std::cout);
    } catch (const frfhb::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return frfhb::exit_usage;
    } catch (const frfhb::SamplerError& e) {
        std::cerr << "sampler error: " << e.what() << "\n";
        return frfhb::exit_convergence;
    } catch (const frfhb::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return frfhb::exit_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return frfhb::exit_data;
    }
}
