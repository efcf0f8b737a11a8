#pragma once

// Run configuration for the command-line pipelines, parsed from JSON. Every
// field is optional; absent fields keep the defaults below.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "frfhb/analysis.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/io.hpp"
#include "frfhb/model.hpp"
#include "frfhb/nuts.hpp"
#include "frfhb/signal.hpp"
#include "frfhb/synthetic.hpp"

namespace frfhb {

/// Optional [lo, hi] frequency band in Hz.
struct Band {
    double lo_hz = 0.0;
    double hi_hz = 0.0;

    [[nodiscard]] bool contains_hz(double f) const noexcept { return f >= lo_hz && f <= hi_hz; }
};

struct EstimateConfig {
    std::string force;            // time-series CSV of the excitation
    std::string response;         // time-series CSV of the response
    std::string output = "frf.csv";
    std::size_t blocks = 20;
    Window window = Window::hann;
    std::optional<Band> band;     // keep only these spectral lines
};

struct DataConfig {
    std::vector<std::string> train; // FRF CSVs, one per domain (or directories of them)
    std::vector<std::string> test;  // FRF CSVs used for scoring predictions
    std::optional<Band> band;       // restrict observations to this band
};

struct AnalysisConfig {
    BandComposition band_composition = BandComposition::std_plus_noise;
    double rhat_threshold = 1.05;
    double max_divergence_rate = 0.01;
    std::size_t kde_points = 512;
    double band_step_hz = 4.88e-2; // spacing of the predictive-band grid
};

struct PredictConfig {
    std::vector<double> temperatures_c;
    std::string fit_dir; // directory holding trace.csv; empty: the output directory
};

enum class ModelKind { population, temperature };

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    SyntheticConfig simulate = case1_benchmark();
    EstimateConfig estimate;
    DataConfig data;
    ModelKind model = ModelKind::population;
    PoolingMode pooling = PoolingMode::partial;
    HierarchySpec hierarchy = HierarchySpec::defaults();
    TemperatureSpec temperature = TemperatureSpec::defaults();
    SamplerConfig sampler;
    AnalysisConfig analysis;
    PredictConfig predict;

    [[nodiscard]] ModelSpec model_spec() const
    {
        if (model == ModelKind::temperature)
            return temperature;
        return hierarchy;
    }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> known)
{
    if (!j.is_object())
        throw ConfigError(where + ": expected an object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : j.items())
        if (!allowed.contains(key))
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read_field(const Json& j, const char* key, T& dst, const std::string& where)
{
    if (!j.contains(key))
        return;
    try {
        dst = j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline Band parse_band(const Json& j, const std::string& where)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(where + ": expected [lower_hz, upper_hz]");
    Band b{j[0].get<double>(), j[1].get<double>()};
    if (!(b.lo_hz >= 0.0 && b.lo_hz < b.hi_hz))
        throw ConfigError(where + ": band lower limit must lie below the upper limit");
    return b;
}

inline PriorSpec parse_prior(const Json& j, const std::string& where)
{
    reject_unknown(j, where, {"dist", "mean", "variance", "alpha", "beta"});
    std::string dist = "normal";
    read_field(j, "dist", dist, where);
    PriorSpec p;
    if (dist == "normal" || dist == "truncated_normal") {
        if (!j.contains("mean") || !j.contains("variance"))
            throw ConfigError(where + ": needs 'mean' and 'variance'");
        p = dist == "normal" ? PriorSpec::normal(j["mean"].get<double>(), j["variance"].get<double>())
                             : PriorSpec::truncated_normal(j["mean"].get<double>(), j["variance"].get<double>());
    } else if (dist == "beta") {
        if (!j.contains("alpha") || !j.contains("beta"))
            throw ConfigError(where + ": needs 'alpha' and 'beta'");
        p = PriorSpec::beta_dist(j["alpha"].get<double>(), j["beta"].get<double>());
    } else {
        throw ConfigError(where + ": unknown distribution '" + dist + "'");
    }
    try {
        p.validate(where);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return p;
}

inline void parse_prior_list(const Json& j, const char* key, std::vector<PriorSpec>& dst, const std::string& where)
{
    if (!j.contains(key))
        return;
    const auto& a = j.at(key);
    const std::string w = where + "." + key;
    if (!a.is_array())
        throw ConfigError(w + ": expected a list of priors");
    dst.clear();
    for (std::size_t i = 0; i < a.size(); ++i)
        dst.push_back(parse_prior(a[i], w + "[" + std::to_string(i) + "]"));
}

inline void parse_prior_field(const Json& j, const char* key, PriorSpec& dst, const std::string& where)
{
    if (j.contains(key))
        dst = parse_prior(j.at(key), where + "." + key);
}

inline SyntheticConfig parse_simulate(const Json& j)
{
    const std::string where = "simulate";
    reject_unknown(j, where, {"band_hz", "step_hz", "noise_fraction", "domains", "temperature_law"});
    SyntheticConfig c = case1_benchmark();
    if (j.contains("band_hz")) {
        const auto b = parse_band(j["band_hz"], where + ".band_hz");
        c.band_lo_hz = b.lo_hz;
        c.band_hi_hz = b.hi_hz;
    }
    read_field(j, "step_hz", c.step_hz, where);
    read_field(j, "noise_fraction", c.noise_fraction, where);
    if (j.contains("domains") && j.contains("temperature_law"))
        throw ConfigError(where + ": give either 'domains' or 'temperature_law', not both");
    if (j.contains("domains")) {
        c.law.reset();
        c.domains.clear();
        const auto& arr = j["domains"];
        if (!arr.is_array())
            throw ConfigError(where + ".domains: expected a list");
        for (std::size_t k = 0; k < arr.size(); ++k) {
            const std::string w = where + ".domains[" + std::to_string(k) + "]";
            const auto& d = arr[k];
            reject_unknown(d, w, {"name", "train_points", "temperature_c", "modes"});
            SyntheticDomain dom;
            dom.name = "domain" + std::to_string(k + 1);
            read_field(d, "name", dom.name, w);
            read_field(d, "train_points", dom.train_points, w);
            if (d.contains("temperature_c"))
                dom.temperature_c = d["temperature_c"].get<double>();
            if (!d.contains("modes") || !d["modes"].is_array())
                throw ConfigError(w + ": needs a list of modes");
            for (std::size_t m = 0; m < d["modes"].size(); ++m) {
                const auto& mj = d["modes"][m];
                const std::string wm = w + ".modes[" + std::to_string(m) + "]";
                reject_unknown(mj, wm, {"natural_frequency_hz", "damping_ratio", "residue"});
                if (!mj.contains("natural_frequency_hz") || !mj.contains("damping_ratio") || !mj.contains("residue"))
                    throw ConfigError(wm + ": needs natural_frequency_hz, damping_ratio and residue");
                dom.modes.push_back(Mode{hz_to_rad(mj["natural_frequency_hz"].get<double>()),
                                         mj["damping_ratio"].get<double>(), mj["residue"].get<double>()});
            }
            c.domains.push_back(std::move(dom));
        }
    }
    if (j.contains("temperature_law")) {
        const auto& l = j["temperature_law"];
        const std::string w = where + ".temperature_law";
        reject_unknown(l, w,
                       {"mu_omega_rad_s", "a", "mu_zeta", "b", "residue", "temperatures_c", "train_temperatures_c",
                        "train_points"});
        TemperatureLaw law;
        double residue = -0.008;
        std::vector<double> temps, train_temps;
        std::size_t n = 100;
        law.mu_omega = 910.0;
        law.a = {-0.5, 0.007};
        law.mu_zeta = 0.01;
        law.b = {-8e-5};
        read_field(l, "mu_omega_rad_s", law.mu_omega, w);
        read_field(l, "a", law.a, w);
        read_field(l, "mu_zeta", law.mu_zeta, w);
        read_field(l, "b", law.b, w);
        read_field(l, "residue", residue, w);
        read_field(l, "temperatures_c", temps, w);
        read_field(l, "train_temperatures_c", train_temps, w);
        read_field(l, "train_points", n, w);
        try {
            c.domains = temperature_domains(law, residue, temps, train_temps, n);
        } catch (const InvalidArgument& e) {
            throw ConfigError(w + ": " + e.what());
        }
        c.law = law;
        c.law_residue = residue;
    }
    return c;
}

inline void parse_model(const Json& j, RunConfig& cfg)
{
    const std::string where = "model";
    reject_unknown(j, where,
                   {"type", "pooling", "modes", "share_residues", "share_noise", "ordered_frequencies", "priors",
                    "frequency_order", "damping_order", "sample_residue_hyper"});
    std::string type = "population";
    read_field(j, "type", type, where);
    if (type == "population")
        cfg.model = ModelKind::population;
    else if (type == "temperature")
        cfg.model = ModelKind::temperature;
    else
        throw ConfigError(where + ".type: expected 'population' or 'temperature'");
    if (j.contains("pooling")) {
        try {
            cfg.pooling = parse_pooling(j["pooling"].get<std::string>());
        } catch (const InvalidArgument& e) {
            throw ConfigError(where + ".pooling: " + e.what());
        }
    }
    auto& h = cfg.hierarchy;
    read_field(j, "modes", h.modes, where);
    read_field(j, "share_residues", h.share_residues, where);
    read_field(j, "share_noise", h.share_noise, where);
    read_field(j, "ordered_frequencies", h.ordered_frequencies, where);
    auto& t = cfg.temperature;
    read_field(j, "frequency_order", t.frequency_order, where);
    read_field(j, "damping_order", t.damping_order, where);
    read_field(j, "sample_residue_hyper", t.sample_residue_hyper, where);
    if (t.a.size() != t.frequency_order)
        t.a.resize(t.frequency_order, PriorSpec::normal(0.0, 1.0));
    if (t.b.size() != t.damping_order)
        t.b.resize(t.damping_order, PriorSpec::normal(0.0, 1.0));
    if (j.contains("priors")) {
        const auto& p = j["priors"];
        const std::string w = where + ".priors";
        if (cfg.model == ModelKind::population) {
            reject_unknown(p, w,
                           {"mu_omega", "sigma2_omega", "alpha_zeta", "beta_zeta", "mu_A", "sigma2_A", "mu_sigma2",
                            "sigma2_sigma2"});
            parse_prior_list(p, "mu_omega", h.mu_omega, w);
            parse_prior_list(p, "sigma2_omega", h.sigma2_omega, w);
            parse_prior_list(p, "alpha_zeta", h.alpha_zeta, w);
            parse_prior_list(p, "beta_zeta", h.beta_zeta, w);
            parse_prior_list(p, "mu_A", h.mu_A, w);
            parse_prior_list(p, "sigma2_A", h.sigma2_A, w);
            parse_prior_field(p, "mu_sigma2", h.mu_sigma2, w);
            parse_prior_field(p, "sigma2_sigma2", h.sigma2_sigma2, w);
        } else {
            reject_unknown(p, w, {"mu_omega", "mu_zeta", "a", "b", "mu_A", "sigma2_A", "sigma2_H"});
            parse_prior_field(p, "mu_omega", t.mu_omega, w);
            parse_prior_field(p, "mu_zeta", t.mu_zeta, w);
            parse_prior_list(p, "a", t.a, w);
            parse_prior_list(p, "b", t.b, w);
            parse_prior_field(p, "mu_A", t.mu_A, w);
            parse_prior_field(p, "sigma2_A", t.sigma2_A, w);
            parse_prior_field(p, "sigma2_H", t.sigma2_H, w);
        }
    }
    // a mode count without matching priors trims the defaults or repeats the last one
    for (auto* v : {&h.mu_omega, &h.sigma2_omega, &h.alpha_zeta, &h.beta_zeta, &h.mu_A, &h.sigma2_A})
        if (!v->empty() && v->size() != h.modes)
            v->resize(h.modes, v->back());
    try {
        if (cfg.model == ModelKind::population)
            h.validate();
        else
            t.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline void parse_sampler(const Json& j, SamplerConfig& s)
{
    const std::string where = "sampler";
    reject_unknown(j, where,
                   {"chains", "warmup", "draws", "target_accept", "max_tree_depth", "divergence_threshold",
                    "initial_step_size", "threads", "adapt_step_size", "adapt_metric", "init_buffer",
                    "term_buffer", "base_window"});
    read_field(j, "chains", s.chains, where);
    read_field(j, "warmup", s.warmup_draws, where);
    read_field(j, "draws", s.sampling_draws, where);
    read_field(j, "target_accept", s.target_accept, where);
    read_field(j, "max_tree_depth", s.max_tree_depth, where);
    read_field(j, "divergence_threshold", s.divergence_energy_threshold, where);
    read_field(j, "initial_step_size", s.initial_step_size, where);
    read_field(j, "threads", s.threads, where);
    read_field(j, "adapt_step_size", s.adapt_step_size, where);
    read_field(j, "adapt_metric", s.adapt_metric, where);
    read_field(j, "init_buffer", s.init_buffer_fraction, where);
    read_field(j, "term_buffer", s.term_buffer_fraction, where);
    read_field(j, "base_window", s.base_window, where);
    try {
        s.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

/// Relative paths in a config file are taken relative to that file.
inline std::string resolve(const std::filesystem::path& base, const std::string& p)
{
    if (p.empty() || std::filesystem::path(p).is_absolute() || base.empty())
        return p;
    return (base / p).lexically_normal().string();
}

} // namespace detail

/// Parses a configuration document; `base_dir` anchors relative paths.
inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = {})
{
    using namespace detail;
    reject_unknown(j, "config",
                   {"seed", "out_dir", "simulate", "estimate", "data", "model", "sampler", "analysis", "predict"});
    RunConfig cfg;
    read_field(j, "seed", cfg.seed, "config");
    read_field(j, "out_dir", cfg.out_dir, "config");
    cfg.out_dir = resolve(base_dir, cfg.out_dir);
    if (j.contains("simulate"))
        cfg.simulate = parse_simulate(j["simulate"]);
    if (j.contains("estimate")) {
        const auto& e = j["estimate"];
        reject_unknown(e, "estimate", {"force", "response", "output", "blocks", "window", "band_hz"});
        read_field(e, "force", cfg.estimate.force, "estimate");
        read_field(e, "response", cfg.estimate.response, "estimate");
        read_field(e, "output", cfg.estimate.output, "estimate");
        read_field(e, "blocks", cfg.estimate.blocks, "estimate");
        cfg.estimate.force = resolve(base_dir, cfg.estimate.force);
        cfg.estimate.response = resolve(base_dir, cfg.estimate.response);
        if (e.contains("window")) {
            const auto w = e["window"].get<std::string>();
            if (w == "hann")
                cfg.estimate.window = Window::hann;
            else if (w == "rectangular")
                cfg.estimate.window = Window::rectangular;
            else
                throw ConfigError("estimate.window: expected 'hann' or 'rectangular'");
        }
        if (e.contains("band_hz"))
            cfg.estimate.band = parse_band(e["band_hz"], "estimate.band_hz");
    }
    if (j.contains("data")) {
        const auto& d = j["data"];
        reject_unknown(d, "data", {"train", "test", "band_hz"});
        read_field(d, "train", cfg.data.train, "data");
        read_field(d, "test", cfg.data.test, "data");
        for (auto& p : cfg.data.train)
            p = resolve(base_dir, p);
        for (auto& p : cfg.data.test)
            p = resolve(base_dir, p);
        if (d.contains("band_hz"))
            cfg.data.band = parse_band(d["band_hz"], "data.band_hz");
    }
    if (j.contains("model"))
        parse_model(j["model"], cfg);
    if (j.contains("sampler"))
        parse_sampler(j["sampler"], cfg.sampler);
    if (j.contains("analysis")) {
        const auto& a = j["analysis"];
        reject_unknown(a, "analysis",
                       {"band_composition", "rhat_threshold", "max_divergence_rate", "kde_points", "band_step_hz"});
        if (a.contains("band_composition")) {
            const auto c = a["band_composition"].get<std::string>();
            if (c == "std_plus_noise")
                cfg.analysis.band_composition = BandComposition::std_plus_noise;
            else if (c == "variance_additive")
                cfg.analysis.band_composition = BandComposition::variance_additive;
            else
                throw ConfigError("analysis.band_composition: expected 'std_plus_noise' or 'variance_additive'");
        }
        read_field(a, "rhat_threshold", cfg.analysis.rhat_threshold, "analysis");
        read_field(a, "max_divergence_rate", cfg.analysis.max_divergence_rate, "analysis");
        read_field(a, "kde_points", cfg.analysis.kde_points, "analysis");
        read_field(a, "band_step_hz", cfg.analysis.band_step_hz, "analysis");
        if (cfg.analysis.kde_points < 2 || !(cfg.analysis.band_step_hz > 0.0))
            throw ConfigError("analysis: kde_points must be at least 2 and band_step_hz positive");
    }
    if (j.contains("predict")) {
        const auto& p = j["predict"];
        reject_unknown(p, "predict", {"temperatures_c", "fit_dir"});
        read_field(p, "temperatures_c", cfg.predict.temperatures_c, "predict");
        read_field(p, "fit_dir", cfg.predict.fit_dir, "predict");
        cfg.predict.fit_dir = resolve(base_dir, cfg.predict.fit_dir);
    }
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
    return parse_run_config(read_json(path), path.parent_path());
}

} // namespace frfhb
