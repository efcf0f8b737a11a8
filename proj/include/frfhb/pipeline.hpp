#pragma once

// End-to-end commands behind the command-line tool. Each returns an exit
// status (0 success, 3 convergence failure) and throws frfhb errors for
// configuration and data problems.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "frfhb/analysis.hpp"
#include "frfhb/config.hpp"
#include "frfhb/diagnostics.hpp"
#include "frfhb/io.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/model.hpp"
#include "frfhb/nuts.hpp"
#include "frfhb/random.hpp"
#include "frfhb/signal.hpp"
#include "frfhb/synthetic.hpp"

namespace frfhb {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_data = 2;
inline constexpr int exit_convergence = 3;

namespace fs = std::filesystem;

namespace detail {

/// File-system friendly form of a parameter name: "omega[1,2]" -> "omega_1_2".
inline std::string file_stem(const std::string& name)
{
    std::string out;
    for (char c : name) {
        if (c == '[' || c == ',')
            out += '_';
        else if (c != ']')
            out += c;
    }
    return out;
}

inline std::string temperature_tag(double t) { return "T" + format_double(t); }

/// Expands directories into their CSV files (sorted by name).
inline std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs)
{
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file() && e.path().extension() == ".csv")
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            out.insert(out.end(), files.begin(), files.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

inline FrfDomain restrict_to_band(FrfDomain d, const std::optional<Band>& band)
{
    if (!band)
        return d;
    std::erase_if(d.points, [&](const FrfObservation& o) { return !band->contains_hz(rad_to_hz(o.omega)); });
    return d;
}

inline FrfDataset load_frfs(const std::vector<std::string>& inputs, const std::optional<Band>& band,
                            const char* what)
{
    FrfDataset data;
    for (const auto& p : expand_inputs(inputs)) {
        auto d = restrict_to_band(read_frf_csv(p), band);
        if (d.points.empty())
            throw DataError(p.string() + ": no observations inside the configured band");
        data.domains.push_back(std::move(d));
    }
    if (data.domains.empty())
        throw ConfigError(std::string("no ") + what + " FRF files configured");
    return data;
}

/// Dense Hz grid spanning the configured band, or the data when none is set.
inline FrequencyGrid band_grid(const FrfDataset& data, const RunConfig& cfg)
{
    double lo = 0.0, hi = 0.0;
    if (cfg.data.band) {
        lo = cfg.data.band->lo_hz;
        hi = cfg.data.band->hi_hz;
    } else {
        lo = std::numeric_limits<double>::infinity();
        hi = 0.0;
        for (const auto& d : data.domains)
            for (const auto& o : d.points) {
                lo = std::min(lo, rad_to_hz(o.omega));
                hi = std::max(hi, rad_to_hz(o.omega));
            }
    }
    if (!(hi > lo))
        hi = lo + cfg.analysis.band_step_hz;
    return FrequencyGrid::linspace_step(lo, hi, cfg.analysis.band_step_hz, FrequencyUnit::hz);
}

inline const std::vector<std::string>& trace_stat_columns()
{
    static const std::vector<std::string> cols{"chain",    "draw",      "accept_stat", "tree_depth",
                                               "n_leapfrog", "divergent", "energy"};
    return cols;
}

inline CsvTable trace_table(const Trace& trace, const PosteriorDraws& draws, const Layout& layout)
{
    CsvTable t;
    t.header = trace_stat_columns();
    for (const auto& n : layout.names())
        t.header.push_back(n);
    for (std::size_t c = 0; c < trace.chains.size(); ++c) {
        const auto& ch = trace.chains[c];
        for (std::size_t d = 0; d < ch.size(); ++d) {
            const auto& s = ch.stats[d];
            std::vector<double> row{static_cast<double>(c + 1), static_cast<double>(d + 1), s.accept_stat,
                                    static_cast<double>(s.tree_depth), static_cast<double>(s.n_leapfrog),
                                    s.divergent ? 1.0 : 0.0, s.energy};
            const auto x = draws.draw(c, d);
            row.insert(row.end(), x.begin(), x.end());
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

struct StoredTrace {
    std::vector<std::string> names;
    PosteriorDraws draws;
    std::size_t divergences = 0;
};

/// Reads a trace written by `fit` (constrained draws plus sampler statistics).
inline StoredTrace read_trace(const fs::path& path)
{
    const auto t = read_csv(path);
    const auto& stats = trace_stat_columns();
    if (t.header.size() <= stats.size() || !std::equal(stats.begin(), stats.end(), t.header.begin()))
        throw DataError(path.string() + ": not a trace file");
    StoredTrace out;
    out.names.assign(t.header.begin() + static_cast<std::ptrdiff_t>(stats.size()), t.header.end());
    const std::size_t dim = out.names.size();
    std::vector<std::vector<double>> chains;
    for (const auto& r : t.rows) {
        const auto c = static_cast<std::size_t>(r[0]);
        if (c < 1 || static_cast<double>(c) != r[0])
            throw DataError(path.string() + ": invalid chain index");
        if (chains.size() < c)
            chains.resize(c);
        chains[c - 1].insert(chains[c - 1].end(), r.begin() + static_cast<std::ptrdiff_t>(stats.size()), r.end());
        out.divergences += r[5] != 0.0 ? 1 : 0;
    }
    out.draws = PosteriorDraws(dim, std::move(chains));
    return out;
}

inline Json summary_json(const PosteriorSummary& s)
{
    Json params = Json::object();
    for (const auto& p : s.parameters)
        params[p.name] = {{"mean", p.mean},          {"sd", p.sd},     {"q05", p.q05},
                          {"q50", p.q50},            {"q95", p.q95},   {"rhat", p.rhat},
                          {"ess_bulk", p.ess_bulk}, {"mcse_mean", p.mcse_mean}};
    return params;
}

inline bool converged(const PosteriorSummary& s, const AnalysisConfig& a)
{
    return s.max_rhat() <= a.rhat_threshold && s.divergence_rate() <= a.max_divergence_rate;
}

inline CsvTable kde_table(const KdeCurve& k)
{
    CsvTable t;
    t.header = {"x", "density"};
    for (std::size_t i = 0; i < k.grid.size(); ++i)
        t.rows.push_back({k.grid[i], k.density[i]});
    return t;
}

inline CsvTable band_table(const PredictiveBand& b, std::span<const double> point = {})
{
    CsvTable t;
    t.header = {"freq_hz"};
    if (!point.empty())
        t.header.push_back("prediction");
    for (const char* c : {"mean", "lower", "upper", "sd"})
        t.header.push_back(c);
    const auto hz = b.grid.in(FrequencyUnit::hz);
    const auto f = hz.values();
    for (std::size_t i = 0; i < f.size(); ++i) {
        std::vector<double> row{f[i]};
        if (!point.empty())
            row.push_back(point[i]);
        row.insert(row.end(), {b.mean[i], b.lower[i], b.upper[i], b.sd[i]});
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Fits one model and writes trace, summary, KDE and band files into `dir`.
inline int fit_one(const FrfDataset& data, const RunConfig& cfg, const fs::path& dir, std::uint64_t seed,
                   PoolingMode pooling, std::ostream& log)
{
    const auto model = build_model(data, cfg.model_spec(), pooling);
    const auto& layout = model->layout();
    SamplerConfig sc = cfg.sampler;
    sc.seed = seed;
    const auto trace = adapt_and_sample(
        *model, sc, std::function<std::vector<double>(Rng&)>([&](Rng& rng) { return model->initial_point(rng); }));
    const PosteriorDraws draws(trace, layout);
    const auto summary = summarise(draws, layout, trace.divergences());
    const bool ok = converged(summary, cfg.analysis);

    write_csv(dir / "trace.csv", trace_table(trace, draws, layout));

    Json domains = Json::array();
    for (const auto& d : data.domains) {
        Json dj = {{"name", d.name}, {"points", d.points.size()}};
        if (d.temperature_c)
            dj["temperature_c"] = *d.temperature_c;
        domains.push_back(dj);
    }
    Json sj = {
        {"model", cfg.model == ModelKind::temperature ? "temperature" : "population"},
        {"pooling", to_string(pooling)},
        {"seed", seed},
        {"chains", sc.chains},
        {"warmup_draws", sc.warmup_draws},
        {"draws_per_chain", sc.sampling_draws},
        {"target_accept", sc.target_accept},
        {"domains", domains},
        {"divergences", summary.divergences},
        {"divergence_rate", summary.divergence_rate()},
        {"max_rhat", summary.max_rhat()},
        {"converged", ok},
        {"step_sizes", Json::array()},
        {"parameters", summary_json(summary)},
    };
    for (const auto& c : trace.chains)
        sj["step_sizes"].push_back(c.step_size);
    write_json(dir / "summary.json", sj);

    for (std::size_t i = 0; i < layout.size(); ++i) {
        const auto v = draws.pooled(i);
        if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); }))
            continue;
        write_csv(dir / "kde" / (file_stem(layout[i].name) + ".csv"), kde_table(kde(v, cfg.analysis.kde_points)));
    }

    if (const auto* pm = dynamic_cast<const PopulationModel*>(model.get())) {
        auto rng = make_stream(seed, 0x5eed);
        const int groups = pooling == PoolingMode::none ? static_cast<int>(data.size()) : 1;
        for (int g = 0; g < groups; ++g) {
            const int group = groups > 1 ? g : -1;
            const std::string suffix = groups > 1 ? "_" + std::to_string(g + 1) : "";
            for (const char* role : {"omega", "zeta", "A"})
                for (std::size_t m = 0; m < pm->modes(); ++m)
                    write_csv(dir / "population" / (std::string(role) + "_" + std::to_string(m + 1) + suffix + ".csv"),
                              kde_table(population_marginal(draws, layout, role, m, rng, group,
                                                            cfg.analysis.kde_points)));
            write_csv(dir / "population" / ("sigma2_H" + suffix + ".csv"),
                      kde_table(population_marginal(draws, layout, "sigma2_H", 0, rng, group, cfg.analysis.kde_points)));
        }
    }

    const auto grid = band_grid(data, cfg);
    for (std::size_t k = 0; k < data.size(); ++k)
        write_csv(dir / "bands" / (data.domains[k].name + ".csv"),
                  band_table(posterior_predictive_frf(draws, *model, grid, k, cfg.analysis.band_composition)));

    log << dir.string() << ": " << layout.size() << " parameters, max R-hat " << summary.max_rhat() << ", "
        << summary.divergences << " divergences in " << summary.draws << " draws\n";
    if (!ok)
        log << dir.string() << ": convergence thresholds not met (R-hat <= " << cfg.analysis.rhat_threshold
            << ", divergence rate <= " << cfg.analysis.max_divergence_rate << ")\n";
    return ok ? exit_ok : exit_convergence;
}

inline fs::path fit_directory(const RunConfig& cfg)
{
    return cfg.predict.fit_dir.empty() ? fs::path(cfg.out_dir) : fs::path(cfg.predict.fit_dir);
}

} // namespace detail

/// Writes noise-free truth FRFs, noisy decimated training FRFs and a
/// ground-truth JSON for the configured synthetic population.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& log)
{
    const auto syn = generate_synthetic(cfg.simulate, cfg.seed);
    const fs::path out(cfg.out_dir);
    const auto grid = cfg.simulate.grid();
    Json domains = Json::array();
    for (std::size_t k = 0; k < cfg.simulate.domains.size(); ++k) {
        const auto& d = cfg.simulate.domains[k];
        const auto imag = frf_imag(ModalParameterSet(d.modes), grid);
        write_frf_csv(out / "truth" / (d.name + ".csv"), syn.truth.domains[k], imag);
        Json modes = Json::array();
        for (const auto& m : d.modes)
            modes.push_back({{"natural_frequency_hz", rad_to_hz(m.natural_frequency)},
                             {"natural_frequency_rad_s", m.natural_frequency},
                             {"damping_ratio", m.damping_ratio},
                             {"residue", m.residue}});
        Json dj = {{"name", d.name}, {"train_points", d.train_points}, {"modes", modes}};
        if (d.temperature_c)
            dj["temperature_c"] = *d.temperature_c;
        domains.push_back(dj);
    }
    for (const auto& d : syn.train.domains)
        write_frf_csv(out / "train" / (d.name + ".csv"), d);
    Json gt = {{"seed", cfg.seed},
               {"band_hz", {cfg.simulate.band_lo_hz, cfg.simulate.band_hi_hz}},
               {"step_hz", cfg.simulate.step_hz},
               {"noise_fraction", cfg.simulate.noise_fraction},
               {"noise_std", syn.noise_std},
               {"domains", domains}};
    if (cfg.simulate.law) {
        const auto& l = *cfg.simulate.law;
        gt["temperature_law"] = {
            {"mu_omega_rad_s", l.mu_omega}, {"a", l.a}, {"mu_zeta", l.mu_zeta}, {"b", l.b},
            {"residue", cfg.simulate.law_residue}};
    }
    write_json(out / "ground_truth.json", gt);
    log << "wrote " << syn.truth.size() << " truth and " << syn.train.size() << " training FRFs to " << out.string()
        << "\n";
    return exit_ok;
}

/// H1 FRF estimate from force/response time series.
inline int cmd_estimate_frf(const RunConfig& cfg, std::ostream& log)
{
    if (cfg.estimate.force.empty() || cfg.estimate.response.empty())
        throw ConfigError("estimate: 'force' and 'response' time-series files are required");
    const auto force = read_time_series_csv(cfg.estimate.force);
    const auto response = read_time_series_csv(cfg.estimate.response);
    if (force.sample_rate != response.sample_rate &&
        std::abs(force.sample_rate - response.sample_rate) > 1e-9 * force.sample_rate)
        throw DataError("force and response sample rates differ");
    const auto est = h1_estimate(force, response, cfg.estimate.blocks, cfg.estimate.window);
    const auto f = est.frequencies().values();
    CsvTable t;
    t.header = {"freq_hz", "real", "imag"};
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (cfg.estimate.band && !cfg.estimate.band->contains_hz(f[i]))
            continue;
        t.rows.push_back({f[i], est.frf[i].real(), est.frf[i].imag()});
    }
    if (t.rows.empty())
        throw DataError("no spectral lines inside the configured band");
    const fs::path out = fs::path(cfg.out_dir) / cfg.estimate.output;
    write_csv(out, t);
    log << "wrote " << t.rows.size() << " spectral lines to " << out.string() << "\n";
    return exit_ok;
}

/// Fits the configured model. With no pooling each domain is fitted on its
/// own and written to a subdirectory named after it.
inline int cmd_fit(const RunConfig& cfg, std::ostream& log)
{
    const auto data = detail::load_frfs(cfg.data.train, cfg.data.band, "training");
    const fs::path out(cfg.out_dir);
    if (cfg.model == ModelKind::population && cfg.pooling == PoolingMode::none) {
        int status = exit_ok;
        for (std::size_t k = 0; k < data.size(); ++k) {
            FrfDataset one;
            one.domains.push_back(data.domains[k]);
            const int s = detail::fit_one(one, cfg, out / data.domains[k].name, splitmix64(cfg.seed + 0x200 + k),
                                          PoolingMode::none, log);
            status = std::max(status, s);
        }
        return status;
    }
    return detail::fit_one(data, cfg, out, cfg.seed, cfg.pooling, log);
}

/// Temperature extrapolation from a fitted temperature model: point
/// predictions from posterior expectations, per-draw bands, and NMSE
/// against temperature-tagged test FRFs (training points excluded).
inline int cmd_predict(const RunConfig& cfg, std::ostream& log)
{
    if (cfg.model != ModelKind::temperature)
        throw ConfigError("predict needs a temperature model (model.type = \"temperature\")");
    const auto train = detail::load_frfs(cfg.data.train, cfg.data.band, "training");
    const TemperatureModel model(train, cfg.temperature);
    const auto stored = detail::read_trace(detail::fit_directory(cfg) / "trace.csv");
    if (stored.names != model.layout().names())
        throw DataError("trace parameters do not match the configured temperature model");
    const auto& draws = stored.draws;

    std::vector<FrfDomain> tests;
    for (const auto& p : detail::expand_inputs(cfg.data.test)) {
        auto d = detail::restrict_to_band(read_frf_csv(p), cfg.data.band);
        if (!d.temperature_c)
            throw DataError(p.string() + ": missing temperature_c column");
        tests.push_back(std::move(d));
    }

    const auto& temps = cfg.predict.temperatures_c;
    const auto points = extrapolate_temperature(draws, model, temps);
    const auto bands = extrapolate_temperature_band(draws, model, temps);
    CsvTable ext;
    ext.header = {"temperature_c",      "natural_frequency_hz", "natural_frequency_lower_hz",
                  "natural_frequency_upper_hz", "damping_ratio", "damping_ratio_lower", "damping_ratio_upper"};
    for (std::size_t i = 0; i < temps.size(); ++i)
        ext.rows.push_back({temps[i], rad_to_hz(points[i].mode.natural_frequency),
                            rad_to_hz(bands[i].natural_frequency.lower), rad_to_hz(bands[i].natural_frequency.upper),
                            points[i].mode.damping_ratio, bands[i].damping_ratio.lower, bands[i].damping_ratio.upper});
    const fs::path out(cfg.out_dir);
    write_csv(out / "extrapolation.csv", ext);

    CsvTable table;
    table.header = {"temperature_c", "nmse_percent", "points"};
    const auto default_grid = detail::band_grid(train, cfg);
    for (std::size_t i = 0; i < temps.size(); ++i) {
        const double t = temps[i];
        const auto test = std::find_if(tests.begin(), tests.end(), [&](const FrfDomain& d) { return *d.temperature_c == t; });
        std::vector<FrfObservation> scored;
        FrequencyGrid grid = default_grid;
        if (test != tests.end()) {
            // spectral lines used for training at this temperature are not scored
            std::vector<double> trained;
            for (const auto& d : train.domains)
                if (d.temperature_c && *d.temperature_c == t)
                    for (const auto& o : d.points)
                        trained.push_back(o.omega);
            for (const auto& o : test->points) {
                const bool used = std::any_of(trained.begin(), trained.end(), [&](double w) {
                    return std::abs(w - o.omega) <= 1e-9 * std::abs(o.omega);
                });
                if (!used)
                    scored.push_back(o);
            }
            std::vector<double> w;
            for (const auto& o : test->points)
                w.push_back(o.omega);
            grid = FrequencyGrid::rad_per_s(std::move(w));
        }
        const std::vector<Mode> mode{points[i].mode};
        std::vector<double> point;
        for (double w : grid.radians())
            point.push_back(frf_real_at(mode, w));
        const auto band = posterior_predictive_frf_at(draws, model, grid, t, cfg.analysis.band_composition);
        write_csv(out / "predict" / (detail::temperature_tag(t) + ".csv"), detail::band_table(band, point));
        if (test != tests.end()) {
            if (scored.empty())
                throw DataError("no test points left at " + format_double(t) + " C after excluding training points");
            std::vector<double> y, ys;
            for (const auto& o : scored) {
                y.push_back(o.value);
                ys.push_back(frf_real_at(mode, o.omega));
            }
            table.rows.push_back({t, nmse(y, ys), static_cast<double>(y.size())});
        }
    }
    write_csv(out / "nmse.csv", table);
    log << "Temperature [C]  NMSE [%]\n";
    for (const auto& r : table.rows) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%15g  %8.4f\n", r[0], r[1]);
        log << buf;
    }
    return exit_ok;
}

/// Recomputes convergence diagnostics for the traces under the fit directory.
inline int cmd_diagnose(const RunConfig& cfg, std::ostream& log)
{
    const fs::path root = detail::fit_directory(cfg);
    std::vector<fs::path> dirs;
    if (fs::exists(root / "trace.csv")) {
        dirs.push_back(root);
    } else if (fs::is_directory(root)) {
        for (const auto& e : fs::directory_iterator(root))
            if (e.is_directory() && fs::exists(e.path() / "trace.csv"))
                dirs.push_back(e.path());
        std::sort(dirs.begin(), dirs.end());
    }
    if (dirs.empty())
        throw DataError("no trace.csv under '" + root.string() + "'");
    int status = exit_ok;
    for (const auto& dir : dirs) {
        const auto stored = detail::read_trace(dir / "trace.csv");
        Layout layout;
        for (const auto& n : stored.names)
            layout.add({n, n, -1, -1, Transform::identity});
        const auto s = summarise(stored.draws, layout, stored.divergences);
        const bool ok = detail::converged(s, cfg.analysis);
        write_json(dir / "diagnostics.json",
                   {{"divergences", s.divergences},
                    {"divergence_rate", s.divergence_rate()},
                    {"max_rhat", s.max_rhat()},
                    {"converged", ok},
                    {"parameters", detail::summary_json(s)}});
        log << dir.string() << "\n";
        char buf[160];
        std::snprintf(buf, sizeof buf, "  %-22s %14s %12s %10s %10s\n", "parameter", "mean", "sd", "R-hat", "ESS");
        log << buf;
        for (const auto& p : s.parameters) {
            std::snprintf(buf, sizeof buf, "  %-22s %14.6g %12.4g %10.4f %10.0f\n", p.name.c_str(), p.mean, p.sd, p.rhat,
                          p.ess_bulk);
            log << buf;
        }
        log << "  divergences: " << s.divergences << " / " << s.draws << (ok ? "" : "  [thresholds not met]") << "\n";
        if (!ok)
            status = exit_convergence;
    }
    return status;
}

} // namespace frfhb
