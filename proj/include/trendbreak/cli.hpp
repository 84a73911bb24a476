#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "trendbreak/gridio.hpp"
#include "trendbreak/raster.hpp"
#include "trendbreak/textio.hpp"
#include "trendbreak/trendbreak.hpp"

namespace trendbreak::cli {

using nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 64;   // bad flags or invalid configuration
inline constexpr int kExitData = 65;    // unreadable or malformed input
inline constexpr int kExitRuntime = 70; // everything else

namespace detail {

inline json meta_block(const std::string& command, const json& config,
                       const std::string& input_path,
                       const std::string& input_bytes) {
    json m;
    m["tool"] = "trendbreak";
    m["version"] = kVersion;
    m["command"] = command;
    m["config"] = config;
    if (!input_path.empty()) {
        m["input"] = input_path;
        m["input_digest"] = fnv1a64_hex(input_bytes);
    }
    return m;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline void emit(const std::string& out_dir, const std::string& filename,
                 const std::string& bytes) {
    if (out_dir.empty()) {
        std::cout << bytes;
        return;
    }
    std::filesystem::create_directories(out_dir);
    const auto path = (std::filesystem::path(out_dir) / filename).string();
    write_file(path, bytes);
    std::cerr << "wrote " << path << "\n";
}

inline json fit_to_json(const LinearFit& f) {
    return json{{"slope", f.slope},
                {"slope_per_century", f.slope * 100.0},
                {"intercept", f.intercept},
                {"rss", f.rss},
                {"rmse", f.rmse}};
}

inline json fit_to_json(const DualFit& f) {
    return json{{"change_year", f.change_year},
                {"change_index", f.change_index},
                {"a1", f.a1},
                {"a1_per_century", f.a1 * 100.0},
                {"b1", f.b1},
                {"a2", f.a2},
                {"a2_per_century", f.a2 * 100.0},
                {"b2", f.b2},
                {"slope_gap", f.slope_gap()},
                {"rss", f.rss},
                {"rmse", f.rmse}};
}

inline json selection_to_json(const ModelSelection& sel) {
    const auto num = [](double v) -> json {
        if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
        return v;
    };
    return json{{"aic_single", num(sel.aic_single)},
                {"aic_dual", num(sel.aic_dual)},
                {"bic_single", num(sel.bic_single)},
                {"bic_dual", num(sel.bic_dual)},
                {"delta_bic_dual_minus_single", num(sel.delta_bic)},
                {"preferred", to_string(sel.preferred)}};
}

inline json significance_to_json(const SignificanceResult& r) {
    return json{{"s_obs", r.s_obs},
                {"s_obs_per_century", r.s_obs * 100.0},
                {"change_year_obs", r.change_year_obs},
                {"threshold", r.threshold},
                {"reject_no_change_null", r.reject},
                {"ensemble_size", r.ensemble_size},
                {"confidence", r.confidence},
                {"bin_width_years", r.bin_width},
                {"min_bin_samples", r.min_bin_samples},
                {"pooled_samples", r.pooled_samples},
                {"pooled_fallback", r.pooled_fallback},
                {"noise", to_string(r.noise)},
                {"sigma_null", r.sigma_null},
                {"d_null", r.d_null}};
}

inline json curve_to_json(const std::vector<ScanPoint>& curve) {
    json arr = json::array();
    for (const auto& p : curve)
        arr.push_back(json{{"change_year", p.change_year}, {"rmse", p.rmse}});
    return arr;
}

} // namespace detail

struct CommonOpts {
    int margin = 10;
    bool allow_small_margin = false;
    int ensemble_size = 1000;
    std::uint64_t seed = 0;
    std::string noise = "white";
    double d = std::numeric_limits<double>::quiet_NaN();
    double sigma = 0.45;
    int workers = 1;
    std::string out;
    std::string format = "csv";

    NoiseKind noise_kind() const {
        if (noise == "white") return NoiseKind::white;
        if (noise == "arfima") return NoiseKind::arfima;
        throw std::invalid_argument("noise must be white or arfima");
    }
    SigConfig sig_config() const {
        SigConfig c;
        c.ensemble_size = ensemble_size;
        c.noise = noise_kind();
        if (std::isfinite(d)) c.d = d;
        c.seed = seed;
        c.margin = margin;
        c.allow_small_margin = allow_small_margin;
        c.workers = workers;
        return c;
    }
    json config_json() const {
        json j{{"margin", margin},
               {"ensemble_size", ensemble_size},
               {"seed", seed},
               {"noise", noise},
               {"sigma", sigma},
               {"workers", workers},
               {"format", format}};
        if (std::isfinite(d)) j["d"] = d;
        return j;
    }
};

// ---------------------------------------------------------------- fit

inline int run_fit(const std::string& input, const CommonOpts& opt,
                   bool with_significance) {
    const std::string bytes = trendbreak::detail::read_file(input);
    const AnnualSeries series = series_from_csv(bytes);

    ScanOptions sopt;
    sopt.margin = opt.margin;
    sopt.allow_small_margin = opt.allow_small_margin;
    const ScanResult scan = scan_change_point(series, sopt);
    const LinearFit single = fit_single(series);
    const ModelSelection sel = select_model(series, scan);

    json report;
    report["meta"] = detail::meta_block("fit", opt.config_json(), input, bytes);
    report["series"] = json{{"start_year", series.start_year},
                            {"end_year", series.last_year()},
                            {"n_years", series.n()}};
    report["single"] = detail::fit_to_json(single);
    report["dual"] = detail::fit_to_json(scan.best);
    report["selection"] = detail::selection_to_json(sel);
    if (with_significance)
        report["significance"] =
            detail::significance_to_json(test_change_point(series, scan, opt.sig_config()));
    else
        report["significance"] = nullptr;
    report["rmse_curve"] = detail::curve_to_json(scan.rmse_curve);
    report["candidates"] = detail::curve_to_json(scan.candidates);

    detail::emit(opt.out, "fit.json", detail::dump(report));
    return kExitOk;
}

// ---------------------------------------------------------------- scan

inline int run_scan(const std::string& input, const CommonOpts& opt) {
    const std::string bytes = trendbreak::detail::read_file(input);
    const AnnualSeries series = series_from_csv(bytes);

    ScanOptions sopt;
    sopt.margin = opt.margin;
    sopt.allow_small_margin = opt.allow_small_margin;
    const ScanResult scan = scan_change_point(series, sopt);

    std::string csv = "change_year,rmse\n";
    for (const auto& p : scan.rmse_curve) {
        csv += std::to_string(p.change_year);
        csv += ',';
        csv += trendbreak::detail::fmt_double(p.rmse);
        csv += '\n';
    }
    detail::emit(opt.out, "scan.csv", csv);
    if (!opt.out.empty()) {
        json j;
        j["meta"] = detail::meta_block("scan", opt.config_json(), input, bytes);
        j["best"] = detail::fit_to_json(scan.best);
        j["candidates"] = detail::curve_to_json(scan.candidates);
        detail::emit(opt.out, "scan.json", detail::dump(j));
    }
    return kExitOk;
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
    int n_years = 70;
    int start_year = 1;
    std::optional<int> break_year;
    double slope1 = 0.0;
    double slope2 = 0.0;
};

inline void add_synth(CLI::App* cmd, SynthOpts& so) {
    cmd->add_option("--n-years", so.n_years, "series length")->check(CLI::Range(3, 1000000));
    cmd->add_option("--start-year", so.start_year, "first calendar year");
    cmd->add_option("--break-year", so.break_year, "calendar year of the trend change");
    cmd->add_option("--slope1", so.slope1, "trend before the break (unit/year)");
    cmd->add_option("--slope2", so.slope2, "trend after the break (unit/year)");
}

inline SynthConfig make_synth_config(const SynthOpts& so, const CommonOpts& opt) {
    SynthConfig cfg;
    cfg.n_years = so.n_years;
    cfg.start_year = so.start_year;
    if (so.break_year) {
        const int T = *so.break_year - so.start_year + 1;
        cfg.change_index = T;
    }
    cfg.slope1 = so.slope1;
    cfg.slope2 = so.slope2;
    cfg.sigma = opt.sigma;
    cfg.noise = opt.noise_kind();
    cfg.d = std::isfinite(opt.d) ? opt.d : 0.0;
    cfg.seed = opt.seed;
    return cfg;
}

inline json synth_config_json(const SynthOpts& so, const CommonOpts& opt) {
    json j = opt.config_json();
    j["n_years"] = so.n_years;
    j["start_year"] = so.start_year;
    if (so.break_year) j["break_year"] = *so.break_year;
    j["slope1"] = so.slope1;
    j["slope2"] = so.slope2;
    return j;
}

inline int run_synth(const SynthOpts& so, const CommonOpts& opt) {
    const AnnualSeries s = synth_series(make_synth_config(so, opt));
    detail::emit(opt.out, "synth.csv", series_to_csv(s));
    if (!opt.out.empty()) {
        json meta;
        meta["meta"] = detail::meta_block("synth", synth_config_json(so, opt), "", "");
        detail::emit(opt.out, "synth.meta.json", detail::dump(meta));
    }
    return kExitOk;
}

// ---------------------------------------------------------------- ensemble

inline int run_ensemble(const SynthOpts& so, const CommonOpts& opt, int members) {
    const SynthConfig cfg = make_synth_config(so, opt);
    EnsembleOptions eopt;
    eopt.margin = opt.margin;
    eopt.allow_small_margin = opt.allow_small_margin;
    const EnsembleSummary sum = ensemble_experiment(cfg, members, eopt);

    std::string hist = "change_year,count\n";
    for (const auto& [year, count] : sum.change_year_histogram) {
        hist += std::to_string(year);
        hist += ',';
        hist += std::to_string(count);
        hist += '\n';
    }
    // Fig-2 style sign convention: positive favors the dual model
    std::string dbic = "member,delta_bic_single_minus_dual\n";
    for (int m = 0; m < sum.members; ++m) {
        dbic += std::to_string(m);
        dbic += ',';
        dbic += trendbreak::detail::fmt_double(sum.delta_bic_single_minus_dual[m]);
        dbic += '\n';
    }

    json config = synth_config_json(so, opt);
    config["members"] = members;
    json j;
    j["meta"] = detail::meta_block("ensemble", config, "", "");
    j["members"] = sum.members;
    j["frac_within_5"] = sum.frac_within_5;
    j["frac_within_8"] = sum.frac_within_8;
    j["selection_accuracy"] = sum.selection_accuracy;
    j["dual_preferred"] = sum.dual_preferred;
    j["delta_bic_sign"] = "single_minus_dual";

    if (opt.out.empty()) {
        std::cout << detail::dump(j);
    } else {
        detail::emit(opt.out, "ensemble_histogram.csv", hist);
        detail::emit(opt.out, "ensemble_delta_bic.csv", dbic);
        detail::emit(opt.out, "ensemble_summary.json", detail::dump(j));
    }
    return kExitOk;
}

// ---------------------------------------------------------------- mc-test

inline int run_mc_test(const std::string& input, const CommonOpts& opt) {
    const std::string bytes = trendbreak::detail::read_file(input);
    const AnnualSeries series = series_from_csv(bytes);
    const SignificanceResult r = test_change_point(series, opt.sig_config());
    json j;
    j["meta"] = detail::meta_block("mc-test", opt.config_json(), input, bytes);
    j["significance"] = detail::significance_to_json(r);
    detail::emit(opt.out, "mc_test.json", detail::dump(j));
    return kExitOk;
}

// ---------------------------------------------------------------- global-mean

inline int run_global_mean(const std::string& input, const CommonOpts& opt) {
    const std::string bytes = trendbreak::detail::read_file(input);
    const GridDataset grid = load_grid(input);
    const AnnualSeries mean = global_mean_series(grid);
    detail::emit(opt.out, "global_mean.csv", series_to_csv(mean));
    if (!opt.out.empty()) {
        json j;
        j["meta"] = detail::meta_block("global-mean", opt.config_json(), input, bytes);
        const IngestReport rep = make_ingest_report(grid);
        j["grid"] = json{{"total_cells", rep.total_cells},
                         {"valid_cells", rep.valid_cells},
                         {"invalid_cells", rep.invalid_cells},
                         {"valid_land_cells", rep.land_cells}};
        detail::emit(opt.out, "global_mean.meta.json", detail::dump(j));
    }
    return kExitOk;
}

// ---------------------------------------------------------------- batch / map

inline void write_maps(const std::vector<CellResult>& results,
                       const std::string& out_dir, const json& meta) {
    json legend;
    legend["meta"] = meta;
    legend["background_rgb"] = json::array({255, 255, 255});
    legend["mask_rgb"] = json::array({128, 128, 128});
    legend["maps"] = json::array();
    for (MapField field : {MapField::change_year, MapField::a1, MapField::a2,
                           MapField::slope_diff, MapField::delta_bic}) {
        const MapRender render = render_map(results, field);
        const std::string name = std::string("map_") + to_string(field) + ".ppm";
        detail::emit(out_dir, name, raster_to_ppm(render.raster));
        legend["maps"].push_back(json{{"file", name},
                                      {"field", to_string(field)},
                                      {"ramp", render.ramp},
                                      {"vmin", render.vmin},
                                      {"vmax", render.vmax},
                                      {"single_model_masked", render.masked}});
    }
    detail::emit(out_dir, "map_legend.json", detail::dump(legend));
}

inline int run_batch(const std::string& input, const CommonOpts& opt,
                     bool significance) {
    if (opt.out.empty())
        throw std::invalid_argument("batch requires --out <dir>");
    const std::string bytes = trendbreak::detail::read_file(input);
    const GridDataset grid = load_grid(input);
    const IngestReport rep = make_ingest_report(grid);

    BatchConfig cfg;
    cfg.margin = opt.margin;
    cfg.significance = significance;
    cfg.sig = opt.sig_config();
    cfg.seed = opt.seed;
    cfg.workers = opt.workers;
    const std::vector<CellResult> results = batch_analyze(grid, cfg);

    int failed = 0;
    for (const auto& r : results)
        if (!r.ok) {
            ++failed;
            std::cerr << "cell (" << r.lat << "," << r.lon << ") failed: " << r.error
                      << "\n";
        }

    detail::emit(opt.out, "results.csv", results_to_csv(results));

    json config = opt.config_json();
    config["significance"] = significance;
    json meta;
    meta["meta"] = detail::meta_block("batch", config, input, bytes);
    meta["grid"] = json{{"n_lat", grid.n_lat()},
                        {"n_lon", grid.n_lon()},
                        {"n_years", grid.n_years},
                        {"start_year", grid.start_year},
                        {"total_cells", rep.total_cells},
                        {"valid_cells", rep.valid_cells},
                        {"invalid_cells", rep.invalid_cells},
                        {"valid_land_cells", rep.land_cells},
                        {"invalid_reasons", rep.invalid_reasons}};
    meta["analyzed_cells"] = results.size();
    meta["failed_cells"] = failed;
    detail::emit(opt.out, "results.meta.json", detail::dump(meta));

    const AreaSummary area = summarize_area(results);
    json sj;
    sj["meta"] = meta["meta"];
    sj["dual_area_fraction"] = area.dual_fraction;
    sj["single_area_fraction"] = area.single_fraction;
    if (area.any_tested) sj["significant_area_fraction"] = area.significant_fraction;
    sj["change_year_histogram"] = json::object();
    for (const auto& [year, count] : area.change_year_histogram)
        sj["change_year_histogram"][std::to_string(year)] = count;
    sj["change_year_cumulative"] = json::object();
    for (const auto& [year, frac] : area.change_year_cumulative)
        sj["change_year_cumulative"][std::to_string(year)] = frac;
    detail::emit(opt.out, "batch_summary.json", detail::dump(sj));

    if (opt.format == "ppm") write_maps(results, opt.out, meta["meta"]);
    return kExitOk;
}

inline int run_map(const std::string& input, const CommonOpts& opt) {
    if (opt.out.empty())
        throw std::invalid_argument("map requires --out <dir>");
    const std::string bytes = trendbreak::detail::read_file(input);
    const std::vector<CellResult> results = results_from_csv(bytes);
    if (results.empty()) throw std::runtime_error("results csv holds no rows");
    write_maps(results, opt.out,
               detail::meta_block("map", opt.config_json(), input, bytes));
    return kExitOk;
}

// ---------------------------------------------------------------- driver

inline void add_common(CLI::App* cmd, CommonOpts& opt, bool with_noise = true) {
    cmd->add_option("--margin", opt.margin, "years excluded at each series end");
    cmd->add_flag("--allow-small-margin", opt.allow_small_margin,
                  "permit margin < 2 (diagnostic mode)");
    cmd->add_option("--seed", opt.seed, "RNG seed");
    cmd->add_option("--workers", opt.workers, "worker threads")
        ->check(CLI::Range(1, 1024));
    cmd->add_option("--out", opt.out, "output directory (default: stdout)");
    if (with_noise) {
        cmd->add_option("--ensemble-size", opt.ensemble_size,
                        "surrogate count for the significance test");
        cmd->add_option("--noise", opt.noise, "noise model")
            ->check(CLI::IsMember({"white", "arfima"}));
        cmd->add_option("--d", opt.d, "ARFIMA memory parameter in (-0.5, 0.5)");
        cmd->add_option("--sigma", opt.sigma, "noise standard deviation");
    }
}

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"trendbreak: change-point analysis of annual temperature trends"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    CommonOpts opt;
    std::string input;
    bool no_significance = false;
    bool significance = false;
    int members = 1000;
    SynthOpts so;

    auto* fit = app.add_subcommand("fit", "full single-series report (JSON)");
    fit->add_option("input", input, "series csv (year,value)")->required();
    add_common(fit, opt);
    fit->add_flag("--no-significance", no_significance,
                  "skip the Monte Carlo significance test");

    auto* scan = app.add_subcommand("scan", "rmse-vs-change-year curve (CSV)");
    scan->add_option("input", input, "series csv (year,value)")->required();
    add_common(scan, opt, false);

    auto* synth = app.add_subcommand("synth", "generate one synthetic series");
    add_common(synth, opt);
    add_synth(synth, so);

    auto* ens = app.add_subcommand("ensemble", "synthetic detection/selection ensemble");
    add_common(ens, opt);
    ens->add_option("--members", members, "ensemble size")->check(CLI::Range(1, 1000000));
    add_synth(ens, so);

    auto* mc = app.add_subcommand("mc-test", "Monte Carlo no-change significance test");
    mc->add_option("input", input, "series csv (year,value)")->required();
    add_common(mc, opt);

    auto* gm = app.add_subcommand("global-mean", "area-weighted land mean of a grid");
    gm->add_option("input", input, "grid file (csv or binary)")->required();
    add_common(gm, opt, false);

    auto* batch = app.add_subcommand("batch", "per-cell analysis of a grid");
    batch->add_option("input", input, "grid file (csv or binary)")->required();
    add_common(batch, opt);
    batch->add_flag("--significance", significance,
                    "run the Monte Carlo test on every cell");
    batch->add_option("--format", opt.format, "csv, json, or ppm (adds heatmaps)")
        ->check(CLI::IsMember({"csv", "json", "ppm"}));

    auto* map = app.add_subcommand("map", "render heatmaps from a results csv");
    map->add_option("input", input, "results.csv from batch")->required();
    add_common(map, opt, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (fit->parsed()) return run_fit(input, opt, !no_significance);
        if (scan->parsed()) return run_scan(input, opt);
        if (synth->parsed()) return run_synth(so, opt);
        if (ens->parsed()) return run_ensemble(so, opt, members);
        if (mc->parsed()) return run_mc_test(input, opt);
        if (gm->parsed()) return run_global_mean(input, opt);
        if (batch->parsed()) return run_batch(input, opt, significance);
        if (map->parsed()) return run_map(input, opt);
    } catch (const std::logic_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace trendbreak::cli
