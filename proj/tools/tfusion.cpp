// tfusion: scene synthesis, measurement simulation, reconstruction and
// analysis for SPAD + CCD sensor fusion.
//
// Exit codes: 0 success, 2 user/config error, 3 I/O error, 4 numerical
// failure.

#include "tfusion/tfusion.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace tfusion;

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct ManifestWriter {
    std::vector<std::pair<std::string, std::string>> entries;

    void add(const std::string& key, const std::string& value) {
        entries.emplace_back(key, value);
    }
    void add(const std::string& key, double value) {
        std::ostringstream ss;
        ss.precision(17);
        ss << value;
        add(key, ss.str());
    }
    void add(const std::string& key, std::uint64_t value) {
        add(key, std::to_string(value));
    }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + path);
        for (const auto& [k, v] : entries)
            out << k << " = " << v << '\n';
        if (!out)
            throw std::runtime_error("write failure");
    }
};

Boundary parse_boundary(const std::string& s) {
    if (s == "zero_pad")
        return Boundary::ZeroPad;
    if (s == "replicate")
        return Boundary::Replicate;
    throw std::invalid_argument("boundary must be zero_pad or replicate");
}

// Geometry + noise config keys (defaults in parentheses):
//   upsample, blur_sigma (0), active_width (derived from upsample),
//   boundary (zero_pad), model_dead_pixels (false),
//   photon_scale (0 = noiseless), ambient_rate (0),
//   dead_pixel_fraction (0), seed (0)
FusionGeometry geometry_from_config(const Config& cfg, std::uint32_t low_rows,
                                    std::uint32_t low_cols) {
    auto r = static_cast<std::uint32_t>(cfg.get_int("upsample"));
    auto a = static_cast<std::uint32_t>(cfg.get_int("active_width", 0));
    return FusionGeometry::make(low_rows, low_cols, r,
                                cfg.get_double("blur_sigma", 0.0), a,
                                parse_boundary(
                                    cfg.get_string("boundary", "zero_pad")));
}

NoiseSpec noise_from_config(const Config& cfg,
                            std::optional<std::uint64_t> seed_flag) {
    NoiseSpec n;
    n.photon_scale = cfg.get_double("photon_scale", 0.0);
    n.ambient_rate = cfg.get_double("ambient_rate", 0.0);
    n.dead_pixel_fraction = cfg.get_double("dead_pixel_fraction", 0.0);
    n.seed = seed_flag ? *seed_flag : cfg.get_uint("seed", 0);
    n.validate();
    return n;
}

SolverConfig solver_from_config(const Config& cfg, const std::string& preset) {
    SolverConfig sc;
    if (preset == "lidar")
        sc = SolverConfig::lidar_preset();
    else if (preset == "flim")
        sc = SolverConfig::flim_preset();
    else if (!preset.empty())
        throw std::invalid_argument("preset must be lidar or flim");
    sc.alpha = cfg.get_double("alpha", sc.alpha);
    sc.beta = cfg.get_double("beta", sc.beta);
    sc.gamma = cfg.get_double("gamma", sc.gamma);
    sc.delta = cfg.get_double("delta", sc.delta);
    std::string mode = cfg.get_string("norm_mode", "unsquared");
    if (mode == "unsquared")
        sc.norm_mode = NormMode::Unsquared;
    else if (mode == "squared")
        sc.norm_mode = NormMode::Squared;
    else
        throw std::invalid_argument("norm_mode must be unsquared or squared");
    sc.max_iters = static_cast<std::uint32_t>(cfg.get_int("max_iters", 2000));
    sc.tol = cfg.get_double("tol", 1e-5);
    sc.step_ratio = cfg.get_double("step_ratio", 1.0);
    sc.record_trace = cfg.get_bool("record_trace", false);
    sc.validate();
    return sc;
}

void add_solver_to_manifest(ManifestWriter& mf, const SolverConfig& sc) {
    mf.add("solver.alpha", sc.alpha);
    mf.add("solver.beta", sc.beta);
    mf.add("solver.gamma", sc.gamma);
    mf.add("solver.delta", sc.delta);
    mf.add("solver.norm_mode", sc.norm_mode == NormMode::Squared
                                   ? std::string("squared")
                                   : std::string("unsquared"));
    mf.add("solver.max_iters", std::uint64_t(sc.max_iters));
    mf.add("solver.tol", sc.tol);
    mf.add("solver.step_ratio", sc.step_ratio);
    mf.add("solver.record_trace",
           std::string(sc.record_trace ? "true" : "false"));
}

void add_geometry_to_manifest(ManifestWriter& mf, const FusionGeometry& g) {
    mf.add("geometry.upsample", std::uint64_t(g.upsample));
    mf.add("geometry.low_rows", std::uint64_t(g.low_rows));
    mf.add("geometry.low_cols", std::uint64_t(g.low_cols));
    mf.add("geometry.blur_sigma", g.blur_sigma);
    mf.add("geometry.active_width", std::uint64_t(g.active_width));
    mf.add("geometry.boundary", std::string(g.boundary == Boundary::Replicate
                                                ? "replicate"
                                                : "zero_pad"));
}

ManifestWriter base_manifest(const std::string& command) {
    ManifestWriter mf;
    mf.add("command", command);
    mf.add("version", std::string(kVersion));
    return mf;
}

void finish_manifest(ManifestWriter& mf, const std::string& out_path,
                     std::chrono::steady_clock::time_point start) {
    mf.add("wall_time_s",
           std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start)
               .count());
    mf.write(out_path + ".manifest");
}

int run_render(const std::string& config_path, const std::string& out_path,
               unsigned threads) {
    (void)threads;
    auto start = std::chrono::steady_clock::now();
    auto cfg = Config::parse_file(config_path);
    SceneSpec spec;
    try {
        spec = SceneSpec::from_config(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        // surface invariant violations as config errors
        throw ConfigError(0, e.what());
    }
    auto cube = render_scene(spec);
    write_cube(cube, out_path);

    auto mf = base_manifest("render");
    mf.add("config", config_path);
    mf.add("out", out_path);
    for (const auto& e : cfg.entries())
        mf.add("scene." + e.key, e.value);
    finish_manifest(mf, out_path, start);
    return kExitOk;
}

int run_simulate(const std::string& truth_path, const std::string& config_path,
                 const std::string& out_d, const std::string& out_c,
                 std::optional<std::uint64_t> seed, unsigned threads) {
    auto start = std::chrono::steady_clock::now();
    auto truth = read_cube(truth_path);
    auto cfg = Config::parse_file(config_path);
    auto r = static_cast<std::uint32_t>(cfg.get_int("upsample"));
    if (r < 1 || truth.rows % r != 0 || truth.cols % r != 0)
        throw std::invalid_argument(
            "truth dimensions are not divisible by upsample");
    auto geometry = geometry_from_config(cfg, truth.rows / r, truth.cols / r);
    auto noise = noise_from_config(cfg, seed);

    auto [d, c] = simulate_pair(truth, geometry, noise, threads);
    write_cube(d.as_cube(), out_d);
    write_dead_pixels(d.dead_pixels, out_d + ".dead.csv");
    write_cube(TransientCube(c.rows, c.cols, 1, truth.bin_width_ps, c.values),
               out_c);

    auto mf = base_manifest("simulate");
    mf.add("truth", truth_path);
    mf.add("config", config_path);
    mf.add("out_d", out_d);
    mf.add("out_c", out_c);
    add_geometry_to_manifest(mf, geometry);
    mf.add("noise.photon_scale", noise.photon_scale);
    mf.add("noise.ambient_rate", noise.ambient_rate);
    mf.add("noise.dead_pixel_fraction", noise.dead_pixel_fraction);
    mf.add("noise.seed", std::uint64_t(noise.seed));
    mf.add("threads", std::uint64_t(threads));
    finish_manifest(mf, out_d, start);
    return kExitOk;
}

int run_reconstruct(const std::string& d_path, const std::string& c_path,
                    const std::string& config_path,
                    const std::string& solver_path, const std::string& preset,
                    const std::string& out_path, unsigned threads) {
    auto start = std::chrono::steady_clock::now();
    auto d_cube = read_cube(d_path);
    auto c_cube = read_cube(c_path);
    if (c_cube.bins != 1)
        throw std::invalid_argument("CCD image must have a single bin");
    auto cfg = Config::parse_file(config_path);
    auto geometry = geometry_from_config(cfg, d_cube.rows, d_cube.cols);
    if (c_cube.rows != geometry.high_rows || c_cube.cols != geometry.high_cols)
        throw std::invalid_argument("CCD image does not match geometry");

    std::set<PixelCoord> dead;
    std::string sidecar = d_path + ".dead.csv";
    if (std::filesystem::exists(sidecar))
        dead = read_dead_pixels(sidecar);
    if (cfg.get_bool("model_dead_pixels", false))
        geometry.dead_pixels = dead;

    SpadMeasurement d(d_cube.rows, d_cube.cols, d_cube.bins,
                      d_cube.bin_width_ps, d_cube.values, dead);
    IntensityImage c(c_cube.rows, c_cube.cols, c_cube.values);
    c = normalize_ccd(c, d);

    Config solver_cfg =
        solver_path.empty() ? Config() : Config::parse_file(solver_path);
    auto sc = solver_from_config(solver_cfg, preset);

    auto [recon, report] = reconstruct(d, c, geometry, sc, threads);
    write_cube(recon, out_path);

    {
        std::ofstream rep(out_path + ".report.csv");
        if (!rep)
            throw std::runtime_error("cannot open for writing: " + out_path +
                                     ".report.csv");
        rep.precision(17);
        rep << "iterations," << report.iterations << '\n'
            << "converged," << (report.converged ? "true" : "false") << '\n'
            << "objective," << report.objective.total << '\n'
            << "term_data," << report.objective.data << '\n'
            << "term_ccd," << report.objective.ccd << '\n'
            << "term_hist," << report.objective.hist << '\n'
            << "term_l1," << report.objective.l1 << '\n'
            << "term_tv," << report.objective.tv << '\n'
            << "relative_change," << report.relative_change << '\n'
            << "wall_time_s," << report.wall_time_s << '\n';
        for (const auto& [it, obj] : report.trace)
            rep << "trace_" << it << ',' << obj << '\n';
    }
    if (!report.converged)
        std::cerr << "warning: not converged after " << report.iterations
                  << " iterations (relative change "
                  << report.relative_change << ")\n";

    auto mf = base_manifest("reconstruct");
    mf.add("d", d_path);
    mf.add("c", c_path);
    mf.add("config", config_path);
    if (!solver_path.empty())
        mf.add("solver_config", solver_path);
    if (!preset.empty())
        mf.add("preset", preset);
    mf.add("out", out_path);
    add_geometry_to_manifest(mf, geometry);
    add_solver_to_manifest(mf, sc);
    mf.add("threads", std::uint64_t(threads));
    finish_manifest(mf, out_path, start);
    return kExitOk;
}

int run_analyze(const std::string& in_path, const std::string& mode,
                const std::string& out_path, const std::string& pgm_path,
                double snr_threshold, double min_counts) {
    auto start = std::chrono::steady_clock::now();
    auto cube = read_cube(in_path);

    ScalarMap map;
    if (mode == "depth") {
        map = depth_map(cube, snr_threshold);
    } else if (mode == "flim") {
        LifetimeFitConfig fc;
        fc.min_counts = min_counts;
        map = fit_lifetimes(cube, fc).lifetimes;
    } else {
        throw std::invalid_argument("mode must be depth or flim");
    }
    export_map(map, out_path, MapFormat::Csv);
    if (!pgm_path.empty())
        export_map(map, pgm_path, MapFormat::Pgm16);

    std::cout.precision(12);
    if (mode == "flim") {
        auto h = lifetime_histogram(map, 32);
        std::cout << "mean_ns," << h.mean << '\n'
                  << "std_ns," << h.stddev << '\n'
                  << "pixels," << h.samples << '\n';
    } else {
        std::size_t n = 0;
        for (double v : map.values)
            if (!ScalarMap::is_sentinel(v))
                ++n;
        std::cout << "pixels," << n << '\n';
    }

    auto mf = base_manifest("analyze");
    mf.add("in", in_path);
    mf.add("mode", mode);
    mf.add("out", out_path);
    if (!pgm_path.empty())
        mf.add("pgm", pgm_path);
    mf.add("snr_threshold", snr_threshold);
    mf.add("min_counts", min_counts);
    finish_manifest(mf, out_path, start);
    return kExitOk;
}

int run_eval(const std::string& recon_path, const std::string& truth_path,
             const std::string& out_path, double snr_threshold) {
    auto start = std::chrono::steady_clock::now();
    auto recon = read_cube(recon_path);
    auto truth = read_cube(truth_path);
    auto m = metrics(recon, truth, snr_threshold);

    std::ostringstream csv;
    csv.precision(12);
    csv << "psnr_db," << m.psnr_db << '\n'
        << "rmse," << m.rmse << '\n'
        << "depth_rmse_bins," << m.depth_rmse_bins << '\n';
    std::cout << csv.str();
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + out_path);
        out << csv.str();
        auto mf = base_manifest("eval");
        mf.add("recon", recon_path);
        mf.add("truth", truth_path);
        mf.add("out", out_path);
        mf.add("snr_threshold", snr_threshold);
        finish_manifest(mf, out_path, start);
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPAD + CCD sensor-fusion reconstruction toolkit"};
    app.require_subcommand(1);

    unsigned threads = 1;
    app.add_option("--threads", threads, "worker thread cap")
        ->check(CLI::PositiveNumber);

    std::string config_path, out_path;

    auto* render = app.add_subcommand("render", "render a ground-truth cube");
    render->add_option("--config", config_path, "scene config")->required();
    render->add_option("--out", out_path, "output TRCB cube")->required();

    std::string truth_path, out_d, out_c;
    std::optional<std::uint64_t> seed;
    auto* simulate =
        app.add_subcommand("simulate", "simulate a SPAD + CCD pair");
    simulate->add_option("--truth", truth_path, "ground-truth TRCB cube")
        ->required();
    simulate->add_option("--config", config_path, "geometry + noise config")
        ->required();
    simulate->add_option("--out-d", out_d, "output SPAD TRCB cube")->required();
    simulate->add_option("--out-c", out_c, "output CCD TRCB image")->required();
    simulate->add_option("--seed", seed, "override config seed");

    std::string d_path, c_path, solver_path, preset;
    auto* rec = app.add_subcommand("reconstruct",
                                   "reconstruct the high-res cube");
    rec->add_option("--d", d_path, "SPAD measurement TRCB")->required();
    rec->add_option("--c", c_path, "CCD image TRCB")->required();
    rec->add_option("--config", config_path, "geometry config")->required();
    rec->add_option("--solver-config", solver_path, "solver config");
    rec->add_option("--preset", preset, "weight preset: lidar or flim");
    rec->add_option("--out", out_path, "output TRCB cube")->required();

    std::string in_path, mode, pgm_path;
    double snr_threshold = 5.0, min_counts = 1.0;
    auto* analyze = app.add_subcommand("analyze", "extract depth or lifetimes");
    analyze->add_option("--in", in_path, "input TRCB cube")->required();
    analyze->add_option("--mode", mode, "depth or flim")->required();
    analyze->add_option("--out", out_path, "output CSV map")->required();
    analyze->add_option("--pgm", pgm_path, "optional 16-bit PGM export");
    analyze->add_option("--snr-threshold", snr_threshold,
                        "peak-count threshold for depth");
    analyze->add_option("--min-counts", min_counts,
                        "total-count threshold for lifetime fits");

    std::string recon_path;
    auto* eval = app.add_subcommand("eval", "compare reconstruction to truth");
    eval->add_option("--recon", recon_path, "reconstructed TRCB")->required();
    eval->add_option("--truth", truth_path, "ground-truth TRCB")->required();
    eval->add_option("--out", out_path, "optional metrics CSV path");
    eval->add_option("--snr-threshold", snr_threshold,
                     "peak-count threshold for depth maps");

    CLI11_PARSE(app, argc, argv);

    try {
        if (render->parsed())
            return run_render(config_path, out_path, threads);
        if (simulate->parsed())
            return run_simulate(truth_path, config_path, out_d, out_c, seed,
                                threads);
        if (rec->parsed())
            return run_reconstruct(d_path, c_path, config_path, solver_path,
                                   preset, out_path, threads);
        if (analyze->parsed())
            return run_analyze(in_path, mode, out_path, pgm_path,
                               snr_threshold, min_counts);
        if (eval->parsed())
            return run_eval(recon_path, truth_path, out_path, snr_threshold);
    } catch (const tfusion::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitUser;
    } catch (const tfusion::SolverDivergence& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUser;
    } catch (const std::runtime_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitIo;
    }
    return kExitOk;
}
