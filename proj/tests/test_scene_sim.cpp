#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfusion/operators.hpp"
#include "tfusion/scene.hpp"
#include "tfusion/simulate.hpp"

#include <cmath>

using namespace tfusion;

TEST_CASE("lidar rectangle renders a unit impulse at its bin") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 8;
    spec.bins = 16;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({2, 2, 6, 6, 10.0, 10.0, 1.0});
    auto cube = render_scene(spec);
    for (std::uint32_t r = 0; r < 8; ++r)
        for (std::uint32_t c = 0; c < 8; ++c)
            for (std::uint32_t b = 0; b < 16; ++b) {
                bool inside = r >= 2 && r < 6 && c >= 2 && c < 6 && b == 10;
                CHECK(cube.at(r, c, b) == (inside ? 1.0f : 0.0f));
            }
}

TEST_CASE("fractional depth splits the impulse across adjacent bins") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 1;
    spec.bins = 8;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 1, 1, 3.25, 3.25, 2.0});
    auto cube = render_scene(spec);
    CHECK(cube.at(0, 0, 3) == doctest::Approx(1.5));
    CHECK(cube.at(0, 0, 4) == doctest::Approx(0.5));
}

TEST_CASE("overlapping primitives: the front surface wins") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 4;
    spec.bins = 16;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 4, 4, 12.0, 12.0, 1.0}); // back wall
    spec.primitives.push_back({1, 1, 3, 3, 5.0, 5.0, 3.0});   // front object
    auto cube = render_scene(spec);
    CHECK(cube.at(2, 2, 5) == 3.0f);
    CHECK(cube.at(2, 2, 12) == 0.0f);
    CHECK(cube.at(0, 0, 12) == 1.0f);
}

TEST_CASE("slanted plane: per-row argmax increases monotonically 5 -> 20") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = 96;
    spec.cols = 8;
    spec.bins = 32;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 96, 8, 5.0, 20.0, 1.0});
    auto cube = render_scene(spec);
    double prev = -1.0;
    for (std::uint32_t r = 0; r < 96; ++r) {
        float peak = -1.0f;
        std::uint32_t arg = 0;
        for (std::uint32_t b = 0; b < 32; ++b)
            if (cube.at(r, 0, b) > peak) {
                peak = cube.at(r, 0, b);
                arg = b;
            }
        double geo = 5.0 + 15.0 * r / 95.0; // renderer's own geometry
        CHECK(std::abs(arg - geo) <= 0.5 + 1e-9);
        CHECK(arg >= prev - 1e-9);
        prev = arg;
    }
}

TEST_CASE("flim trace decays by exp(-binwidth/lifetime) between bins") {
    SceneSpec spec;
    spec.kind = SceneKind::Flim;
    spec.rows = spec.cols = 2;
    spec.bins = 20;
    spec.bin_width_ps = 160.0;
    spec.regions.push_back({0, 0, 2, 2, 2.0, 100.0, 0});
    auto cube = render_scene(spec);
    double expect = std::exp(-0.160 / 2.0);
    for (std::uint32_t b = 0; b + 1 < 20; ++b)
        CHECK(cube.at(0, 0, b + 1) / cube.at(0, 0, b) ==
              doctest::Approx(expect).epsilon(1e-6));
    CHECK(cube.at(0, 0, 0) == 100.0f);
}

TEST_CASE("flim arrival bin delays the trace") {
    SceneSpec spec;
    spec.kind = SceneKind::Flim;
    spec.rows = spec.cols = 1;
    spec.bins = 10;
    spec.bin_width_ps = 160.0;
    spec.regions.push_back({0, 0, 1, 1, 3.0, 50.0, 4});
    auto cube = render_scene(spec);
    for (std::uint32_t b = 0; b < 4; ++b)
        CHECK(cube.at(0, 0, b) == 0.0f);
    CHECK(cube.at(0, 0, 4) == 50.0f);
}

TEST_CASE("flim log-linear property: regression recovers the lifetime") {
    SceneSpec spec;
    spec.kind = SceneKind::Flim;
    spec.rows = spec.cols = 4;
    spec.bins = 40;
    spec.bin_width_ps = 160.0;
    spec.regions.push_back({0, 0, 4, 4, 2.7, 10.0, 0});
    auto cube = render_scene(spec);
    // plain least squares of log counts against bin time
    double st = 0, sy = 0, stt = 0, sty = 0;
    int n = 0;
    for (std::uint32_t b = 0; b < 40; ++b) {
        double t = b * 0.160;
        double y = std::log(double(cube.at(1, 1, b)));
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
        ++n;
    }
    double slope = (n * sty - st * sy) / (n * stt - st * st);
    // binary32 storage quantizes the trace at ~1e-7 relative, which bounds
    // how exactly the regression can recover the lifetime
    CHECK(-1.0 / slope == doctest::Approx(2.7).epsilon(1e-6));
}

TEST_CASE("scene validation rejects out-of-range parameters") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 4;
    spec.bins = 8;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 4, 4, 9.0, 9.0, 1.0}); // depth >= bins
    CHECK_THROWS(spec.validate());

    SceneSpec flim;
    flim.kind = SceneKind::Flim;
    flim.rows = flim.cols = 4;
    flim.bins = 8;
    flim.bin_width_ps = 160.0;
    flim.regions.push_back({0, 0, 4, 4, 0.5, 1.0, 0}); // lifetime below 1 ns
    CHECK_THROWS(flim.validate());
}

TEST_CASE("scene config parsing") {
    auto cfg = Config::parse_string("kind = lidar\n"
                                    "rows = 8\ncols = 8\nbins = 16\n"
                                    "bin_width_ps = 55\n"
                                    "rect = [0, 0, 8, 8, 3, 3, 1.0]\n"
                                    "rect = [2, 2, 6, 6, 1, 1, 2.0]\n");
    auto spec = SceneSpec::from_config(cfg);
    CHECK(spec.primitives.size() == 2);
    CHECK(spec.primitives[1].reflectivity == 2.0);

    CHECK_THROWS_AS(Config::parse_string("rows 8\n"), ConfigError);
    auto missing = Config::parse_string("kind = lidar\nrows = 8\n");
    CHECK_THROWS_WITH_AS(SceneSpec::from_config(missing),
                         doctest::Contains("cols"), ConfigError);
}

TEST_CASE("noiseless simulate_pair equals the deterministic forward path") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 12;
    spec.bins = 8;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 12, 12, 2.0, 6.0, 1.5});
    auto truth = render_scene(spec);
    auto g = FusionGeometry::make(4, 4, 3, 1.0, 1);

    NoiseSpec noise; // photon_scale 0 -> noiseless
    auto [d, c] = simulate_pair(truth, g, noise);
    auto expect_d = apply_A_tau(truth, g);
    auto expect_c = integrate_time(truth);
    CHECK(d.values == expect_d.values);
    CHECK(c.values == expect_c.values);
}

TEST_CASE("simulation is deterministic for a fixed seed") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 12;
    spec.bins = 8;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 12, 12, 3.0, 3.0, 1.0});
    auto truth = render_scene(spec);
    auto g = FusionGeometry::make(4, 4, 3, 1.0, 1);
    NoiseSpec noise;
    noise.photon_scale = 5e3;
    noise.ambient_rate = 0.05;
    noise.dead_pixel_fraction = 0.1;
    noise.seed = 42;

    auto [d1, c1] = simulate_pair(truth, g, noise);
    auto [d2, c2] = simulate_pair(truth, g, noise);
    CHECK(d1 == d2);
    CHECK(c1 == c2);
    // thread count must not change the sampled values
    auto [d4, c4] = simulate_pair(truth, g, noise, 4);
    CHECK(d1 == d4);

    noise.seed = 43;
    auto [d3, c3] = simulate_pair(truth, g, noise);
    CHECK(d1.values != d3.values);
}

TEST_CASE("ambient-only counts have the configured mean") {
    auto truth = TransientCube::zeros(32, 32, 25, 55.0);
    // photon_scale needs signal; use a single faint pixel and a large ambient
    truth.values[0] = 1.0f;
    auto g = FusionGeometry::make(32, 32, 1, 0.0, 1);
    double total = 0.0;
    std::size_t n = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        NoiseSpec noise;
        noise.photon_scale = 1e-6; // signal negligible next to ambient
        noise.ambient_rate = 0.1;
        noise.seed = seed;
        auto [d, c] = simulate_pair(truth, g, noise);
        for (float v : d.values)
            total += v;
        n += d.values.size();
    }
    double mean = total / double(n);
    // 3 sigma of the Poisson mean estimate at rate 0.1
    double bound = 3.0 * std::sqrt(0.1 / double(n));
    CHECK(std::abs(mean - 0.1) < bound);
}

TEST_CASE("dead pixel sampling zeroes and records about the right fraction") {
    auto truth = TransientCube::zeros(96, 96, 4, 55.0);
    for (float& v : truth.values)
        v = 1.0f;
    auto g = FusionGeometry::make(32, 32, 3, 0.0, 3);
    NoiseSpec noise;
    noise.photon_scale = 1e5;
    noise.dead_pixel_fraction = 0.02;
    noise.seed = 7;
    auto [d, c] = simulate_pair(truth, g, noise);
    // 1024 Bernoulli(0.02) trials; allow 4 sigma around the mean of ~20
    CHECK(d.dead_pixels.size() > 3);
    CHECK(d.dead_pixels.size() < 40);
    for (const auto& [r, cc] : d.dead_pixels)
        for (std::uint32_t b = 0; b < d.bins; ++b)
            CHECK(d.at(r, cc, b) == 0.0f);
}

TEST_CASE("Poisson consistency: sample mean converges to the forward output") {
    SceneSpec spec;
    spec.kind = SceneKind::Lidar;
    spec.rows = spec.cols = 8;
    spec.bins = 4;
    spec.bin_width_ps = 55.0;
    spec.primitives.push_back({0, 0, 8, 8, 1.0, 1.0, 1.0});
    auto truth = render_scene(spec);
    auto g = FusionGeometry::make(4, 4, 2, 0.0, 2);

    double scale = 4e5; // 1e4+ per occupied SPAD pixel
    std::vector<double> mean(4 * 4 * 4, 0.0);
    int runs = 60;
    for (int s = 0; s < runs; ++s) {
        NoiseSpec noise;
        noise.photon_scale = scale;
        noise.seed = 1000 + s;
        auto [d, c] = simulate_pair(truth, g, noise);
        for (std::size_t i = 0; i < mean.size(); ++i)
            mean[i] += d.values[i] / runs;
    }
    NoiseSpec clean;
    auto [d0, c0] = simulate_pair(truth, g, clean);
    double expected_scale = scale / 64.0; // photons per unit of truth
    for (std::size_t i = 0; i < mean.size(); ++i) {
        double expect = d0.values[i] * expected_scale;
        if (expect > 1e3)
            CHECK(std::abs(mean[i] - expect) / expect < 0.05);
    }
}

TEST_CASE("emulate_flim_input applies the forward model and the integral") {
    SceneSpec spec;
    spec.kind = SceneKind::Flim;
    spec.rows = spec.cols = 16;
    spec.bins = 12;
    spec.bin_width_ps = 160.0;
    spec.regions.push_back({0, 0, 16, 16, 2.5, 20.0, 0});
    auto full = render_scene(spec);

    auto g = FusionGeometry::make(4, 4, 4, 1.0, 1);
    auto [d, c] = emulate_flim_input(full, g);
    CHECK(d.rows == 4);
    CHECK(d.cols == 4);
    CHECK(d.bins == 12);
    CHECK(d.values == apply_A_tau(full, g).values);
    CHECK(c.values == integrate_time(full).values);

    // identity configuration reproduces the input
    auto gid = FusionGeometry::make(16, 16, 1, 0.0, 1);
    auto [did, cid] = emulate_flim_input(full, gid);
    CHECK(did.values == full.values);
}
