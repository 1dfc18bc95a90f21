#pragma once

#include "tfusion/geometry.hpp"
#include "tfusion/operators.hpp"
#include "tfusion/types.hpp"

#include <random>

namespace tfusion {

// photon_scale <= 0 switches the simulator to a noiseless passthrough:
// no rescaling, no ambient counts, no Poisson sampling. Dead-pixel sampling
// stays active so the two knobs are independent.
struct NoiseSpec {
    double photon_scale = 0.0;     // expected total signal counts
    double ambient_rate = 0.0;     // expected counts per SPAD pixel per bin
    double dead_pixel_fraction = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(ambient_rate >= 0.0))
            throw std::invalid_argument("ambient_rate must be >= 0");
        if (!(dead_pixel_fraction >= 0.0) || dead_pixel_fraction >= 1.0)
            throw std::invalid_argument("dead_pixel_fraction must lie in [0, 1)");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// One independent, counter-addressed stream per element: deterministic for a
// given (seed, domain tag, index) regardless of evaluation order or threads.
inline std::mt19937_64 element_rng(std::uint64_t seed, std::uint64_t tag,
                                   std::uint64_t index) {
    return std::mt19937_64(splitmix64(splitmix64(seed ^ tag) + index));
}

inline long sample_poisson(double mean, std::mt19937_64& rng) {
    if (mean <= 0.0)
        return 0;
    std::poisson_distribution<long> dist(mean);
    return dist(rng);
}

constexpr std::uint64_t kSpadTag = 0x5350414400000001ULL;
constexpr std::uint64_t kCcdTag = 0x4343440000000002ULL;
constexpr std::uint64_t kDeadTag = 0x4445414400000003ULL;

} // namespace detail

// Synthesizes a noisy (SPAD, CCD) measurement pair from ground truth:
// SPAD arm is Poisson around apply_A_tau of the rescaled truth plus ambient,
// CCD arm is Poisson around the rescaled time integral.
inline std::pair<SpadMeasurement, IntensityImage>
simulate_pair(const TransientCube& truth, const FusionGeometry& geometry,
              const NoiseSpec& noise, unsigned threads = 1) {
    noise.validate();
    if (truth.rows != geometry.high_rows || truth.cols != geometry.high_cols)
        throw std::invalid_argument("truth does not match geometry");

    bool noiseless = noise.photon_scale <= 0.0;
    double scale = 1.0;
    if (!noiseless) {
        double total = 0.0;
        for (float v : truth.values)
            total += v;
        if (total <= 0.0)
            throw std::invalid_argument("photon_scale set but truth is empty");
        scale = noise.photon_scale / total;
    }

    // sampled dead pixels
    std::set<PixelCoord> dead;
    if (noise.dead_pixel_fraction > 0.0) {
        for (std::uint32_t r = 0; r < geometry.low_rows; ++r) {
            for (std::uint32_t c = 0; c < geometry.low_cols; ++c) {
                auto rng = detail::element_rng(
                    noise.seed, detail::kDeadTag,
                    frame_index(r, c, geometry.low_cols));
                std::uniform_real_distribution<double> u(0.0, 1.0);
                if (u(rng) < noise.dead_pixel_fraction)
                    dead.insert({r, c});
            }
        }
    }

    auto expected = apply_A_tau_raw(truth.values, truth.bins, geometry, threads);
    std::vector<float> d_values(expected.size());
    if (noiseless) {
        for (std::size_t i = 0; i < expected.size(); ++i)
            d_values[i] = std::max(expected[i], 0.0f);
    } else {
        for (std::size_t i = 0; i < expected.size(); ++i) {
            double mean = scale * expected[i] + noise.ambient_rate;
            auto rng = detail::element_rng(noise.seed, detail::kSpadTag, i);
            d_values[i] =
                static_cast<float>(detail::sample_poisson(mean, rng));
        }
    }
    std::size_t low_px =
        static_cast<std::size_t>(geometry.low_rows) * geometry.low_cols;
    for (const auto& [r, c] : dead) {
        for (std::uint32_t b = 0; b < truth.bins; ++b)
            d_values[b * low_px + frame_index(r, c, geometry.low_cols)] = 0.0f;
    }
    SpadMeasurement d(geometry.low_rows, geometry.low_cols, truth.bins,
                      truth.bin_width_ps, std::move(d_values), dead);

    auto integrated =
        integrate_time_raw(truth.values, truth.rows, truth.cols, truth.bins);
    std::vector<float> c_values(integrated.size());
    if (noiseless) {
        c_values.assign(integrated.begin(), integrated.end());
    } else {
        for (std::size_t i = 0; i < integrated.size(); ++i) {
            auto rng = detail::element_rng(noise.seed, detail::kCcdTag, i);
            c_values[i] = static_cast<float>(
                detail::sample_poisson(scale * integrated[i], rng));
        }
    }
    IntensityImage c(truth.rows, truth.cols, std::move(c_values));
    return {std::move(d), std::move(c)};
}

// The paper's FLIM construction: the low-res arm is the forward model applied
// to a measured high-res cube, the high-res arm its time integral.
inline std::pair<SpadMeasurement, IntensityImage>
emulate_flim_input(const TransientCube& full, const FusionGeometry& geometry,
                   unsigned threads = 1) {
    if (full.rows != geometry.high_rows || full.cols != geometry.high_cols)
        throw std::invalid_argument("cube does not match geometry");
    return {apply_A_tau(full, geometry, threads), integrate_time(full)};
}

} // namespace tfusion
