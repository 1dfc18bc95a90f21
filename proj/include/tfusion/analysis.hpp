#pragma once

#include "tfusion/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace tfusion {

// Per-pixel argmax depth, earliest bin winning ties. Pixels whose peak count
// falls below snr_threshold carry the sentinel (low SNR, no depth).
inline ScalarMap depth_map_raw(std::span<const float> values,
                               std::uint32_t rows, std::uint32_t cols,
                               std::uint32_t bins, double snr_threshold) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (values.size() != px * bins)
        throw std::invalid_argument("depth_map: dimension mismatch");
    auto map = ScalarMap::filled(rows, cols, MapUnit::TimeBin,
                                 ScalarMap::sentinel());
    for (std::size_t i = 0; i < px; ++i) {
        float peak = -1.0f;
        std::uint32_t arg = 0;
        for (std::uint32_t b = 0; b < bins; ++b) {
            float v = values[b * px + i];
            if (v > peak) {
                peak = v;
                arg = b;
            }
        }
        if (peak >= snr_threshold)
            map.values[i] = arg;
    }
    return map;
}

inline ScalarMap depth_map(const TransientCube& cube,
                           double snr_threshold = 5.0) {
    return depth_map_raw(cube.values, cube.rows, cube.cols, cube.bins,
                         snr_threshold);
}

inline ScalarMap depth_map(const SpadMeasurement& meas,
                           double snr_threshold = 5.0) {
    return depth_map_raw(meas.values, meas.rows, meas.cols, meas.bins,
                         snr_threshold);
}

struct LifetimeFitConfig {
    double min_lifetime_ns = 1.0; // paper prior bounds
    double max_lifetime_ns = 7.0;
    double min_counts = 1.0;  // per-pixel total below which no fit is tried
    std::uint32_t fit_window = 0; // bins after the peak; 0 = all remaining
    std::uint32_t max_fit_iters = 50;
    double fit_tol = 1e-10;

    void validate() const {
        if (!(min_lifetime_ns > 0) || !(min_lifetime_ns < max_lifetime_ns))
            throw std::invalid_argument("need 0 < min_lifetime < max_lifetime");
        if (!(min_counts >= 0))
            throw std::invalid_argument("min_counts must be >= 0");
    }
};

struct LifetimeFitResult {
    ScalarMap lifetimes;             // ns, sentinel where no fit
    std::vector<std::uint8_t> failed; // 1 where the fit went non-finite
};

namespace detail {

// Single-exponential A*exp(-t/lambda) least squares via damped Gauss-Newton,
// seeded by a count-weighted log-linear regression. Returns lambda in the
// time units of `times`, or NaN on failure.
inline double fit_single_exponential(std::span<const double> times,
                                     std::span<const double> counts,
                                     std::uint32_t max_iters, double tol) {
    std::size_t n = times.size();
    // weighted log-linear init: log y = log A - t / lambda
    double sw = 0, swt = 0, swy = 0, swtt = 0, swty = 0;
    std::size_t positive = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (counts[k] <= 0.0)
            continue;
        ++positive;
        double w = counts[k];
        double ly = std::log(counts[k]);
        sw += w;
        swt += w * times[k];
        swy += w * ly;
        swtt += w * times[k] * times[k];
        swty += w * times[k] * ly;
    }
    if (positive < 2)
        return std::numeric_limits<double>::quiet_NaN();
    double det = sw * swtt - swt * swt;
    if (det == 0.0)
        return std::numeric_limits<double>::quiet_NaN();
    double slope = (sw * swty - swt * swy) / det;
    double intercept = (swtt * swy - swt * swty) / det;
    double lambda = slope < 0.0 ? -1.0 / slope : 1e3;
    double amp = std::exp(intercept);
    if (!std::isfinite(lambda) || lambda <= 0.0)
        lambda = 1.0;
    if (!std::isfinite(amp) || amp <= 0.0)
        amp = *std::max_element(counts.begin(), counts.end());

    auto sse = [&](double a, double l) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double r = a * std::exp(-times[k] / l) - counts[k];
            s += r * r;
        }
        return s;
    };

    double cur = sse(amp, lambda);
    double mu = 1e-6; // Levenberg damping
    for (std::uint32_t it = 0; it < max_iters; ++it) {
        // J = [e, a*t/l^2 * e], residual r = a*e - y
        double jaa = 0, jal = 0, jll = 0, ga = 0, gl = 0;
        for (std::size_t k = 0; k < n; ++k) {
            double e = std::exp(-times[k] / lambda);
            double ja = e;
            double jl = amp * e * times[k] / (lambda * lambda);
            double r = amp * e - counts[k];
            jaa += ja * ja;
            jal += ja * jl;
            jll += jl * jl;
            ga += ja * r;
            gl += jl * r;
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 12; ++attempt) {
            double a11 = jaa + mu * jaa, a12 = jal, a22 = jll + mu * jll;
            double det2 = a11 * a22 - a12 * a12;
            if (det2 == 0.0)
                break;
            double da = -(a22 * ga - a12 * gl) / det2;
            double dl = -(a11 * gl - a12 * ga) / det2;
            double na = amp + da, nl = lambda + dl;
            if (na > 0.0 && nl > 0.0 && std::isfinite(na) &&
                std::isfinite(nl)) {
                double trial = sse(na, nl);
                if (trial <= cur) {
                    double rel = std::abs(dl) / std::max(lambda, 1e-30);
                    amp = na;
                    lambda = nl;
                    cur = trial;
                    mu = std::max(mu * 0.3, 1e-12);
                    stepped = true;
                    if (rel < tol)
                        return lambda;
                    break;
                }
            }
            mu *= 10.0;
        }
        if (!stepped)
            break;
    }
    return lambda;
}

} // namespace detail

// Per-pixel single-exponential lifetime fit over the window after the peak
// bin, clamped to the configured bounds. Below-threshold pixels and failed
// fits carry the sentinel; failures additionally set the per-pixel flag.
inline LifetimeFitResult fit_lifetimes(const TransientCube& cube,
                                       const LifetimeFitConfig& cfg = {}) {
    cfg.validate();
    std::size_t px = static_cast<std::size_t>(cube.rows) * cube.cols;
    double bin_ns = cube.bin_width_ps * 1e-3;
    LifetimeFitResult result;
    result.lifetimes = ScalarMap::filled(cube.rows, cube.cols,
                                         MapUnit::Nanoseconds,
                                         ScalarMap::sentinel());
    result.failed.assign(px, 0);

    std::vector<double> times, counts;
    for (std::size_t i = 0; i < px; ++i) {
        double total = 0.0;
        for (std::uint32_t b = 0; b < cube.bins; ++b)
            total += cube.values[b * px + i];
        // Anchor the window at the peak of a 3-bin moving average: picking the
        // raw argmax conditions the first sample on an upward count
        // fluctuation and biases the fitted lifetime low.
        double peak = -1.0;
        std::uint32_t peak_bin = 0;
        for (std::uint32_t b = 0; b < cube.bins; ++b) {
            double acc = cube.values[b * px + i];
            double n = 1.0;
            if (b > 0) {
                acc += cube.values[(b - 1) * px + i];
                n += 1.0;
            }
            if (b + 1 < cube.bins) {
                acc += cube.values[(b + 1) * px + i];
                n += 1.0;
            }
            if (acc / n > peak) {
                peak = acc / n;
                peak_bin = b;
            }
        }
        if (total < cfg.min_counts)
            continue;
        std::uint32_t end = cube.bins;
        if (cfg.fit_window > 0)
            end = std::min(end, peak_bin + cfg.fit_window);
        if (end <= peak_bin + 1)
            continue;
        times.clear();
        counts.clear();
        for (std::uint32_t b = peak_bin; b < end; ++b) {
            times.push_back((b - peak_bin) * bin_ns);
            counts.push_back(cube.values[b * px + i]);
        }
        double lambda = detail::fit_single_exponential(
            times, counts, cfg.max_fit_iters, cfg.fit_tol);
        if (!std::isfinite(lambda)) {
            result.failed[i] = 1;
            continue;
        }
        result.lifetimes.values[i] =
            std::clamp(lambda, cfg.min_lifetime_ns, cfg.max_lifetime_ns);
    }
    return result;
}

struct Histogram {
    std::vector<std::uint64_t> counts;
    double lo = 0.0, hi = 0.0; // value range covered by the equal-width bins
    double mean = 0.0;
    double stddev = 0.0; // population std over non-sentinel pixels
    std::size_t samples = 0;
};

inline Histogram lifetime_histogram(const ScalarMap& map,
                                    std::uint32_t bin_count) {
    if (bin_count < 1)
        throw std::invalid_argument("bin_count must be >= 1");
    Histogram h;
    h.counts.assign(bin_count, 0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    double sum = 0.0;
    for (double v : map.values) {
        if (ScalarMap::is_sentinel(v))
            continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
        ++h.samples;
    }
    if (h.samples == 0)
        throw std::runtime_error("empty map");
    h.lo = lo;
    h.hi = hi;
    h.mean = sum / static_cast<double>(h.samples);
    double var = 0.0;
    for (double v : map.values) {
        if (ScalarMap::is_sentinel(v))
            continue;
        var += (v - h.mean) * (v - h.mean);
        double pos = (hi > lo) ? (v - lo) / (hi - lo) * bin_count : 0.0;
        auto idx = std::min<std::size_t>(static_cast<std::size_t>(pos),
                                         bin_count - 1);
        ++h.counts[idx];
    }
    h.stddev = std::sqrt(var / static_cast<double>(h.samples));
    return h;
}

// Bins `a` by block x block averaging of non-sentinel entries and subtracts
// `b`. Sentinel wherever either side has no data.
inline ScalarMap diff_map(const ScalarMap& a, const ScalarMap& b,
                          std::uint32_t block) {
    if (block < 1 || a.rows != b.rows * block || a.cols != b.cols * block)
        throw std::invalid_argument("diff_map: incompatible shapes");
    auto out = ScalarMap::filled(b.rows, b.cols, a.unit,
                                 ScalarMap::sentinel());
    for (std::uint32_t r = 0; r < b.rows; ++r) {
        for (std::uint32_t c = 0; c < b.cols; ++c) {
            double sum = 0.0;
            std::uint32_t n = 0;
            for (std::uint32_t dr = 0; dr < block; ++dr) {
                for (std::uint32_t dc = 0; dc < block; ++dc) {
                    double v = a.at(r * block + dr, c * block + dc);
                    if (!ScalarMap::is_sentinel(v)) {
                        sum += v;
                        ++n;
                    }
                }
            }
            double bv = b.at(r, c);
            if (n > 0 && !ScalarMap::is_sentinel(bv))
                out.values[frame_index(r, c, b.cols)] = sum / n - bv;
        }
    }
    return out;
}

struct CubeMetrics {
    double psnr_db = 0.0; // peak from the ground-truth cube; 999 when exact
    double rmse = 0.0;
    double depth_rmse_bins = 0.0; // over pixels non-sentinel in both maps
};

inline CubeMetrics metrics(const TransientCube& recon,
                           const TransientCube& truth,
                           double snr_threshold = 5.0) {
    if (recon.rows != truth.rows || recon.cols != truth.cols ||
        recon.bins != truth.bins)
        throw std::invalid_argument("metrics: shape mismatch");
    CubeMetrics m;
    double se = 0.0;
    float peak = 0.0f;
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
        double dv = double(recon.values[i]) - double(truth.values[i]);
        se += dv * dv;
        peak = std::max(peak, truth.values[i]);
    }
    m.rmse = std::sqrt(se / truth.values.size());
    m.psnr_db = (m.rmse > 0.0 && peak > 0.0)
                    ? 20.0 * std::log10(peak / m.rmse)
                    : 999.0;
    auto dm_r = depth_map(recon, snr_threshold);
    auto dm_t = depth_map(truth, snr_threshold);
    double dse = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < dm_r.values.size(); ++i) {
        if (ScalarMap::is_sentinel(dm_r.values[i]) ||
            ScalarMap::is_sentinel(dm_t.values[i]))
            continue;
        double dd = dm_r.values[i] - dm_t.values[i];
        dse += dd * dd;
        ++n;
    }
    m.depth_rmse_bins = n > 0 ? std::sqrt(dse / n) : 0.0;
    return m;
}

} // namespace tfusion
