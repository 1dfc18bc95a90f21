#pragma once

#include "tfusion/geometry.hpp"
#include "tfusion/types.hpp"

#include <cmath>
#include <thread>
#include <vector>

namespace tfusion {

// Raw per-frame operator cores, templated so the solver can run them in
// double while the data types stay float. Frames are row-major vectors.

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    if (sigma == 0.0)
        return {1.0};
    int radius = static_cast<int>(std::ceil(4.0 * sigma));
    std::vector<double> w(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        w[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
        sum += w[k + radius];
    }
    for (double& x : w)
        x /= sum;
    return w;
}

template <class F>
void parallel_for(std::uint32_t count, unsigned threads, F&& body) {
    if (threads <= 1 || count <= 1) {
        for (std::uint32_t i = 0; i < count; ++i)
            body(i);
        return;
    }
    unsigned workers = std::min<unsigned>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::uint32_t i = w; i < count; i += workers)
                body(i);
        });
    }
    for (auto& t : pool)
        t.join();
}

} // namespace detail

// Separable Gaussian blur, kernel truncated at radius ceil(4*sigma) and
// renormalized to unit sum. sigma = 0 is the identity.
template <class T>
std::vector<T> blur_frame(const std::vector<T>& frame, std::uint32_t rows,
                          std::uint32_t cols, double sigma,
                          Boundary boundary) {
    if (frame.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("blur: dimension mismatch");
    if (sigma == 0.0)
        return frame;
    auto w = detail::gaussian_kernel(sigma);
    int radius = static_cast<int>(w.size() / 2);

    std::vector<T> tmp(frame.size(), T(0));
    // horizontal pass
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                long cc = static_cast<long>(c) + k;
                if (boundary == Boundary::Replicate)
                    cc = std::clamp<long>(cc, 0, cols - 1);
                else if (cc < 0 || cc >= static_cast<long>(cols))
                    continue;
                acc += w[k + radius] * frame[frame_index(r, cc, cols)];
            }
            tmp[frame_index(r, c, cols)] = static_cast<T>(acc);
        }
    }
    std::vector<T> out(frame.size(), T(0));
    // vertical pass
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                long rr = static_cast<long>(r) + k;
                if (boundary == Boundary::Replicate)
                    rr = std::clamp<long>(rr, 0, rows - 1);
                else if (rr < 0 || rr >= static_cast<long>(rows))
                    continue;
                acc += w[k + radius] * tmp[frame_index(rr, c, cols)];
            }
            out[frame_index(r, c, cols)] = static_cast<T>(acc);
        }
    }
    return out;
}

// Adjoint of blur_frame: scatter form, exact for both boundary modes.
template <class T>
std::vector<T> blur_frame_adjoint(const std::vector<T>& frame,
                                  std::uint32_t rows, std::uint32_t cols,
                                  double sigma, Boundary boundary) {
    if (frame.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("blur adjoint: dimension mismatch");
    if (sigma == 0.0)
        return frame;
    auto w = detail::gaussian_kernel(sigma);
    int radius = static_cast<int>(w.size() / 2);

    // adjoint of the vertical pass
    std::vector<double> tmp(frame.size(), 0.0);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v = frame[frame_index(r, c, cols)];
            for (int k = -radius; k <= radius; ++k) {
                long rr = static_cast<long>(r) + k;
                if (boundary == Boundary::Replicate)
                    rr = std::clamp<long>(rr, 0, rows - 1);
                else if (rr < 0 || rr >= static_cast<long>(rows))
                    continue;
                tmp[frame_index(rr, c, cols)] += w[k + radius] * v;
            }
        }
    }
    // adjoint of the horizontal pass
    std::vector<T> out(frame.size(), T(0));
    std::vector<double> acc(frame.size(), 0.0);
    for (std::uint32_t r = 0; r < rows; ++r) {
        for (std::uint32_t c = 0; c < cols; ++c) {
            double v = tmp[frame_index(r, c, cols)];
            for (int k = -radius; k <= radius; ++k) {
                long cc = static_cast<long>(c) + k;
                if (boundary == Boundary::Replicate)
                    cc = std::clamp<long>(cc, 0, cols - 1);
                else if (cc < 0 || cc >= static_cast<long>(cols))
                    continue;
                acc[frame_index(r, cc, cols)] += w[k + radius] * v;
            }
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i)
        out[i] = static_cast<T>(acc[i]);
    return out;
}

// Sparse-sampling mask: the centred a x a window of each r x r block passes,
// everything else is zeroed; dead low-res blocks are zeroed entirely.
// Diagonal, hence self-adjoint.
template <class T>
std::vector<T> mask_frame(const std::vector<T>& frame,
                          const FusionGeometry& g) {
    if (frame.size() !=
        static_cast<std::size_t>(g.high_rows) * g.high_cols)
        throw std::invalid_argument("mask: dimension mismatch");
    std::uint32_t r = g.upsample, a = g.active_width;
    std::uint32_t off = (r - a) / 2;
    std::vector<T> out(frame.size(), T(0));
    for (std::uint32_t row = 0; row < g.high_rows; ++row) {
        std::uint32_t br = row / r, ir = row % r;
        if (ir < off || ir >= off + a)
            continue;
        for (std::uint32_t col = 0; col < g.high_cols; ++col) {
            std::uint32_t bc = col / r, ic = col % r;
            if (ic < off || ic >= off + a)
                continue;
            if (g.dead_pixels.count({br, bc}))
                continue;
            out[frame_index(row, col, g.high_cols)] =
                frame[frame_index(row, col, g.high_cols)];
        }
    }
    return out;
}

// Sum pooling over r x r blocks (counts are additive).
template <class T>
std::vector<T> downsample_frame(const std::vector<T>& frame,
                                const FusionGeometry& g) {
    if (frame.size() !=
        static_cast<std::size_t>(g.high_rows) * g.high_cols)
        throw std::invalid_argument("downsample: dimension mismatch");
    std::uint32_t r = g.upsample;
    std::vector<T> out(static_cast<std::size_t>(g.low_rows) * g.low_cols,
                       T(0));
    for (std::uint32_t row = 0; row < g.high_rows; ++row) {
        for (std::uint32_t col = 0; col < g.high_cols; ++col) {
            out[frame_index(row / r, col / r, g.low_cols)] +=
                frame[frame_index(row, col, g.high_cols)];
        }
    }
    return out;
}

// Adjoint of sum pooling: broadcast each low-res value into its block.
template <class T>
std::vector<T> downsample_frame_adjoint(const std::vector<T>& frame,
                                        const FusionGeometry& g) {
    if (frame.size() !=
        static_cast<std::size_t>(g.low_rows) * g.low_cols)
        throw std::invalid_argument("downsample adjoint: dimension mismatch");
    std::uint32_t r = g.upsample;
    std::vector<T> out(static_cast<std::size_t>(g.high_rows) * g.high_cols);
    for (std::uint32_t row = 0; row < g.high_rows; ++row) {
        for (std::uint32_t col = 0; col < g.high_cols; ++col) {
            out[frame_index(row, col, g.high_cols)] =
                frame[frame_index(row / r, col / r, g.low_cols)];
        }
    }
    return out;
}

// A = P * S * B
template <class T>
std::vector<T> apply_A_frame(const std::vector<T>& frame,
                             const FusionGeometry& g) {
    return downsample_frame(
        mask_frame(blur_frame(frame, g.high_rows, g.high_cols, g.blur_sigma,
                              g.boundary),
                   g),
        g);
}

template <class T>
std::vector<T> adjoint_A_frame(const std::vector<T>& frame,
                               const FusionGeometry& g) {
    return blur_frame_adjoint(mask_frame(downsample_frame_adjoint(frame, g), g),
                              g.high_rows, g.high_cols, g.blur_sigma,
                              g.boundary);
}

// Per-bin application of A across a whole cube (bin-major values).
template <class T>
std::vector<T> apply_A_tau_raw(const std::vector<T>& values,
                               std::uint32_t bins, const FusionGeometry& g,
                               unsigned threads = 1) {
    std::size_t hi = static_cast<std::size_t>(g.high_rows) * g.high_cols;
    std::size_t lo = static_cast<std::size_t>(g.low_rows) * g.low_cols;
    if (values.size() != hi * bins)
        throw std::invalid_argument("apply_A_tau: dimension mismatch");
    std::vector<T> out(lo * bins);
    detail::parallel_for(bins, threads, [&](std::uint32_t b) {
        std::vector<T> frame(values.begin() + b * hi,
                             values.begin() + (b + 1) * hi);
        auto low = apply_A_frame(frame, g);
        std::copy(low.begin(), low.end(), out.begin() + b * lo);
    });
    return out;
}

template <class T>
std::vector<T> adjoint_A_tau_raw(const std::vector<T>& values,
                                 std::uint32_t bins, const FusionGeometry& g,
                                 unsigned threads = 1) {
    std::size_t hi = static_cast<std::size_t>(g.high_rows) * g.high_cols;
    std::size_t lo = static_cast<std::size_t>(g.low_rows) * g.low_cols;
    if (values.size() != lo * bins)
        throw std::invalid_argument("adjoint_A_tau: dimension mismatch");
    std::vector<T> out(hi * bins);
    detail::parallel_for(bins, threads, [&](std::uint32_t b) {
        std::vector<T> frame(values.begin() + b * lo,
                             values.begin() + (b + 1) * lo);
        auto high = adjoint_A_frame(frame, g);
        std::copy(high.begin(), high.end(), out.begin() + b * hi);
    });
    return out;
}

inline SpadMeasurement apply_A_tau(const TransientCube& cube,
                                   const FusionGeometry& g,
                                   unsigned threads = 1) {
    if (cube.rows != g.high_rows || cube.cols != g.high_cols)
        throw std::invalid_argument("apply_A_tau: cube does not match geometry");
    auto low = apply_A_tau_raw(cube.values, cube.bins, g, threads);
    for (float& v : low)
        v = std::max(v, 0.0f); // clip tiny negative rounding from the blur
    return SpadMeasurement(g.low_rows, g.low_cols, cube.bins,
                           cube.bin_width_ps, std::move(low), g.dead_pixels);
}

// T: temporal integration over the cube.
template <class T>
std::vector<T> integrate_time_raw(const std::vector<T>& values,
                                  std::uint32_t rows, std::uint32_t cols,
                                  std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (values.size() != px * bins)
        throw std::invalid_argument("integrate_time: dimension mismatch");
    std::vector<T> out(px, T(0));
    for (std::uint32_t b = 0; b < bins; ++b) {
        for (std::size_t i = 0; i < px; ++i)
            out[i] += values[b * px + i];
    }
    return out;
}

// Adjoint of T: broadcast the image across all bins.
template <class T>
std::vector<T> integrate_time_adjoint_raw(const std::vector<T>& image,
                                          std::uint32_t rows,
                                          std::uint32_t cols,
                                          std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (image.size() != px)
        throw std::invalid_argument("integrate_time adjoint: dimension mismatch");
    std::vector<T> out(px * bins);
    for (std::uint32_t b = 0; b < bins; ++b)
        std::copy(image.begin(), image.end(), out.begin() + b * px);
    return out;
}

inline IntensityImage integrate_time(const TransientCube& cube) {
    auto img = integrate_time_raw(cube.values, cube.rows, cube.cols, cube.bins);
    return IntensityImage(cube.rows, cube.cols, std::move(img));
}

// K_h / K_l: per-bin spatial sums.
template <class T>
std::vector<T> integrate_space_raw(const std::vector<T>& values,
                                   std::uint32_t rows, std::uint32_t cols,
                                   std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (values.size() != px * bins)
        throw std::invalid_argument("integrate_space: dimension mismatch");
    std::vector<T> out(bins, T(0));
    for (std::uint32_t b = 0; b < bins; ++b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < px; ++i)
            acc += values[b * px + i];
        out[b] = static_cast<T>(acc);
    }
    return out;
}

// Adjoint of a per-bin spatial sum: broadcast each bin total over its frame.
template <class T>
std::vector<T> integrate_space_adjoint_raw(const std::vector<T>& per_bin,
                                           std::uint32_t rows,
                                           std::uint32_t cols,
                                           std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (per_bin.size() != bins)
        throw std::invalid_argument("integrate_space adjoint: dimension mismatch");
    std::vector<T> out(px * bins);
    for (std::uint32_t b = 0; b < bins; ++b)
        std::fill(out.begin() + b * px, out.begin() + (b + 1) * px, per_bin[b]);
    return out;
}

inline std::vector<double> integrate_space_high(const TransientCube& cube) {
    std::vector<double> v(cube.values.begin(), cube.values.end());
    return integrate_space_raw(v, cube.rows, cube.cols, cube.bins);
}

inline std::vector<double> integrate_space_low(const SpadMeasurement& meas) {
    std::vector<double> v(meas.values.begin(), meas.values.end());
    return integrate_space_raw(v, meas.rows, meas.cols, meas.bins);
}

// Spatial forward differences per frame, Neumann boundary (last difference 0).
template <class T>
struct Gradient2D {
    std::vector<T> drow; // f[r+1,c] - f[r,c]
    std::vector<T> dcol; // f[r,c+1] - f[r,c]
};

template <class T>
Gradient2D<T> gradient_2d_raw(const std::vector<T>& values, std::uint32_t rows,
                              std::uint32_t cols, std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (values.size() != px * bins)
        throw std::invalid_argument("gradient_2d: dimension mismatch");
    Gradient2D<T> g;
    g.drow.assign(values.size(), T(0));
    g.dcol.assign(values.size(), T(0));
    for (std::uint32_t b = 0; b < bins; ++b) {
        const T* f = values.data() + b * px;
        T* dr = g.drow.data() + b * px;
        T* dc = g.dcol.data() + b * px;
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                std::size_t i = frame_index(r, c, cols);
                if (r + 1 < rows)
                    dr[i] = f[i + cols] - f[i];
                if (c + 1 < cols)
                    dc[i] = f[i + 1] - f[i];
            }
        }
    }
    return g;
}

// Adjoint of gradient_2d (negative divergence).
template <class T>
std::vector<T> gradient_2d_adjoint_raw(const Gradient2D<T>& grad,
                                       std::uint32_t rows, std::uint32_t cols,
                                       std::uint32_t bins) {
    std::size_t px = static_cast<std::size_t>(rows) * cols;
    if (grad.drow.size() != px * bins || grad.dcol.size() != px * bins)
        throw std::invalid_argument("gradient adjoint: dimension mismatch");
    std::vector<T> out(px * bins, T(0));
    for (std::uint32_t b = 0; b < bins; ++b) {
        const T* dr = grad.drow.data() + b * px;
        const T* dc = grad.dcol.data() + b * px;
        T* f = out.data() + b * px;
        for (std::uint32_t r = 0; r < rows; ++r) {
            for (std::uint32_t c = 0; c < cols; ++c) {
                std::size_t i = frame_index(r, c, cols);
                if (r + 1 < rows) {
                    f[i] -= dr[i];
                    f[i + cols] += dr[i];
                }
                if (c + 1 < cols) {
                    f[i] -= dc[i];
                    f[i + 1] += dc[i];
                }
            }
        }
    }
    return out;
}

inline Gradient2D<float> gradient_2d(const TransientCube& cube) {
    return gradient_2d_raw(cube.values, cube.rows, cube.cols, cube.bins);
}

} // namespace tfusion
