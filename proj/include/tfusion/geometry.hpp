#pragma once

#include "tfusion/types.hpp"

#include <cmath>

namespace tfusion {

enum class Boundary { ZeroPad, Replicate };

// Forward-model configuration relating the M x N reconstruction grid to the
// m x n SPAD grid: M = r*m, N = r*n. blur_sigma is in high-res pixel widths;
// active_width is the side of the centred active window per r x r block.
struct FusionGeometry {
    std::uint32_t high_rows = 0; // M
    std::uint32_t high_cols = 0; // N
    std::uint32_t low_rows = 0;  // m
    std::uint32_t low_cols = 0;  // n
    std::uint32_t upsample = 1;  // r
    double blur_sigma = 0.0;
    std::uint32_t active_width = 1; // a, 1 <= a <= r
    Boundary boundary = Boundary::ZeroPad;
    std::set<PixelCoord> dead_pixels; // low-res grid; empty = no modelling

    // Active-window default derived from the 7 um sensor on a 50 um pitch.
    static std::uint32_t default_active_width(std::uint32_t upsample) {
        auto a = static_cast<std::uint32_t>(
            std::lround(upsample * 7.0 / 50.0));
        return std::max<std::uint32_t>(1, a);
    }

    static FusionGeometry make(std::uint32_t low_rows, std::uint32_t low_cols,
                               std::uint32_t upsample, double blur_sigma,
                               std::uint32_t active_width = 0,
                               Boundary boundary = Boundary::ZeroPad) {
        FusionGeometry g;
        g.low_rows = low_rows;
        g.low_cols = low_cols;
        g.upsample = upsample;
        g.high_rows = low_rows * upsample;
        g.high_cols = low_cols * upsample;
        g.blur_sigma = blur_sigma;
        g.active_width =
            active_width ? active_width : default_active_width(upsample);
        g.boundary = boundary;
        g.validate();
        return g;
    }

    void validate() const {
        if (low_rows < 1 || low_cols < 1 || upsample < 1)
            throw std::invalid_argument("grid dimensions must be >= 1");
        if (high_rows != low_rows * upsample || high_cols != low_cols * upsample)
            throw std::invalid_argument("high-res grid must be upsample * low-res grid");
        if (active_width < 1 || active_width > upsample)
            throw std::invalid_argument("active_width must satisfy 1 <= a <= upsample");
        if (!(blur_sigma >= 0.0))
            throw std::invalid_argument("blur_sigma must be >= 0");
        for (const auto& [r, c] : dead_pixels) {
            if (r >= low_rows || c >= low_cols)
                throw std::invalid_argument("dead pixel outside low-res grid");
        }
    }
};

} // namespace tfusion
