#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tfusion {

// All cubes use bin-major frames: values[bin * rows * cols + row * cols + col].
// A single time bin is therefore contiguous in memory.

using PixelCoord = std::pair<std::uint32_t, std::uint32_t>; // (row, col)

inline std::size_t frame_index(std::uint32_t row, std::uint32_t col,
                               std::uint32_t cols) {
    return static_cast<std::size_t>(row) * cols + col;
}

inline std::size_t cube_index(std::uint32_t row, std::uint32_t col,
                              std::uint32_t bin, std::uint32_t rows,
                              std::uint32_t cols) {
    return (static_cast<std::size_t>(bin) * rows + row) * cols + col;
}

namespace detail {

inline void check_dims(std::uint32_t rows, std::uint32_t cols,
                       std::uint32_t bins) {
    if (rows < 1 || cols < 1 || bins < 1)
        throw std::invalid_argument("dimensions must be >= 1");
}

inline void check_nonnegative(const std::vector<float>& values,
                              const char* what) {
    for (float v : values) {
        if (!(v >= 0.0f))
            throw std::invalid_argument(std::string(what) +
                                        ": values must be nonnegative and finite");
    }
}

} // namespace detail

// Photon-count datacube i(x, y, t). Immutable after construction.
struct TransientCube {
    std::uint32_t rows = 0; // M
    std::uint32_t cols = 0; // N
    std::uint32_t bins = 0; // tau
    double bin_width_ps = 0.0;
    std::vector<float> values; // bin-major frames

    TransientCube() = default;

    TransientCube(std::uint32_t rows_, std::uint32_t cols_, std::uint32_t bins_,
                  double bin_width_ps_, std::vector<float> values_)
        : rows(rows_), cols(cols_), bins(bins_), bin_width_ps(bin_width_ps_),
          values(std::move(values_)) {
        detail::check_dims(rows, cols, bins);
        if (!(bin_width_ps > 0.0))
            throw std::invalid_argument("bin_width_ps must be > 0");
        if (values.size() != static_cast<std::size_t>(rows) * cols * bins)
            throw std::invalid_argument("cube value count does not match dimensions");
        detail::check_nonnegative(values, "TransientCube");
    }

    static TransientCube zeros(std::uint32_t rows, std::uint32_t cols,
                               std::uint32_t bins, double bin_width_ps) {
        return TransientCube(rows, cols, bins, bin_width_ps,
                             std::vector<float>(static_cast<std::size_t>(rows) *
                                                    cols * bins,
                                                0.0f));
    }

    float at(std::uint32_t row, std::uint32_t col, std::uint32_t bin) const {
        return values[cube_index(row, col, bin, rows, cols)];
    }

    bool operator==(const TransientCube& other) const = default;
};

// Low-resolution time-resolved measurement d, with the dead pixels that were
// zeroed during acquisition.
struct SpadMeasurement {
    std::uint32_t rows = 0; // m
    std::uint32_t cols = 0; // n
    std::uint32_t bins = 0; // tau
    double bin_width_ps = 0.0;
    std::vector<float> values;
    std::set<PixelCoord> dead_pixels;

    SpadMeasurement() = default;

    SpadMeasurement(std::uint32_t rows_, std::uint32_t cols_,
                    std::uint32_t bins_, double bin_width_ps_,
                    std::vector<float> values_,
                    std::set<PixelCoord> dead_pixels_ = {})
        : rows(rows_), cols(cols_), bins(bins_), bin_width_ps(bin_width_ps_),
          values(std::move(values_)), dead_pixels(std::move(dead_pixels_)) {
        detail::check_dims(rows, cols, bins);
        if (!(bin_width_ps > 0.0))
            throw std::invalid_argument("bin_width_ps must be > 0");
        if (values.size() != static_cast<std::size_t>(rows) * cols * bins)
            throw std::invalid_argument("measurement value count does not match dimensions");
        detail::check_nonnegative(values, "SpadMeasurement");
        for (const auto& [r, c] : dead_pixels) {
            if (r >= rows || c >= cols)
                throw std::invalid_argument("dead pixel outside measurement grid");
            for (std::uint32_t b = 0; b < bins; ++b) {
                if (values[cube_index(r, c, b, rows, cols)] != 0.0f)
                    throw std::invalid_argument("dead pixel has nonzero counts");
            }
        }
    }

    float at(std::uint32_t row, std::uint32_t col, std::uint32_t bin) const {
        return values[cube_index(row, col, bin, rows, cols)];
    }

    TransientCube as_cube() const {
        return TransientCube(rows, cols, bins, bin_width_ps, values);
    }

    bool operator==(const SpadMeasurement& other) const = default;
};

// Time-integrated high-resolution image c.
struct IntensityImage {
    std::uint32_t rows = 0; // M
    std::uint32_t cols = 0; // N
    std::vector<float> values; // row-major

    IntensityImage() = default;

    IntensityImage(std::uint32_t rows_, std::uint32_t cols_,
                   std::vector<float> values_)
        : rows(rows_), cols(cols_), values(std::move(values_)) {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("dimensions must be >= 1");
        if (values.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("image value count does not match dimensions");
        detail::check_nonnegative(values, "IntensityImage");
    }

    float at(std::uint32_t row, std::uint32_t col) const {
        return values[frame_index(row, col, cols)];
    }

    bool operator==(const IntensityImage& other) const = default;
};

enum class MapUnit { TimeBin, Picoseconds, Nanoseconds, Dimensionless };

inline const char* to_string(MapUnit u) {
    switch (u) {
    case MapUnit::TimeBin: return "time-bin";
    case MapUnit::Picoseconds: return "ps";
    case MapUnit::Nanoseconds: return "ns";
    case MapUnit::Dimensionless: return "dimensionless";
    }
    return "?";
}

// Per-pixel scalar result (depth map, lifetime map). Quiet NaN marks "no data".
struct ScalarMap {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    MapUnit unit = MapUnit::Dimensionless;
    std::vector<double> values; // row-major, NaN = sentinel

    static constexpr double sentinel() {
        return std::numeric_limits<double>::quiet_NaN();
    }

    static bool is_sentinel(double v) { return std::isnan(v); }

    ScalarMap() = default;

    ScalarMap(std::uint32_t rows_, std::uint32_t cols_, MapUnit unit_,
              std::vector<double> values_)
        : rows(rows_), cols(cols_), unit(unit_), values(std::move(values_)) {
        if (rows < 1 || cols < 1)
            throw std::invalid_argument("dimensions must be >= 1");
        if (values.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("map value count does not match dimensions");
        for (double v : values) {
            if (!std::isnan(v) && !std::isfinite(v))
                throw std::invalid_argument("non-sentinel map values must be finite");
        }
    }

    static ScalarMap filled(std::uint32_t rows, std::uint32_t cols, MapUnit unit,
                            double value) {
        return ScalarMap(rows, cols, unit,
                         std::vector<double>(
                             static_cast<std::size_t>(rows) * cols, value));
    }

    double at(std::uint32_t row, std::uint32_t col) const {
        return values[frame_index(row, col, cols)];
    }
};

} // namespace tfusion
