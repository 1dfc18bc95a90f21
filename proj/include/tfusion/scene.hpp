#pragma once

#include "tfusion/config.hpp"
#include "tfusion/types.hpp"

#include <cmath>
#include <optional>

namespace tfusion {

// Axis-aligned rectangle on the high-res grid, half-open pixel ranges.
// Depth (in fractional time bins) varies linearly along the row span, so a
// slanted plane is a rectangle with depth_start != depth_end.
struct LidarPrimitive {
    std::uint32_t row0, col0, row1, col1;
    double depth_start, depth_end;
    double reflectivity;
};

struct FlimRegion {
    std::uint32_t row0, col0, row1, col1;
    double lifetime_ns; // within the paper's 1..7 ns prior
    double amplitude;
    std::uint32_t arrival_bin;
};

enum class SceneKind { Lidar, Flim };

struct SceneSpec {
    SceneKind kind = SceneKind::Lidar;
    std::uint32_t rows = 0, cols = 0, bins = 0;
    double bin_width_ps = 0.0;
    std::vector<LidarPrimitive> primitives;
    std::vector<FlimRegion> regions;

    void validate() const {
        detail::check_dims(rows, cols, bins);
        if (!(bin_width_ps > 0.0))
            throw std::invalid_argument("bin_width_ps must be > 0");
        if (kind == SceneKind::Lidar) {
            for (const auto& p : primitives) {
                if (p.row0 >= p.row1 || p.col0 >= p.col1 || p.row1 > rows ||
                    p.col1 > cols)
                    throw std::invalid_argument("rect outside scene grid");
                if (!(p.reflectivity >= 0.0))
                    throw std::invalid_argument("reflectivity must be >= 0");
                for (double d : {p.depth_start, p.depth_end})
                    if (!(d >= 0.0) || d >= bins)
                        throw std::invalid_argument("depth bin outside [0, bins)");
            }
        } else {
            for (const auto& rg : regions) {
                if (rg.row0 >= rg.row1 || rg.col0 >= rg.col1 ||
                    rg.row1 > rows || rg.col1 > cols)
                    throw std::invalid_argument("region outside scene grid");
                if (rg.lifetime_ns < 1.0 || rg.lifetime_ns > 7.0)
                    throw std::invalid_argument("lifetime must lie in [1, 7] ns");
                if (!(rg.amplitude >= 0.0))
                    throw std::invalid_argument("amplitude must be >= 0");
                if (rg.arrival_bin >= bins)
                    throw std::invalid_argument("arrival bin outside [0, bins)");
            }
        }
    }

    // Scene config grammar:
    //   kind = lidar | flim
    //   rows = R   cols = C   bins = T   bin_width_ps = W
    //   rect   = [row0, col0, row1, col1, depth0, depth1, reflectivity]
    //   region = [row0, col0, row1, col1, lifetime_ns, amplitude, arrival_bin]
    static SceneSpec from_config(const Config& cfg) {
        SceneSpec spec;
        std::string kind = cfg.get_string("kind");
        if (kind == "lidar")
            spec.kind = SceneKind::Lidar;
        else if (kind == "flim")
            spec.kind = SceneKind::Flim;
        else
            throw std::runtime_error("kind must be `lidar` or `flim`");
        auto dim = [&](const char* key) {
            std::int64_t v = cfg.get_int(key);
            if (v < 1)
                throw std::runtime_error(std::string(key) + " must be >= 1");
            return static_cast<std::uint32_t>(v);
        };
        spec.rows = dim("rows");
        spec.cols = dim("cols");
        spec.bins = dim("bins");
        spec.bin_width_ps = cfg.get_double("bin_width_ps");
        if (spec.kind == SceneKind::Lidar) {
            for (const auto& v : cfg.get_lists("rect")) {
                if (v.size() != 7)
                    throw std::runtime_error("rect needs 7 values");
                spec.primitives.push_back(
                    {static_cast<std::uint32_t>(v[0]),
                     static_cast<std::uint32_t>(v[1]),
                     static_cast<std::uint32_t>(v[2]),
                     static_cast<std::uint32_t>(v[3]), v[4], v[5], v[6]});
            }
        } else {
            for (const auto& v : cfg.get_lists("region")) {
                if (v.size() != 7)
                    throw std::runtime_error("region needs 7 values");
                spec.regions.push_back({static_cast<std::uint32_t>(v[0]),
                                        static_cast<std::uint32_t>(v[1]),
                                        static_cast<std::uint32_t>(v[2]),
                                        static_cast<std::uint32_t>(v[3]), v[4],
                                        v[5],
                                        static_cast<std::uint32_t>(v[6])});
            }
        }
        spec.validate();
        return spec;
    }
};

// Continuous per-pixel depth of a lidar scene, front surface winning.
// Sentinel where no primitive covers the pixel.
inline ScalarMap scene_depth(const SceneSpec& spec) {
    if (spec.kind != SceneKind::Lidar)
        throw std::invalid_argument("scene_depth requires a lidar scene");
    auto map = ScalarMap::filled(spec.rows, spec.cols, MapUnit::TimeBin,
                                 ScalarMap::sentinel());
    for (const auto& p : spec.primitives) {
        for (std::uint32_t r = p.row0; r < p.row1; ++r) {
            double frac = (p.row1 - 1 > p.row0)
                              ? double(r - p.row0) / double(p.row1 - 1 - p.row0)
                              : 0.0;
            double depth = p.depth_start + (p.depth_end - p.depth_start) * frac;
            for (std::uint32_t c = p.col0; c < p.col1; ++c) {
                double& cur = map.values[frame_index(r, c, spec.cols)];
                if (ScalarMap::is_sentinel(cur) || depth < cur)
                    cur = depth;
            }
        }
    }
    return map;
}

// Lidar pixels get a single impulse at their depth bin, split linearly across
// the two adjacent bins for fractional depths. Flim pixels get
// amplitude * exp(-t / lifetime) sampled at bin centres from the arrival bin
// on; later regions override earlier ones where they overlap.
inline TransientCube render_scene(const SceneSpec& spec) {
    spec.validate();
    auto cube = TransientCube::zeros(spec.rows, spec.cols, spec.bins,
                                     spec.bin_width_ps);
    if (spec.kind == SceneKind::Lidar) {
        struct Hit {
            double depth, reflectivity;
        };
        std::vector<std::optional<Hit>> front(
            static_cast<std::size_t>(spec.rows) * spec.cols);
        for (const auto& p : spec.primitives) {
            for (std::uint32_t r = p.row0; r < p.row1; ++r) {
                double frac =
                    (p.row1 - 1 > p.row0)
                        ? double(r - p.row0) / double(p.row1 - 1 - p.row0)
                        : 0.0;
                double depth =
                    p.depth_start + (p.depth_end - p.depth_start) * frac;
                for (std::uint32_t c = p.col0; c < p.col1; ++c) {
                    auto& cur = front[frame_index(r, c, spec.cols)];
                    if (!cur || depth < cur->depth)
                        cur = Hit{depth, p.reflectivity};
                }
            }
        }
        for (std::uint32_t r = 0; r < spec.rows; ++r) {
            for (std::uint32_t c = 0; c < spec.cols; ++c) {
                const auto& hit = front[frame_index(r, c, spec.cols)];
                if (!hit)
                    continue;
                auto lo = static_cast<std::uint32_t>(hit->depth);
                double w = hit->depth - lo;
                cube.values[cube_index(r, c, lo, spec.rows, spec.cols)] +=
                    static_cast<float>(hit->reflectivity * (1.0 - w));
                if (w > 0.0 && lo + 1 < spec.bins)
                    cube.values[cube_index(r, c, lo + 1, spec.rows,
                                           spec.cols)] +=
                        static_cast<float>(hit->reflectivity * w);
            }
        }
    } else {
        double bin_ns = spec.bin_width_ps * 1e-3;
        for (const auto& rg : spec.regions) {
            for (std::uint32_t b = rg.arrival_bin; b < spec.bins; ++b) {
                double t = (b - rg.arrival_bin) * bin_ns;
                auto v = static_cast<float>(rg.amplitude *
                                            std::exp(-t / rg.lifetime_ns));
                for (std::uint32_t r = rg.row0; r < rg.row1; ++r)
                    for (std::uint32_t c = rg.col0; c < rg.col1; ++c)
                        cube.values[cube_index(r, c, b, spec.rows, spec.cols)] =
                            v;
            }
        }
    }
    return cube;
}

} // namespace tfusion
