#pragma once

#include "tfusion/types.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace tfusion {

// TRCB cube format, little-endian:
//   "TRCB"  u16 version=1  u16 dtype=1 (binary32)
//   u32 rows  u32 cols  u32 bins  u32 reserved=0
//   f64 bin_width_ps
//   rows*cols*bins binary32 values, bin-major frames, row-major per frame

namespace detail {

template <class T> void write_le(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T> bool read_le(std::istream& in, T& value) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T)))
        return false;
    if constexpr (std::endian::native == std::endian::big)
        std::reverse(buf, buf + sizeof(T));
    std::memcpy(&value, buf, sizeof(T));
    return true;
}

} // namespace detail

inline void write_cube(const TransientCube& cube, std::ostream& out) {
    out.write("TRCB", 4);
    detail::write_le<std::uint16_t>(out, 1); // version
    detail::write_le<std::uint16_t>(out, 1); // dtype: binary32
    detail::write_le<std::uint32_t>(out, cube.rows);
    detail::write_le<std::uint32_t>(out, cube.cols);
    detail::write_le<std::uint32_t>(out, cube.bins);
    detail::write_le<std::uint32_t>(out, 0); // reserved
    detail::write_le<double>(out, cube.bin_width_ps);
    for (float v : cube.values)
        detail::write_le<float>(out, v);
    if (!out)
        throw std::runtime_error("write failure");
}

inline void write_cube(const TransientCube& cube, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    write_cube(cube, out);
}

inline TransientCube read_cube(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "TRCB", 4) != 0)
        throw std::runtime_error("bad magic");
    std::uint16_t version = 0, dtype = 0;
    std::uint32_t rows = 0, cols = 0, bins = 0, reserved = 0;
    double bin_width = 0.0;
    if (!detail::read_le(in, version) || !detail::read_le(in, dtype) ||
        !detail::read_le(in, rows) || !detail::read_le(in, cols) ||
        !detail::read_le(in, bins) || !detail::read_le(in, reserved) ||
        !detail::read_le(in, bin_width))
        throw std::runtime_error("truncated header");
    if (version != 1)
        throw std::runtime_error("unsupported version");
    if (dtype != 1)
        throw std::runtime_error("unsupported dtype");
    if (rows < 1 || cols < 1 || bins < 1)
        throw std::runtime_error("dimension mismatch");
    std::size_t count = static_cast<std::size_t>(rows) * cols * bins;
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (!detail::read_le(in, values[i]))
            throw std::runtime_error("payload mismatch");
        if (!(values[i] >= 0.0f))
            throw std::runtime_error("negative value in payload");
    }
    return TransientCube(rows, cols, bins, bin_width, std::move(values));
}

inline TransientCube read_cube(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path);
    return read_cube(in);
}

enum class MapFormat { Csv, Pgm16 };

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream ss;
    ss.precision(12);
    ss << v;
    return ss.str();
}

} // namespace detail

// csv: one line per pixel row, sentinel -> empty cell.
// pgm16: min-max scaled to 0..65535, sentinel -> 0; a constant map maps to 0.
inline void export_map(const ScalarMap& map, std::ostream& out,
                       MapFormat format) {
    if (format == MapFormat::Csv) {
        for (std::uint32_t r = 0; r < map.rows; ++r) {
            for (std::uint32_t c = 0; c < map.cols; ++c) {
                if (c > 0)
                    out << ',';
                double v = map.at(r, c);
                if (!ScalarMap::is_sentinel(v))
                    out << detail::format_number(v);
            }
            out << '\n';
        }
    } else {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -std::numeric_limits<double>::infinity();
        for (double v : map.values) {
            if (ScalarMap::is_sentinel(v))
                continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!std::isfinite(lo))
            throw std::runtime_error("empty map");
        out << "P5\n" << map.cols << ' ' << map.rows << "\n65535\n";
        double range = hi - lo;
        for (double v : map.values) {
            std::uint16_t pix = 0;
            if (!ScalarMap::is_sentinel(v) && range > 0.0) {
                double scaled = (v - lo) / range * 65535.0;
                pix = static_cast<std::uint16_t>(std::lround(scaled));
            }
            // PGM stores 16-bit samples big-endian
            out.put(static_cast<char>(pix >> 8));
            out.put(static_cast<char>(pix & 0xff));
        }
    }
    if (!out)
        throw std::runtime_error("write failure");
}

inline void export_map(const ScalarMap& map, const std::string& path,
                       MapFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    export_map(map, out, format);
}

// Dead-pixel sidecar: one "row,col" line per dead pixel, sorted.
inline void write_dead_pixels(const std::set<PixelCoord>& dead,
                              std::ostream& out) {
    for (const auto& [r, c] : dead)
        out << r << ',' << c << '\n';
    if (!out)
        throw std::runtime_error("write failure");
}

inline void write_dead_pixels(const std::set<PixelCoord>& dead,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    write_dead_pixels(dead, out);
}

inline std::set<PixelCoord> read_dead_pixels(std::istream& in) {
    std::set<PixelCoord> dead;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("malformed dead-pixel line: " + line);
        dead.emplace(static_cast<std::uint32_t>(std::stoul(line.substr(0, comma))),
                     static_cast<std::uint32_t>(std::stoul(line.substr(comma + 1))));
    }
    return dead;
}

inline std::set<PixelCoord> read_dead_pixels(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path);
    return read_dead_pixels(in);
}

} // namespace tfusion
