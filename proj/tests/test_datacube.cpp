#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tfusion/io.hpp"
#include "tfusion/types.hpp"

#include <random>
#include <sstream>

using namespace tfusion;

static TransientCube random_cube(std::uint32_t rows, std::uint32_t cols,
                                 std::uint32_t bins, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 100.0f);
    std::vector<float> v(std::size_t(rows) * cols * bins);
    for (float& x : v)
        x = u(rng);
    return TransientCube(rows, cols, bins, 55.0, std::move(v));
}

TEST_CASE("constructors reject invalid inputs") {
    CHECK_THROWS(TransientCube(0, 1, 1, 55.0, {}));
    CHECK_THROWS(TransientCube(1, 1, 0, 55.0, {}));
    CHECK_THROWS(TransientCube(1, 1, 1, 0.0, {1.0f}));
    CHECK_THROWS(TransientCube(1, 1, 1, 55.0, {-1.0f}));
    CHECK_THROWS(TransientCube(2, 2, 1, 55.0, {1.0f})); // wrong length
    CHECK_THROWS(IntensityImage(1, 1, {-0.5f}));
    CHECK_THROWS(SpadMeasurement(2, 2, 1, 55.0, {0, 0, 0, 0}, {{5, 0}}));
    // dead pixel with nonzero counts
    CHECK_THROWS(SpadMeasurement(2, 2, 1, 55.0, {1, 0, 0, 0}, {{0, 0}}));
}

TEST_CASE("trivial 1x1x1 cube round-trips through a 36-byte stream") {
    TransientCube cube(1, 1, 1, 55.0, {0.0f});
    std::ostringstream out;
    write_cube(cube, out);
    // 24-byte header + 8-byte bin width + one binary32 value
    CHECK(out.str().size() == 36);
    std::istringstream in(out.str());
    CHECK(read_cube(in) == cube);
}

TEST_CASE("header records dimensions and payload size follows them") {
    auto cube = random_cube(96, 96, 64, 1);
    std::ostringstream out;
    write_cube(cube, out);
    CHECK(out.str().size() == 24 + 8 + std::size_t(4) * 96 * 96 * 64);
    const std::string& bytes = out.str();
    CHECK(bytes.substr(0, 4) == "TRCB");
    auto u32_at = [&](std::size_t off) {
        return std::uint32_t(std::uint8_t(bytes[off])) |
               std::uint32_t(std::uint8_t(bytes[off + 1])) << 8 |
               std::uint32_t(std::uint8_t(bytes[off + 2])) << 16 |
               std::uint32_t(std::uint8_t(bytes[off + 3])) << 24;
    };
    CHECK(u32_at(8) == 96);
    CHECK(u32_at(12) == 96);
    CHECK(u32_at(16) == 64);
}

TEST_CASE("round-trip is bit-exact for random cubes") {
    for (std::uint64_t seed : {2, 3, 4}) {
        auto cube = random_cube(5, 7, 3, seed);
        std::ostringstream out;
        write_cube(cube, out);
        std::istringstream in(out.str());
        auto back = read_cube(in);
        CHECK(back == cube);
    }
}

TEST_CASE("read_cube rejects malformed streams") {
    auto cube = random_cube(2, 2, 2, 9);
    std::ostringstream out;
    write_cube(cube, out);
    std::string bytes = out.str();

    SUBCASE("bad magic") {
        std::string bad = bytes;
        bad.replace(0, 4, "XXXX");
        std::istringstream in(bad);
        CHECK_THROWS_WITH(read_cube(in), "bad magic");
    }
    SUBCASE("unsupported version") {
        std::string bad = bytes;
        bad[4] = 9;
        std::istringstream in(bad);
        CHECK_THROWS_WITH(read_cube(in), "unsupported version");
    }
    SUBCASE("truncated payload") {
        std::istringstream in(bytes.substr(0, bytes.size() - 3));
        CHECK_THROWS_WITH(read_cube(in), "payload mismatch");
    }
    SUBCASE("negative payload value") {
        std::string bad = bytes;
        bad[32 + 3] = char(0x80 | std::uint8_t(bad[32 + 3])); // flip sign bit
        std::istringstream in(bad);
        CHECK_THROWS(read_cube(in));
    }
}

TEST_CASE("csv export writes sentinel as empty cell") {
    ScalarMap map(2, 2, MapUnit::Dimensionless, {1, 2, 3, 4});
    std::ostringstream out;
    export_map(map, out, MapFormat::Csv);
    CHECK(out.str() == "1,2\n3,4\n");

    map.values[1] = ScalarMap::sentinel();
    std::ostringstream out2;
    export_map(map, out2, MapFormat::Csv);
    CHECK(out2.str() == "1,\n3,4\n");
}

TEST_CASE("pgm16 export") {
    SUBCASE("constant map maps to all zeros") {
        auto map = ScalarMap::filled(2, 3, MapUnit::Nanoseconds, 4.2);
        std::ostringstream out;
        export_map(map, out, MapFormat::Pgm16);
        std::string s = out.str();
        std::string header = "P5\n3 2\n65535\n";
        CHECK(s.substr(0, header.size()) == header);
        for (std::size_t i = header.size(); i < s.size(); ++i)
            CHECK(s[i] == 0);
    }
    SUBCASE("all-sentinel map is an error") {
        auto map = ScalarMap::filled(2, 2, MapUnit::Nanoseconds,
                                     ScalarMap::sentinel());
        std::ostringstream out;
        CHECK_THROWS_WITH(export_map(map, out, MapFormat::Pgm16), "empty map");
    }
    SUBCASE("min-max scaling hits the endpoints") {
        ScalarMap map(1, 3, MapUnit::TimeBin, {0, 5, 10});
        std::ostringstream out;
        export_map(map, out, MapFormat::Pgm16);
        std::string s = out.str();
        std::size_t off = s.size() - 6;
        auto px = [&](int i) {
            return std::uint16_t(std::uint8_t(s[off + 2 * i]) << 8 |
                                 std::uint8_t(s[off + 2 * i + 1]));
        };
        CHECK(px(0) == 0);
        CHECK(px(1) == 32768);
        CHECK(px(2) == 65535);
    }
}

TEST_CASE("dead-pixel sidecar round-trips") {
    std::set<PixelCoord> dead = {{0, 1}, {3, 2}, {7, 7}};
    std::ostringstream out;
    write_dead_pixels(dead, out);
    CHECK(out.str() == "0,1\n3,2\n7,7\n");
    std::istringstream in(out.str());
    CHECK(read_dead_pixels(in) == dead);
}
