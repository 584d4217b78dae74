// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dim/rope.hpp"
#include "dim/serial.hpp"

using namespace dim;

TEST_CASE("position zero is the identity rotation") {
    auto t = build_rope_tables(10000.0, 8, 16);
    for (uint32_t k = 0; k < t.half_dim; ++k) {
        CHECK(t.cos_at(0, k) == kQ16One);
        CHECK(t.sin_at(0, k) == 0);
    }
}

TEST_CASE("entries match fp64 rounding") {
    auto t = build_rope_tables(10000.0, 4, 8);
    // pos=1, k=0: angle = 1
    CHECK(std::llabs(t.cos_at(1, 0) - std::llround(std::cos(1.0) * 65536.0)) <= 1);
    CHECK(std::llabs(t.sin_at(1, 0) - std::llround(std::sin(1.0) * 65536.0)) <= 1);
    // pos=3, k=1: angle = 3 * 10000^(-1/2)
    double angle = 3.0 * std::pow(10000.0, -0.5);
    CHECK(std::llabs(t.cos_at(3, 1) - std::llround(std::cos(angle) * 65536.0)) <= 1);
}

TEST_CASE("cos^2 + sin^2 stays within 2 raw units of ONE") {
    for (auto [dh, ctx] : {std::pair<uint32_t, uint32_t>{64, 512}, {4, 512}, {16, 1024}}) {
        auto t = build_rope_tables(10000.0, dh, ctx);
        for (size_t i = 0; i < t.cos_raw.size(); ++i) {
            int64_t c = t.cos_raw[i];
            int64_t s = t.sin_raw[i];
            int64_t norm = (c * c + s * s) >> 16;
            REQUIRE(std::llabs(norm - kQ16One) <= 2);
        }
    }
}

TEST_CASE("export/import round-trips bitwise") {
    auto t = build_rope_tables(10000.0, 32, 128);
    auto bytes = serialize_rope_tables(t);
    auto back = deserialize_rope_tables(bytes);
    CHECK(back == t);
    CHECK(serialize_rope_tables(back) == bytes);
}

TEST_CASE("import rejects malformed artifacts") {
    auto bytes = serialize_rope_tables(build_rope_tables(10000.0, 4, 4));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_rope_tables(bad_magic), ParseError);
    auto truncated = bytes;
    truncated.resize(truncated.size() - 3);
    CHECK_THROWS_AS(deserialize_rope_tables(truncated), ParseError);
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(deserialize_rope_tables(trailing), ParseError);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(build_rope_tables(10000.0, 3, 4), std::invalid_argument);
    CHECK_THROWS_AS(build_rope_tables(10000.0, 4, 0), std::invalid_argument);
    CHECK_THROWS_AS(build_rope_tables(-1.0, 4, 4), std::invalid_argument);
}
