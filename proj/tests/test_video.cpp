#include <doctest.h>

#include <vector>

#include "mmsr/errors.hpp"
#include "mmsr/video.hpp"

using namespace mmsr;

TEST_CASE("grayscale worked examples") {
    const std::vector<std::uint8_t> px = {255, 255, 255, 255, 0, 0, 0, 0, 0};
    const auto g = grayscale(px, 1, 3, 3);
    REQUIRE(g.size() == 3);
    CHECK(g[0] == 255);
    CHECK(g[1] == 76);  // 0.299 * 255 = 76.245
    CHECK(g[2] == 0);
    CHECK_THROWS_AS(grayscale(px, 1, 3, 4), ParameterError);
}

TEST_CASE("resize identity and averaging") {
    std::vector<std::uint8_t> frame(100 * 100);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = std::uint8_t(i % 251);
    CHECK(resize_bilinear(frame, 100, 100, 100, 100) == frame);

    const std::vector<std::uint8_t> quad = {0, 0, 255, 255};
    const auto one = resize_bilinear(quad, 2, 2, 1, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == 128);  // mean 127.5 rounded half-up

    const std::vector<std::uint8_t> flat(12, 77);
    for (std::uint8_t v : resize_bilinear(flat, 3, 4, 7, 5)) CHECK(v == 77);
}

TEST_CASE("resize is idempotent at fixed size") {
    std::vector<std::uint8_t> frame(40 * 30);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = std::uint8_t((i * 37) % 256);
    const auto once = resize_bilinear(frame, 40, 30, 20, 20);
    CHECK(resize_bilinear(once, 20, 20, 20, 20) == once);
}

TEST_CASE("upscale stays in range and preserves corners approximately") {
    const std::vector<std::uint8_t> tiny = {10, 200, 60, 140};
    const auto big = resize_bilinear(tiny, 2, 2, 8, 8);
    for (std::uint8_t v : big) {
        CHECK(v >= 10);
        CHECK(v <= 200);
    }
    CHECK(big[0] == 10);        // top-left clamp region
    CHECK(big[7] == 200);       // top-right
    CHECK(big[56] == 60);       // bottom-left
    CHECK(big[63] == 140);      // bottom-right
}

TEST_CASE("stream alignment") {
    CHECK(aligned_length({203, 200, 201}) == 200);
    CHECK(aligned_length({7, 7}) == 7);
    CHECK_THROWS_AS(aligned_length({5, 0, 9}), DataError);
    CHECK_THROWS_AS(aligned_length({}), DataError);
}
