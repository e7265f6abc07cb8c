#pragma once

#include <cstdint>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr {

// Time-ordered grayscale frames of fixed spatial size, values in [0,255].
struct VideoSequence {
    std::size_t height = 0, width = 0;
    std::vector<std::uint8_t> frames;  // T x H x W row-major
    double frame_rate_hz = 100.0;

    std::size_t length() const {
        return height * width == 0 ? 0 : frames.size() / (height * width);
    }
    const std::uint8_t* frame(std::size_t t) const { return frames.data() + t * height * width; }
};

// BT.601 luma, rounded half-up. rgb is H x W x 3 interleaved.
std::vector<std::uint8_t> grayscale(const std::vector<std::uint8_t>& rgb,
                                    std::size_t height, std::size_t width,
                                    std::size_t channels);

// Bilinear resize with half-pixel-centered sampling; output clamped to [0,255]
// and rounded half-up.
std::vector<std::uint8_t> resize_bilinear(const std::vector<std::uint8_t>& frame,
                                          std::size_t in_h, std::size_t in_w,
                                          std::size_t out_h, std::size_t out_w);

// Truncates all streams to the shortest length; any empty stream is an error.
std::size_t aligned_length(const std::vector<std::size_t>& lengths);

}  // namespace mmsr
