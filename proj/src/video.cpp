#include "mmsr/video.hpp"

#include <algorithm>
#include <cmath>

#include "mmsr/errors.hpp"

namespace mmsr {

namespace {
std::uint8_t round_clamp(double v) {
    const double r = std::floor(v + 0.5);
    return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}
}  // namespace

std::vector<std::uint8_t> grayscale(const std::vector<std::uint8_t>& rgb,
                                    std::size_t height, std::size_t width,
                                    std::size_t channels) {
    if (channels != 3) throw ParameterError("grayscale expects 3-channel input");
    if (rgb.size() != height * width * 3) throw ShapeError("RGB buffer size mismatch");

    std::vector<std::uint8_t> out(height * width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = 0.299 * rgb[3 * i] + 0.587 * rgb[3 * i + 1] + 0.114 * rgb[3 * i + 2];
        out[i] = round_clamp(y);
    }
    return out;
}

std::vector<std::uint8_t> resize_bilinear(const std::vector<std::uint8_t>& frame,
                                          std::size_t in_h, std::size_t in_w,
                                          std::size_t out_h, std::size_t out_w) {
    if (in_h == 0 || in_w == 0 || out_h == 0 || out_w == 0)
        throw ParameterError("resize dimensions must be positive");
    if (frame.size() != in_h * in_w) throw ShapeError("frame buffer size mismatch");

    std::vector<std::uint8_t> out(out_h * out_w);
    const double sy = double(in_h) / double(out_h);
    const double sx = double(in_w) / double(out_w);
    for (std::size_t oy = 0; oy < out_h; ++oy) {
        // Half-pixel centers: destination center maps into source coordinates.
        const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, double(in_h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, in_h - 1);
        const double wy = fy - double(y0);
        for (std::size_t ox = 0; ox < out_w; ++ox) {
            const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, double(in_w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, in_w - 1);
            const double wx = fx - double(x0);
            const double v =
                (1 - wy) * ((1 - wx) * frame[y0 * in_w + x0] + wx * frame[y0 * in_w + x1]) +
                wy * ((1 - wx) * frame[y1 * in_w + x0] + wx * frame[y1 * in_w + x1]);
            out[oy * out_w + ox] = round_clamp(v);
        }
    }
    return out;
}

std::size_t aligned_length(const std::vector<std::size_t>& lengths) {
    if (lengths.empty()) throw DataError("no streams to align");
    std::size_t t = lengths[0];
    for (std::size_t l : lengths) t = std::min(t, l);
    if (t == 0) throw DataError("cannot align an empty stream");
    return t;
}

}  // namespace mmsr
