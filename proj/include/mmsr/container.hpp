#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr {

// Binary tensor container ("MTNS"):
//   magic  4 bytes "MTNS"
//   version u8 = 1
//   dtype   u8 (1 = float32, 2 = uint8)
//   ndim    u8
//   dims    ndim x u32 little-endian
//   payload row-major little-endian values
enum class Dtype : std::uint8_t { f32 = 1, u8 = 2 };

struct TensorFile {
    Dtype dtype = Dtype::f32;
    std::vector<std::size_t> shape;
    std::vector<float> f32;       // valid when dtype == f32
    std::vector<std::uint8_t> u8; // valid when dtype == u8

    std::size_t element_count() const { return Tensor::size_from_shape(shape); }

    // Payload widened to double regardless of dtype.
    Tensor to_tensor() const;
};

void write_tensor_file(const std::filesystem::path& path, const TensorFile& t);
TensorFile read_tensor_file(const std::filesystem::path& path);

// Convenience: store a double tensor as float32 (values narrowed).
void write_f32(const std::filesystem::path& path, const Tensor& t);
// Convenience: store raw bytes with a shape (e.g. video frames).
void write_u8(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& bytes);

}  // namespace mmsr
