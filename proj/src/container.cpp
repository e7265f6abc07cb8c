#include "mmsr/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mmsr/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "MTNS I/O assumes a little-endian host");

namespace mmsr {

namespace {
constexpr char kMagic[4] = {'M', 'T', 'N', 'S'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

Tensor TensorFile::to_tensor() const {
    Tensor t(shape);
    if (dtype == Dtype::f32) {
        for (std::size_t i = 0; i < f32.size(); ++i) t.data[i] = f32[i];
    } else {
        for (std::size_t i = 0; i < u8.size(); ++i) t.data[i] = u8[i];
    }
    return t;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
    if (t.shape.size() > 255) throw ParameterError("tensor rank exceeds container limit");
    const std::size_t count = t.element_count();
    if ((t.dtype == Dtype::f32 && t.f32.size() != count) ||
        (t.dtype == Dtype::u8 && t.u8.size() != count))
        throw DataError("tensor payload length does not match shape");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    out.put(static_cast<char>(t.dtype));
    out.put(static_cast<char>(t.shape.size()));
    for (std::size_t d : t.shape) {
        if (d > 0xffffffffu) throw ParameterError("tensor extent exceeds u32");
        std::uint32_t v = static_cast<std::uint32_t>(d);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (t.dtype == Dtype::f32)
        out.write(reinterpret_cast<const char*>(t.f32.data()),
                  static_cast<std::streamsize>(count * 4));
    else
        out.write(reinterpret_cast<const char*>(t.u8.data()),
                  static_cast<std::streamsize>(count));
    if (!out) throw DataError("write failed: " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open tensor file: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad magic in tensor file: " + path.string());
    const int version = in.get();
    if (version != kVersion)
        throw DataError("unsupported tensor file version in " + path.string());
    const int dtype = in.get();
    if (dtype != 1 && dtype != 2)
        throw DataError("unsupported dtype in tensor file: " + path.string());
    const int ndim = in.get();
    if (ndim < 0 || !in) throw DataError("truncated tensor header: " + path.string());

    TensorFile t;
    t.dtype = static_cast<Dtype>(dtype);
    t.shape.resize(ndim);
    for (int i = 0; i < ndim; ++i) {
        std::uint32_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 4);
        t.shape[i] = v;
    }
    if (!in) throw DataError("truncated tensor header: " + path.string());

    const std::size_t count = t.element_count();
    if (t.dtype == Dtype::f32) {
        t.f32.resize(count);
        in.read(reinterpret_cast<char*>(t.f32.data()), static_cast<std::streamsize>(count * 4));
    } else {
        t.u8.resize(count);
        in.read(reinterpret_cast<char*>(t.u8.data()), static_cast<std::streamsize>(count));
    }
    if (!in) throw DataError("truncated tensor payload: " + path.string());
    return t;
}

void write_f32(const std::filesystem::path& path, const Tensor& t) {
    TensorFile f;
    f.dtype = Dtype::f32;
    f.shape = t.shape;
    f.f32.resize(t.data.size());
    for (std::size_t i = 0; i < t.data.size(); ++i)
        f.f32[i] = static_cast<float>(t.data[i]);
    write_tensor_file(path, f);
}

void write_u8(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
              const std::vector<std::uint8_t>& bytes) {
    TensorFile f;
    f.dtype = Dtype::u8;
    f.shape = shape;
    f.u8 = bytes;
    write_tensor_file(path, f);
}

}  // namespace mmsr
