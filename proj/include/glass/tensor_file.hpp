#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "glass/tensor.hpp"

namespace glass {

// Portable dense-tensor container: 8-byte magic "GLTENSR1", one human-readable
// header line `dtype=<d> shape=<a,b,...> name=<tag>\n`, then the raw payload,
// row-major, little-endian regardless of host.
enum class Dtype { f32, u8, i32 };

size_t dtype_size(Dtype d);
std::string dtype_name(Dtype d);
Dtype dtype_from_name(const std::string& s);

struct TensorFile {
    Dtype dtype = Dtype::f32;
    Shape shape;
    std::vector<uint8_t> data;
    std::string name;

    int64_t numel() const { return shape_numel(shape); }
    void validate() const;

    static TensorFile from_f32(const Shape& shape, const std::vector<float>& values, std::string name);
    static TensorFile from_i32(const Shape& shape, const std::vector<int32_t>& values, std::string name);
    static TensorFile from_u8(const Shape& shape, const std::vector<uint8_t>& values, std::string name);
    // f32 round trip through the file dtype
    static TensorFile from_tensor(const Tensor& t, std::string name);

    std::vector<float> as_f32() const;
    std::vector<int32_t> as_i32() const;
    std::vector<uint8_t> as_u8() const;
    Tensor to_tensor() const;  // widened to double
};

struct TensorIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BadMagicError : TensorIoError {
    using TensorIoError::TensorIoError;
};
struct TruncatedPayloadError : TensorIoError {
    using TensorIoError::TensorIoError;
};
struct ShapeSizeMismatchError : TensorIoError {
    using TensorIoError::TensorIoError;
};
struct InvalidTensorError : TensorIoError {
    using TensorIoError::TensorIoError;
};

void write_tensor(const TensorFile& t, const std::string& path);
TensorFile read_tensor(const std::string& path);

}  // namespace glass
