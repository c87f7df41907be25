#include "glass/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace glass {

static constexpr char kMagic[8] = {'G', 'L', 'T', 'E', 'N', 'S', 'R', '1'};

size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::f32: return 4;
        case Dtype::u8: return 1;
        case Dtype::i32: return 4;
    }
    return 0;
}

std::string dtype_name(Dtype d) {
    switch (d) {
        case Dtype::f32: return "float32";
        case Dtype::u8: return "uint8";
        case Dtype::i32: return "int32";
    }
    return "?";
}

Dtype dtype_from_name(const std::string& s) {
    if (s == "float32") return Dtype::f32;
    if (s == "uint8") return Dtype::u8;
    if (s == "int32") return Dtype::i32;
    throw InvalidTensorError("unknown dtype '" + s + "'");
}

void TensorFile::validate() const {
    if (shape.empty()) throw InvalidTensorError("tensor '" + name + "' has zero dimensions");
    for (int64_t d : shape)
        if (d <= 0) throw InvalidTensorError("tensor '" + name + "' has non-positive dimension in " + shape_str(shape));
    size_t expect = static_cast<size_t>(numel()) * dtype_size(dtype);
    if (data.size() != expect)
        throw ShapeSizeMismatchError("tensor '" + name + "': payload is " + std::to_string(data.size()) +
                                     " bytes, shape " + shape_str(shape) + " needs " + std::to_string(expect));
    if (name.find('\n') != std::string::npos || name.find(' ') != std::string::npos)
        throw InvalidTensorError("tensor name must not contain spaces or newlines");
}

// Both helpers below assume IEEE-754 floats, which the build asserts.
static_assert(std::numeric_limits<float>::is_iec559);

static void put_u32_le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

static uint32_t get_u32_le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

TensorFile TensorFile::from_f32(const Shape& shape, const std::vector<float>& values, std::string name) {
    TensorFile t;
    t.dtype = Dtype::f32;
    t.shape = shape;
    t.name = std::move(name);
    t.data.reserve(values.size() * 4);
    for (float f : values) put_u32_le(t.data, std::bit_cast<uint32_t>(f));
    t.validate();
    return t;
}

TensorFile TensorFile::from_i32(const Shape& shape, const std::vector<int32_t>& values, std::string name) {
    TensorFile t;
    t.dtype = Dtype::i32;
    t.shape = shape;
    t.name = std::move(name);
    t.data.reserve(values.size() * 4);
    for (int32_t v : values) put_u32_le(t.data, static_cast<uint32_t>(v));
    t.validate();
    return t;
}

TensorFile TensorFile::from_u8(const Shape& shape, const std::vector<uint8_t>& values, std::string name) {
    TensorFile t;
    t.dtype = Dtype::u8;
    t.shape = shape;
    t.name = std::move(name);
    t.data = values;
    t.validate();
    return t;
}

TensorFile TensorFile::from_tensor(const Tensor& t, std::string name) {
    std::vector<float> f(t.data.size());
    for (size_t i = 0; i < t.data.size(); ++i) f[i] = static_cast<float>(t.data[i]);
    return from_f32(t.shape, f, std::move(name));
}

std::vector<float> TensorFile::as_f32() const {
    if (dtype != Dtype::f32) throw InvalidTensorError("tensor '" + name + "' is not float32");
    std::vector<float> out(static_cast<size_t>(numel()));
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::bit_cast<float>(get_u32_le(data.data() + i * 4));
    return out;
}

std::vector<int32_t> TensorFile::as_i32() const {
    if (dtype != Dtype::i32) throw InvalidTensorError("tensor '" + name + "' is not int32");
    std::vector<int32_t> out(static_cast<size_t>(numel()));
    for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int32_t>(get_u32_le(data.data() + i * 4));
    return out;
}

std::vector<uint8_t> TensorFile::as_u8() const {
    if (dtype != Dtype::u8) throw InvalidTensorError("tensor '" + name + "' is not uint8");
    return data;
}

Tensor TensorFile::to_tensor() const {
    Tensor t{shape};
    switch (dtype) {
        case Dtype::f32: {
            auto f = as_f32();
            for (size_t i = 0; i < f.size(); ++i) t.data[i] = f[i];
            break;
        }
        case Dtype::i32: {
            auto v = as_i32();
            for (size_t i = 0; i < v.size(); ++i) t.data[i] = v[i];
            break;
        }
        case Dtype::u8: {
            for (size_t i = 0; i < data.size(); ++i) t.data[i] = data[i];
            break;
        }
    }
    return t;
}

void write_tensor(const TensorFile& t, const std::string& path) {
    t.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw TensorIoError("cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    std::ostringstream header;
    header << "dtype=" << dtype_name(t.dtype) << " shape=";
    for (size_t i = 0; i < t.shape.size(); ++i) {
        if (i) header << ",";
        header << t.shape[i];
    }
    header << " name=" << (t.name.empty() ? "unnamed" : t.name) << "\n";
    const std::string h = header.str();
    os.write(h.data(), static_cast<std::streamsize>(h.size()));
    os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
    if (!os) throw TensorIoError("write failed for '" + path + "'");
}

TensorFile read_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TensorIoError("cannot open '" + path + "' for reading");
    char magic[8];
    is.read(magic, 8);
    if (is.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw BadMagicError("'" + path + "': bad magic, not a GLTENSR1 file");

    std::string header;
    if (!std::getline(is, header)) throw TruncatedPayloadError("'" + path + "': missing header line");

    TensorFile t;
    std::istringstream hs(header);
    std::string field;
    bool saw_dtype = false, saw_shape = false;
    while (hs >> field) {
        auto eq = field.find('=');
        if (eq == std::string::npos) throw InvalidTensorError("'" + path + "': malformed header field '" + field + "'");
        std::string key = field.substr(0, eq), value = field.substr(eq + 1);
        if (key == "dtype") {
            t.dtype = dtype_from_name(value);
            saw_dtype = true;
        } else if (key == "shape") {
            std::istringstream ss(value);
            std::string dim;
            while (std::getline(ss, dim, ',')) t.shape.push_back(std::stoll(dim));
            saw_shape = true;
        } else if (key == "name") {
            t.name = value;
        }
    }
    if (!saw_dtype || !saw_shape) throw InvalidTensorError("'" + path + "': header missing dtype or shape");
    if (t.shape.empty()) throw InvalidTensorError("'" + path + "': tensor has zero dimensions");
    for (int64_t d : t.shape)
        if (d <= 0) throw InvalidTensorError("'" + path + "': non-positive dimension in " + shape_str(t.shape));

    size_t expect = static_cast<size_t>(t.numel()) * dtype_size(t.dtype);
    std::vector<uint8_t> payload{std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    // A payload cut mid-element is truncation; an element-aligned wrong length
    // means the header shape disagrees with what was written.
    if (payload.size() < expect && payload.size() % dtype_size(t.dtype) != 0)
        throw TruncatedPayloadError("'" + path + "': truncated payload, expected " + std::to_string(expect) +
                                    " bytes, got " + std::to_string(payload.size()));
    if (payload.size() != expect)
        throw ShapeSizeMismatchError("'" + path + "': shape " + shape_str(t.shape) + " needs " +
                                     std::to_string(expect) + " payload bytes, file has " +
                                     std::to_string(payload.size()));
    t.data = std::move(payload);
    return t;
}

}  // namespace glass
