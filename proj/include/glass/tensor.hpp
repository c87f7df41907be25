#pragma once

#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace glass {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major double tensor. All in-core math is 64-bit; narrower dtypes
// exist only at the file-format boundary (tensor_file.hpp).
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s) : shape(std::move(s)), data(static_cast<size_t>(shape_numel(shape)), 0.0) {}
    Tensor(Shape s, std::vector<double> d);
    static Tensor scalar(double v);
    static Tensor full(Shape s, double v);
    static Tensor from(Shape s, std::initializer_list<double> vals);

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int64_t rank() const { return static_cast<int64_t>(shape.size()); }
    int64_t dim(int i) const { return shape.at(static_cast<size_t>(i)); }

    double& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    double at(int64_t i) const { return data[static_cast<size_t>(i)]; }
    // 2-D accessor (rows, cols)
    double& at(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    double at(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }
    // 3-D accessor (c, h, w)
    double& at(int64_t a, int64_t b, int64_t c) {
        return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
    }
    double at(int64_t a, int64_t b, int64_t c) const {
        return data[static_cast<size_t>((a * shape[1] + b) * shape[2] + c)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    Tensor reshaped(Shape s) const;
    bool all_finite() const;
    double min_value() const;
    double max_value() const;
};

// Eigen-backed kernels, kept in one TU so Eigen headers stay out of the rest
// of the build.
namespace linalg {

// c = a(m,k) * b(k,n), row-major
void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// c += a^T * b where a is (m,k), b is (m,n), c is (k,n)
void matmul_at_b(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);
// c += a * b^T where a is (m,k), b is (n,k), c is (m,n)
void matmul_a_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n);

// Symmetric eigen-decomposition of the n-by-n matrix a (row-major).
// Eigenvalues ascending; eigenvectors in columns of v.
void sym_eig(const double* a, int64_t n, double* eigenvalues, double* v);

}  // namespace linalg

}  // namespace glass
