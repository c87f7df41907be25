#include "glass/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace glass {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor data size does not match shape " + shape_str(shape));
}

Tensor Tensor::scalar(double v) {
    Tensor t{Shape{1}};
    t.data[0] = v;
    return t;
}

Tensor Tensor::full(Shape s, double v) {
    Tensor t{std::move(s)};
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
}

Tensor Tensor::from(Shape s, std::initializer_list<double> vals) {
    return Tensor(std::move(s), std::vector<double>(vals));
}

Tensor Tensor::reshaped(Shape s) const {
    if (shape_numel(s) != numel())
        throw std::invalid_argument("reshape " + shape_str(shape) + " -> " + shape_str(s) + " changes element count");
    Tensor t = *this;
    t.shape = std::move(s);
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min_value() const {
    double m = data.empty() ? 0.0 : data[0];
    for (double v : data) m = std::min(m, v);
    return m;
}

double Tensor::max_value() const {
    double m = data.empty() ? 0.0 : data[0];
    for (double v : data) m = std::max(m, v);
    return m;
}

namespace linalg {

using MatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

void matmul(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    MutMap cm(c, m, n);
    cm.noalias() = MatMap(a, m, k) * MatMap(b, k, n);
}

void matmul_at_b(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    MutMap cm(c, k, n);
    cm.noalias() += MatMap(a, m, k).transpose() * MatMap(b, m, n);
}

void matmul_a_bt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    MutMap cm(c, m, n);
    cm.noalias() += MatMap(a, m, k) * MatMap(b, n, k).transpose();
}

void sym_eig(const double* a, int64_t n, double* eigenvalues, double* v) {
    Eigen::MatrixXd mat(n, n);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) mat(i, j) = a[i * n + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(mat);
    for (int64_t i = 0; i < n; ++i) eigenvalues[i] = solver.eigenvalues()(i);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < n; ++j) v[i * n + j] = solver.eigenvectors()(i, j);
}

}  // namespace linalg

}  // namespace glass
