#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace odm {

/// Dense row-major tensor of 64-bit floats. Shapes are checked by the
/// operations that consume tensors, not by the container itself.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s);
    Tensor(std::vector<std::size_t> s, double fill);
    Tensor(std::vector<std::size_t> s, std::vector<double> d);

    static Tensor scalar(double v);
    static Tensor row(std::vector<double> d);
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> d);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;
    bool is_scalar() const { return numel() == 1; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    double& at(std::size_t i) { return data[i]; }
    double at(std::size_t i) const { return data[i]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }

    /// Value of a one-element tensor.
    double item() const;
};

/// a*x + b*y elementwise; shapes must match.
Tensor lin_comb(double a, const Tensor& x, double b, const Tensor& y);
Tensor scaled(double a, const Tensor& x);

bool all_finite(const Tensor& x);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bit_equal(const Tensor& a, const Tensor& b);

// Accumulating row-major matrix kernels: c += op(a) * op(b).
// Callers zero c when plain products are wanted.
void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);
// c[m x k2] += a[m x n] * b[k2 x n]^T
void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t n, std::size_t k2);
// c[k x n] += a[m x k]^T * b[m x n]
void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n);

}  // namespace odm
