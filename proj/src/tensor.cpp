#include "odm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace odm {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) {
        if (d == 0) throw std::invalid_argument("tensor shape has a zero dimension");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, double fill)
    : shape(std::move(s)), data(shape_numel(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size())
        throw std::invalid_argument("tensor data length does not match shape " + shape_str());
}

Tensor Tensor::scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

Tensor Tensor::row(std::vector<double> d) {
    const std::size_t n = d.size();
    return Tensor({1, n}, std::move(d));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> d) {
    return Tensor({r, c}, std::move(d));
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows() on non-matrix tensor " + shape_str());
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols() on non-matrix tensor " + shape_str());
    return shape[1];
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

double Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("item() on tensor " + shape_str());
    return data[0];
}

Tensor lin_comb(double a, const Tensor& x, double b, const Tensor& y) {
    if (!x.same_shape(y))
        throw std::invalid_argument("lin_comb shape mismatch " + x.shape_str() + " vs " + y.shape_str());
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = a * x.data[i] + b * y.data[i];
    return out;
}

Tensor scaled(double a, const Tensor& x) {
    Tensor out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = a * x.data[i];
    return out;
}

bool all_finite(const Tensor& x) {
    for (double v : x.data)
        if (!std::isfinite(v)) return false;
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("max_abs_diff shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && std::equal(a.data.begin(), a.data.end(), b.data.begin(),
                                            [](double x, double y) {
                                                return std::memcmp(&x, &y, sizeof(double)) == 0;
                                            });
}

void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t n, std::size_t k2) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * n;
        double* ci = c + i * k2;
        for (std::size_t j = 0; j < k2; ++j) {
            const double* bj = b + j * n;
            double acc = 0.0;
            for (std::size_t p = 0; p < n; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t p = 0; p < m; ++p) {
        const double* ap = a + p * k;
        const double* bp = b + p * n;
        for (std::size_t i = 0; i < k; ++i) {
            const double av = ap[i];
            double* ci = c + i * n;
            for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

}  // namespace odm
