#include <doctest.h>

#include <cmath>
#include <vector>

#include "odm/autograd.hpp"
#include "odm/tensor.hpp"

using namespace odm;

namespace {

Tensor vec(std::vector<double> d) {
    const std::size_t n = d.size();
    return Tensor({n}, std::move(d));
}

}  // namespace

TEST_SUITE("autograd") {

TEST_CASE("elementwise values") {
    Tape t;
    const NodeId a = t.leaf(vec({1, 2}));
    const NodeId b = t.leaf(vec({3, 4}));
    CHECK(t.value(t.add(a, b)).data == std::vector<double>{4, 6});
    CHECK(t.value(t.sub(a, b)).data == std::vector<double>{-2, -2});
    CHECK(t.value(t.mul(a, b)).data == std::vector<double>{3, 8});
    CHECK(t.value(t.div(b, a)).data == std::vector<double>{3, 2});
    CHECK(t.value(t.mul(a, 0.0)).data == std::vector<double>{0, 0});
    CHECK(t.value(t.add(a, 10.0)).data == std::vector<double>{11, 12});
    CHECK(t.value(t.sub(10.0, a)).data == std::vector<double>{9, 8});
    CHECK(t.value(t.div(a, 2.0)).data == std::vector<double>{0.5, 1});
}

TEST_CASE("shape mismatches and non-finite division are rejected") {
    Tape t;
    const NodeId a = t.leaf(vec({1, 2}));
    const NodeId b = t.leaf(vec({1, 2, 3}));
    CHECK_THROWS(t.add(a, b));
    const NodeId z = t.leaf(vec({1, 0}));
    CHECK_THROWS(t.div(a, z));  // 2/0 is non-finite
}

TEST_CASE("matmul value and shape checks") {
    Tape t;
    const NodeId a = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    const NodeId b = t.leaf(Tensor::matrix(2, 2, {5, 6, 7, 8}));
    const Tensor& v = t.value(t.matmul(a, b));
    CHECK(v.data == std::vector<double>{19, 22, 43, 50});
    const NodeId c = t.leaf(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
    CHECK_THROWS(t.matmul(a, c));
}

TEST_CASE("reduce_mean, select_row, concat_cols values") {
    Tape t;
    const NodeId a = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
    CHECK(t.value(t.reduce_mean(a)).item() == 2.5);

    const NodeId e = t.leaf(Tensor::matrix(3, 2, {0, 1, 10, 11, 20, 21}));
    const Tensor& r1 = t.value(t.select_row(e, 1));
    CHECK(r1.shape == std::vector<std::size_t>{1, 2});
    CHECK(r1.data == std::vector<double>{10, 11});
    CHECK_THROWS(t.select_row(e, 3));

    const NodeId l = t.leaf(Tensor::matrix(2, 1, {1, 2}));
    const NodeId r = t.leaf(Tensor::matrix(2, 2, {3, 4, 5, 6}));
    const Tensor& cc = t.value(t.concat_cols(l, r));
    CHECK(cc.shape == std::vector<std::size_t>{2, 3});
    CHECK(cc.data == std::vector<double>{1, 3, 4, 2, 5, 6});
    const NodeId bad = t.leaf(Tensor::matrix(3, 1, {1, 2, 3}));
    CHECK_THROWS(t.concat_cols(l, bad));
}

TEST_CASE("unary values") {
    Tape t;
    const NodeId a = t.leaf(vec({0.0, 1.0, 4.0}));
    CHECK(t.value(t.sqrt(a)).data == std::vector<double>{0, 1, 2});
    CHECK_THROWS(t.sqrt(t.leaf(vec({-1.0}))));

    const NodeId b = t.leaf(vec({0.0, 1.0}));
    CHECK(t.value(t.tanh(b)).at(0) == 0.0);
    CHECK(t.value(t.tanh(b)).at(1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-15));
    CHECK(t.value(t.silu(b)).at(0) == 0.0);
    CHECK(t.value(t.silu(b)).at(1) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
}

TEST_CASE("backward on a composite expression") {
    // f(x, y) = mean((x*y - 3)^2), x = [1, 2], y = [4, 5]
    Tape t;
    const NodeId x = t.leaf(vec({1, 2}));
    const NodeId y = t.leaf(vec({4, 5}));
    const NodeId d = t.sub(t.mul(x, y), 3.0);
    const NodeId loss = t.reduce_mean(t.mul(d, d));
    CHECK(t.value(loss).item() == doctest::Approx((1.0 + 49.0) / 2.0));
    t.backward(loss);
    // dL/dx_i = 2*(x_i*y_i - 3)*y_i / 2
    CHECK(t.grad(x).at(0) == doctest::Approx(1.0 * 4.0));
    CHECK(t.grad(x).at(1) == doctest::Approx(7.0 * 5.0));
    CHECK(t.grad(y).at(0) == doctest::Approx(1.0 * 1.0));
    CHECK(t.grad(y).at(1) == doctest::Approx(7.0 * 2.0));
}

TEST_CASE("gradients accumulate across node reuse") {
    Tape t;
    const NodeId x = t.leaf(vec({3.0}));
    const NodeId y = t.reduce_mean(t.add(x, x));
    t.backward(y);
    CHECK(t.grad(x).at(0) == 2.0);
    t.zero_grad();
    CHECK(t.grad(x).at(0) == 0.0);
}

TEST_CASE("select_row scatters gradients to one row only") {
    Tape t;
    const NodeId e = t.leaf(Tensor::matrix(3, 2, {0, 0, 0, 0, 0, 0}));
    const NodeId loss = t.reduce_mean(t.select_row(e, 1));
    t.backward(loss);
    CHECK(t.grad(e).data == std::vector<double>{0, 0, 0.5, 0.5, 0, 0});
}

TEST_CASE("grad_check passes on a smooth composite") {
    const ScalarFn f = [](Tape& t, const std::vector<NodeId>& p) {
        // mean(silu(w0 * w1)^2) + sqrt(mean(tanh(w0)^2) + 1e-3)
        const NodeId m = t.mul(p[0], p[1]);
        const NodeId s = t.silu(m);
        const NodeId a = t.reduce_mean(t.mul(s, s));
        const NodeId th = t.tanh(p[0]);
        const NodeId b = t.sqrt(t.add(t.reduce_mean(t.mul(th, th)), 1e-3));
        return t.add(a, b);
    };
    const std::vector<Tensor> params{vec({0.3, -1.2, 0.8}), vec({1.5, 0.2, -0.7})};
    const GradCheckReport rep = grad_check(f, params);
    CHECK(rep.all_pass);
    CHECK(rep.checked == 6);
    CHECK(rep.failures.empty());
}

TEST_CASE("grad_check on matmul + concat + select_row") {
    const ScalarFn f = [](Tape& t, const std::vector<NodeId>& p) {
        const NodeId row = t.select_row(p[0], 1);       // 1x2 from 3x2
        const NodeId both = t.concat_cols(row, row);    // 1x4
        const NodeId w = p[1];                          // 4x2
        const NodeId out = t.matmul(both, w);           // 1x2
        return t.reduce_mean(t.mul(out, out));
    };
    const std::vector<Tensor> params{
        Tensor::matrix(3, 2, {0.1, -0.4, 0.9, 0.2, -0.3, 0.5}),
        Tensor::matrix(4, 2, {0.2, -0.1, 0.4, 0.3, -0.5, 0.6, 0.1, -0.2})};
    const GradCheckReport rep = grad_check(f, params);
    CHECK(rep.all_pass);
    CHECK(rep.checked == 14);
}

TEST_CASE("grad_check flags a non-finite derivative") {
    // |w| via sqrt(w*w) has an infinite analytic slope at w = 0.
    const ScalarFn f = [](Tape& t, const std::vector<NodeId>& p) {
        return t.reduce_mean(t.sqrt(t.mul(p[0], p[0])));
    };
    const GradCheckReport rep = grad_check(f, {vec({0.0})});
    CHECK_FALSE(rep.all_pass);
    REQUIRE(rep.failures.size() == 1);
    CHECK(rep.failures[0].non_finite);
}

TEST_CASE("backward requires a scalar loss") {
    Tape t;
    const NodeId x = t.leaf(vec({1, 2}));
    CHECK_THROWS(t.backward(x));
}

}  // TEST_SUITE
