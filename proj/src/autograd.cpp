#include "odm/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace odm {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor v) {
    Node n;
    n.grad = Tensor(v.shape);
    n.value = std::move(v);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    require_same_shape(va, vb, "add");
    Node n;
    n.op = OpKind::add;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] + vb.data[i];
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    require_same_shape(va, vb, "sub");
    Node n;
    n.op = OpKind::sub;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] - vb.data[i];
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    require_same_shape(va, vb, "mul");
    Node n;
    n.op = OpKind::mul;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] * vb.data[i];
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::div(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    require_same_shape(va, vb, "div");
    Node n;
    n.op = OpKind::div_;
    n.a = a;
    n.b = b;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] / vb.data[i];
    if (!all_finite(n.value)) throw std::invalid_argument("div: non-finite result");
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, double s) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::add_s;
    n.a = a;
    n.scalar = s;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] + s;
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, double s) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::sub_s;
    n.a = a;
    n.scalar = s;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] - s;
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::sub(double s, NodeId a) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::rsub_s;
    n.a = a;
    n.scalar = s;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = s - va.data[i];
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, double s) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::mul_s;
    n.a = a;
    n.scalar = s;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] * s;
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::div(NodeId a, double s) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::div_s;
    n.a = a;
    n.scalar = s;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = va.data[i] / s;
    if (!all_finite(n.value)) throw std::invalid_argument("div: non-finite result");
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::elementwise(EwOp op, NodeId a, NodeId b) {
    switch (op) {
        case EwOp::add: return add(a, b);
        case EwOp::sub: return sub(a, b);
        case EwOp::mul: return mul(a, b);
        case EwOp::div: return div(a, b);
    }
    throw std::invalid_argument("elementwise: bad op kind");
}

NodeId Tape::elementwise(EwOp op, NodeId a, double s) {
    switch (op) {
        case EwOp::add: return add(a, s);
        case EwOp::sub: return sub(a, s);
        case EwOp::mul: return mul(a, s);
        case EwOp::div: return div(a, s);
    }
    throw std::invalid_argument("elementwise: bad op kind");
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (va.rank() != 2 || vb.rank() != 2 || va.cols() != vb.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + va.shape_str() + " and " +
                                    vb.shape_str());
    Node n;
    n.op = OpKind::matmul;
    n.a = a;
    n.b = b;
    n.value = Tensor({va.rows(), vb.cols()});
    mm_nn(va.data.data(), vb.data.data(), n.value.data.data(), va.rows(), va.cols(), vb.cols());
    n.grad = Tensor(n.value.shape);
    return push(std::move(n));
}

NodeId Tape::reduce_mean(NodeId a) {
    const Tensor& va = nodes_[a].value;
    if (va.numel() == 0) throw std::invalid_argument("reduce_mean: empty tensor");
    double acc = 0.0;
    for (double v : va.data) acc += v;
    Node n;
    n.op = OpKind::reduce_mean;
    n.a = a;
    n.value = Tensor::scalar(acc / static_cast<double>(va.numel()));
    n.grad = Tensor({1});
    return push(std::move(n));
}

NodeId Tape::select_row(NodeId a, std::size_t row) {
    const Tensor& va = nodes_[a].value;
    if (va.rank() != 2 || row >= va.rows())
        throw std::invalid_argument("select_row: row " + std::to_string(row) +
                                    " out of range for " + va.shape_str());
    const std::size_t c = va.cols();
    Node n;
    n.op = OpKind::select_row;
    n.a = a;
    n.aux = row;
    n.value = Tensor({1, c});
    for (std::size_t j = 0; j < c; ++j) n.value.data[j] = va.data[row * c + j];
    n.grad = Tensor({1, c});
    return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
    const Tensor& va = nodes_[a].value;
    const Tensor& vb = nodes_[b].value;
    if (va.rank() != 2 || vb.rank() != 2 || va.rows() != vb.rows())
        throw std::invalid_argument("concat_cols: incompatible shapes " + va.shape_str() +
                                    " and " + vb.shape_str());
    const std::size_t r = va.rows(), ca = va.cols(), cb = vb.cols();
    Node n;
    n.op = OpKind::concat_cols;
    n.a = a;
    n.b = b;
    n.aux = ca;
    n.value = Tensor({r, ca + cb});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) n.value.data[i * (ca + cb) + j] = va.data[i * ca + j];
        for (std::size_t j = 0; j < cb; ++j)
            n.value.data[i * (ca + cb) + ca + j] = vb.data[i * cb + j];
    }
    n.grad = Tensor(n.value.shape);
    return push(std::move(n));
}

NodeId Tape::sqrt(NodeId a) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::sqrt_;
    n.a = a;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) {
        if (va.data[i] < 0.0) throw std::invalid_argument("sqrt: negative input");
        n.value.data[i] = std::sqrt(va.data[i]);
    }
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::tanh_;
    n.a = a;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i) n.value.data[i] = std::tanh(va.data[i]);
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

NodeId Tape::silu(NodeId a) {
    const Tensor& va = nodes_[a].value;
    Node n;
    n.op = OpKind::silu;
    n.a = a;
    n.value = Tensor(va.shape);
    for (std::size_t i = 0; i < va.numel(); ++i)
        n.value.data[i] = va.data[i] * sigmoid(va.data[i]);
    n.grad = Tensor(va.shape);
    return push(std::move(n));
}

void Tape::backward(NodeId loss) {
    if (loss >= nodes_.size()) throw std::invalid_argument("backward: bad node id");
    if (!nodes_[loss].value.is_scalar())
        throw std::invalid_argument("backward: loss must be scalar, got " +
                                    nodes_[loss].value.shape_str());
    nodes_[loss].grad.data[0] += 1.0;

    for (std::size_t idx = loss + 1; idx-- > 0;) {
        Node& n = nodes_[idx];
        const Tensor& g = n.grad;
        switch (n.op) {
            case OpKind::leaf:
                break;
            case OpKind::add: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    ga.data[i] += g.data[i];
                    gb.data[i] += g.data[i];
                }
                break;
            }
            case OpKind::sub: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    ga.data[i] += g.data[i];
                    gb.data[i] -= g.data[i];
                }
                break;
            }
            case OpKind::mul: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const Tensor& va = nodes_[n.a].value;
                const Tensor& vb = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    ga.data[i] += g.data[i] * vb.data[i];
                    gb.data[i] += g.data[i] * va.data[i];
                }
                break;
            }
            case OpKind::div_: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const Tensor& va = nodes_[n.a].value;
                const Tensor& vb = nodes_[n.b].value;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    ga.data[i] += g.data[i] / vb.data[i];
                    gb.data[i] -= g.data[i] * va.data[i] / (vb.data[i] * vb.data[i]);
                }
                break;
            }
            case OpKind::add_s:
            case OpKind::sub_s: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
                break;
            }
            case OpKind::rsub_s: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] -= g.data[i];
                break;
            }
            case OpKind::mul_s: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] * n.scalar;
                break;
            }
            case OpKind::div_s: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i] / n.scalar;
                break;
            }
            case OpKind::matmul: {
                // dL/dA = G * B^T, dL/dB = A^T * G
                const Tensor& va = nodes_[n.a].value;
                const Tensor& vb = nodes_[n.b].value;
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const std::size_t m = va.rows(), k = va.cols(), c = vb.cols();
                mm_nt(g.data.data(), vb.data.data(), ga.data.data(), m, c, k);
                mm_tn(va.data.data(), g.data.data(), gb.data.data(), m, k, c);
                break;
            }
            case OpKind::reduce_mean: {
                Tensor& ga = nodes_[n.a].grad;
                const double gv = g.data[0] / static_cast<double>(ga.numel());
                for (std::size_t i = 0; i < ga.numel(); ++i) ga.data[i] += gv;
                break;
            }
            case OpKind::select_row: {
                Tensor& ga = nodes_[n.a].grad;
                const std::size_t c = g.numel();
                for (std::size_t j = 0; j < c; ++j) ga.data[n.aux * c + j] += g.data[j];
                break;
            }
            case OpKind::concat_cols: {
                Tensor& ga = nodes_[n.a].grad;
                Tensor& gb = nodes_[n.b].grad;
                const std::size_t r = n.value.rows(), ca = n.aux, cb = n.value.cols() - n.aux;
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < ca; ++j)
                        ga.data[i * ca + j] += g.data[i * (ca + cb) + j];
                    for (std::size_t j = 0; j < cb; ++j)
                        gb.data[i * cb + j] += g.data[i * (ca + cb) + ca + j];
                }
                break;
            }
            case OpKind::sqrt_: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i)
                    ga.data[i] += g.data[i] / (2.0 * n.value.data[i]);
                break;
            }
            case OpKind::tanh_: {
                Tensor& ga = nodes_[n.a].grad;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    const double y = n.value.data[i];
                    ga.data[i] += g.data[i] * (1.0 - y * y);
                }
                break;
            }
            case OpKind::silu: {
                Tensor& ga = nodes_[n.a].grad;
                const Tensor& va = nodes_[n.a].value;
                for (std::size_t i = 0; i < g.numel(); ++i) {
                    const double s = sigmoid(va.data[i]);
                    ga.data[i] += g.data[i] * (s + va.data[i] * s * (1.0 - s));
                }
                break;
            }
        }
    }
}

void Tape::zero_grad() {
    for (Node& n : nodes_)
        std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
}

void Tape::clear() { nodes_.clear(); }

GradCheckReport grad_check(const ScalarFn& f, const std::vector<Tensor>& params,
                           double h, double rtol, double atol) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");

    const auto eval = [&](const std::vector<Tensor>& p) -> double {
        Tape tape;
        std::vector<NodeId> leaves;
        leaves.reserve(p.size());
        for (const Tensor& t : p) leaves.push_back(tape.leaf(t));
        const NodeId loss = f(tape, leaves);
        return tape.value(loss).item();
    };

    // Analytic pass.
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(params.size());
    for (const Tensor& t : params) leaves.push_back(tape.leaf(t));
    const NodeId loss = f(tape, leaves);
    if (!tape.value(loss).is_scalar())
        throw std::invalid_argument("grad_check: f must produce a scalar loss");
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (NodeId id : leaves) analytic.push_back(tape.grad(id));

    GradCheckReport report;
    std::vector<Tensor> work = params;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t ei = 0; ei < params[pi].numel(); ++ei) {
            const double orig = work[pi].data[ei];
            work[pi].data[ei] = orig + h;
            const double fp = eval(work);
            work[pi].data[ei] = orig - h;
            const double fm = eval(work);
            work[pi].data[ei] = orig;

            GradCheckEntry e;
            e.param = pi;
            e.elem = ei;
            e.analytic = analytic[pi].data[ei];
            e.numeric = (fp - fm) / (2.0 * h);
            e.abs_err = std::fabs(e.analytic - e.numeric);
            e.non_finite = !std::isfinite(e.analytic) || !std::isfinite(e.numeric);
            const bool pass =
                !e.non_finite &&
                e.abs_err <= atol + rtol * std::max(std::fabs(e.analytic), std::fabs(e.numeric));
            ++report.checked;
            if (!pass) {
                report.all_pass = false;
                report.failures.push_back(e);
            }
        }
    }
    return report;
}

}  // namespace odm
