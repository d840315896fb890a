#include "diffmn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace diffmn {

Tensor::Tensor(std::vector<int> s, double fill) : shape(std::move(s)) {
    size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor dimension must be positive, got " + std::to_string(d));
        n *= static_cast<size_t>(d);
    }
    data.assign(n, fill);
}

Tensor::Tensor(int r, int c, std::vector<double> d) : shape{r, c}, data(std::move(d)) {
    if (static_cast<size_t>(r) * c != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match " +
                         std::to_string(r) + "x" + std::to_string(c));
}

Tensor Tensor::row(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor(1, n, std::move(v));
}

Tensor Tensor::scalar(double v) { return Tensor(1, 1, {v}); }

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

NodeId Tape::push(Op op, int r, int c, NodeId a, NodeId b) {
    Node n;
    n.op = op;
    n.r = r;
    n.c = c;
    n.a = a;
    n.b = b;
    n.val = values_.size();
    values_.resize(values_.size() + static_cast<size_t>(r) * c, 0.0);
    nodes_.push_back(n);
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(std::span<const double> data, int r, int c) {
    if (data.size() != static_cast<size_t>(r) * c)
        throw ShapeError("leaf data length " + std::to_string(data.size()) + " does not match " +
                         std::to_string(r) + "x" + std::to_string(c));
    NodeId id = push(Op::Leaf, r, c, -1, -1);
    std::copy(data.begin(), data.end(), val_ptr(id));
    return id;
}

NodeId Tape::leaf(const Tensor& t) { return leaf(t.data, t.rows(), t.cols()); }

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.c != nb.r)
        throw ShapeError("matmul: inner dimensions disagree, " + std::to_string(na.c) + " vs " +
                         std::to_string(nb.r));
    const int m = na.r, k = na.c, n = nb.c;
    NodeId id = push(Op::MatMul, m, n, a, b);
    const double* A = val_ptr(a);
    const double* B = val_ptr(b);
    double* C = val_ptr(id);
    for (int i = 0; i < m; ++i) {
        const double* Ai = A + static_cast<size_t>(i) * k;
        double* Ci = C + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = Ai[kk];
            const double* Bk = B + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) Ci[j] += aik * Bk[j];
        }
    }
    return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
    if (size(a) != size(b))
        throw ShapeError("add: sizes disagree, " + std::to_string(size(a)) + " vs " + std::to_string(size(b)));
    NodeId id = push(Op::Add, rows(a), cols(a), a, b);
    const double* A = val_ptr(a);
    const double* B = val_ptr(b);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] + B[i];
    return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
    if (size(a) != size(b))
        throw ShapeError("sub: sizes disagree, " + std::to_string(size(a)) + " vs " + std::to_string(size(b)));
    NodeId id = push(Op::Sub, rows(a), cols(a), a, b);
    const double* A = val_ptr(a);
    const double* B = val_ptr(b);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] - B[i];
    return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
    if (size(a) != size(b))
        throw ShapeError("mul: sizes disagree, " + std::to_string(size(a)) + " vs " + std::to_string(size(b)));
    NodeId id = push(Op::Mul, rows(a), cols(a), a, b);
    const double* A = val_ptr(a);
    const double* B = val_ptr(b);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] * B[i];
    return id;
}

NodeId Tape::add_bias(NodeId a, NodeId bias) {
    if (cols(a) != size(bias))
        throw ShapeError("add_bias: row width " + std::to_string(cols(a)) + " vs bias length " +
                         std::to_string(size(bias)));
    NodeId id = push(Op::AddBias, rows(a), cols(a), a, bias);
    const double* A = val_ptr(a);
    const double* B = val_ptr(bias);
    double* C = val_ptr(id);
    const int n = cols(a);
    for (int i = 0; i < rows(a); ++i)
        for (int j = 0; j < n; ++j) C[i * n + j] = A[i * n + j] + B[j];
    return id;
}

NodeId Tape::scale(NodeId a, double c) {
    NodeId id = push(Op::ScaleConst, rows(a), cols(a), a, -1);
    nodes_[id].caux = c;
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] * c;
    return id;
}

NodeId Tape::add_const(NodeId a, double c) {
    NodeId id = push(Op::AddConst, rows(a), cols(a), a, -1);
    nodes_[id].caux = c;
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] + c;
    return id;
}

NodeId Tape::mul_const(NodeId a, std::span<const double> constant) {
    if (constant.size() != static_cast<size_t>(size(a)))
        throw ShapeError("mul_const: sizes disagree, " + std::to_string(size(a)) + " vs " +
                         std::to_string(constant.size()));
    NodeId id = push(Op::MulConst, rows(a), cols(a), a, -1);
    nodes_[id].aux = aux_.size();
    aux_.insert(aux_.end(), constant.begin(), constant.end());
    const double* A = val_ptr(a);
    const double* K = aux_.data() + nodes_[id].aux;
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] * K[i];
    return id;
}

NodeId Tape::mul_scalar(NodeId a, NodeId scalar_node) {
    if (size(scalar_node) != 1)
        throw ShapeError("mul_scalar: scaling node must be scalar, has size " +
                         std::to_string(size(scalar_node)));
    NodeId id = push(Op::MulScalar, rows(a), cols(a), a, scalar_node);
    const double* A = val_ptr(a);
    const double s = *val_ptr(scalar_node);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] * s;
    return id;
}

NodeId Tape::tanh_(NodeId a) {
    NodeId id = push(Op::Tanh, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = std::tanh(A[i]);
    return id;
}

NodeId Tape::relu_(NodeId a) {
    NodeId id = push(Op::Relu, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = A[i] > 0.0 ? A[i] : 0.0;
    return id;
}

NodeId Tape::sigmoid_(NodeId a) {
    NodeId id = push(Op::Sigmoid, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = 1.0 / (1.0 + std::exp(-A[i]));
    return id;
}

NodeId Tape::softmax_row(NodeId a) {
    NodeId id = push(Op::SoftmaxRow, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    const int n = cols(a);
    for (int i = 0; i < rows(a); ++i) {
        const double* x = A + static_cast<size_t>(i) * n;
        double* y = C + static_cast<size_t>(i) * n;
        double mx = x[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        for (int j = 0; j < n; ++j) y[j] /= sum;
    }
    return id;
}

NodeId Tape::exp_(NodeId a) {
    NodeId id = push(Op::Exp, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = std::exp(A[i]);
    return id;
}

NodeId Tape::log_(NodeId a) {
    NodeId id = push(Op::Log, rows(a), cols(a), a, -1);
    const double* A = val_ptr(a);
    double* C = val_ptr(id);
    for (int i = 0; i < size(id); ++i) C[i] = std::log(A[i]);
    return id;
}

NodeId Tape::concat(NodeId a, NodeId b) {
    const int n = size(a) + size(b);
    NodeId id = push(Op::Concat, 1, n, a, b);
    double* C = val_ptr(id);
    std::memcpy(C, val_ptr(a), sizeof(double) * size(a));
    std::memcpy(C + size(a), val_ptr(b), sizeof(double) * size(b));
    return id;
}

NodeId Tape::slice(NodeId a, int offset, int len) {
    if (offset < 0 || len <= 0 || offset + len > size(a))
        throw ShapeError("slice: range [" + std::to_string(offset) + ", " + std::to_string(offset + len) +
                         ") out of node size " + std::to_string(size(a)));
    NodeId id = push(Op::Slice, 1, len, a, -1);
    nodes_[id].aux0 = offset;
    std::memcpy(val_ptr(id), val_ptr(a) + offset, sizeof(double) * len);
    return id;
}

NodeId Tape::reduce_sum(NodeId a) {
    NodeId id = push(Op::ReduceSum, 1, 1, a, -1);
    const double* A = val_ptr(a);
    double s = 0.0;
    for (int i = 0; i < size(a); ++i) s += A[i];
    *val_ptr(id) = s;
    return id;
}

NodeId Tape::reshape(NodeId a, int r, int c) {
    if (r * c != size(a))
        throw ShapeError("reshape: " + std::to_string(r) + "x" + std::to_string(c) +
                         " does not match size " + std::to_string(size(a)));
    NodeId id = push(Op::Reshape, r, c, a, -1);
    std::memcpy(val_ptr(id), val_ptr(a), sizeof(double) * size(a));
    return id;
}

std::span<const double> Tape::value(NodeId id) const {
    return {values_.data() + nodes_[id].val, static_cast<size_t>(size(id))};
}

std::span<const double> Tape::grad(NodeId id) const {
    return {grads_.data() + nodes_[id].val, static_cast<size_t>(size(id))};
}

Tensor Tape::value_tensor(NodeId id) const {
    auto v = value(id);
    return Tensor(rows(id), cols(id), std::vector<double>(v.begin(), v.end()));
}

Tensor Tape::grad_tensor(NodeId id) const {
    auto g = grad(id);
    return Tensor(rows(id), cols(id), std::vector<double>(g.begin(), g.end()));
}

void Tape::reset() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    aux_.clear();
}

void Tape::backward(NodeId loss) {
    if (loss < 0 || loss >= static_cast<NodeId>(nodes_.size()))
        throw ContractError("backward: unknown loss node");
    if (size(loss) != 1)
        throw ContractError("backward: loss node must be scalar, has size " + std::to_string(size(loss)));

    grads_.assign(values_.size(), 0.0);
    grad_ptr(loss)[0] = 1.0;

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[id];
        const double* g = grads_.data() + n.val;
        const int sz = n.r * n.c;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                const Node& na = nodes_[n.a];
                const Node& nb = nodes_[n.b];
                const int m = na.r, k = na.c, nn = nb.c;
                const double* A = val_ptr(n.a);
                const double* B = val_ptr(n.b);
                double* gA = grad_ptr(n.a);
                double* gB = grad_ptr(n.b);
                // gA += g * B^T ; gB += A^T * g
                for (int i = 0; i < m; ++i) {
                    const double* gi = g + static_cast<size_t>(i) * nn;
                    double* gAi = gA + static_cast<size_t>(i) * k;
                    const double* Ai = A + static_cast<size_t>(i) * k;
                    for (int kk = 0; kk < k; ++kk) {
                        const double* Bk = B + static_cast<size_t>(kk) * nn;
                        double acc = 0.0;
                        for (int j = 0; j < nn; ++j) acc += gi[j] * Bk[j];
                        gAi[kk] += acc;
                        const double aik = Ai[kk];
                        double* gBk = gB + static_cast<size_t>(kk) * nn;
                        for (int j = 0; j < nn; ++j) gBk[j] += aik * gi[j];
                    }
                }
                break;
            }
            case Op::Add: {
                double* ga = grad_ptr(n.a);
                double* gb = grad_ptr(n.b);
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i];
                    gb[i] += g[i];
                }
                break;
            }
            case Op::Sub: {
                double* ga = grad_ptr(n.a);
                double* gb = grad_ptr(n.b);
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i];
                    gb[i] -= g[i];
                }
                break;
            }
            case Op::Mul: {
                const double* A = val_ptr(n.a);
                const double* B = val_ptr(n.b);
                double* ga = grad_ptr(n.a);
                double* gb = grad_ptr(n.b);
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i] * B[i];
                    gb[i] += g[i] * A[i];
                }
                break;
            }
            case Op::AddBias: {
                double* ga = grad_ptr(n.a);
                double* gb = grad_ptr(n.b);
                for (int i = 0; i < n.r; ++i)
                    for (int j = 0; j < n.c; ++j) {
                        ga[i * n.c + j] += g[i * n.c + j];
                        gb[j] += g[i * n.c + j];
                    }
                break;
            }
            case Op::ScaleConst: {
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * n.caux;
                break;
            }
            case Op::AddConst: {
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i];
                break;
            }
            case Op::MulConst: {
                const double* K = aux_.data() + n.aux;
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * K[i];
                break;
            }
            case Op::MulScalar: {
                const double* A = val_ptr(n.a);
                const double s = *val_ptr(n.b);
                double* ga = grad_ptr(n.a);
                double* gs = grad_ptr(n.b);
                double acc = 0.0;
                for (int i = 0; i < sz; ++i) {
                    ga[i] += g[i] * s;
                    acc += g[i] * A[i];
                }
                gs[0] += acc;
                break;
            }
            case Op::Tanh: {
                const double* Y = val_ptr(id);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * (1.0 - Y[i] * Y[i]);
                break;
            }
            case Op::Relu: {
                const double* A = val_ptr(n.a);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += A[i] > 0.0 ? g[i] : 0.0;
                break;
            }
            case Op::Sigmoid: {
                const double* Y = val_ptr(id);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * Y[i] * (1.0 - Y[i]);
                break;
            }
            case Op::SoftmaxRow: {
                const double* Y = val_ptr(id);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < n.r; ++i) {
                    const double* yi = Y + static_cast<size_t>(i) * n.c;
                    const double* gi = g + static_cast<size_t>(i) * n.c;
                    double dot = 0.0;
                    for (int j = 0; j < n.c; ++j) dot += gi[j] * yi[j];
                    for (int j = 0; j < n.c; ++j) ga[i * n.c + j] += yi[j] * (gi[j] - dot);
                }
                break;
            }
            case Op::Exp: {
                const double* Y = val_ptr(id);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] * Y[i];
                break;
            }
            case Op::Log: {
                const double* A = val_ptr(n.a);
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i] / A[i];
                break;
            }
            case Op::Concat: {
                double* ga = grad_ptr(n.a);
                double* gb = grad_ptr(n.b);
                const int na = size(n.a);
                for (int i = 0; i < na; ++i) ga[i] += g[i];
                for (int i = 0; i < sz - na; ++i) gb[i] += g[na + i];
                break;
            }
            case Op::Slice: {
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[n.aux0 + i] += g[i];
                break;
            }
            case Op::ReduceSum: {
                double* ga = grad_ptr(n.a);
                const double g0 = g[0];
                for (int i = 0; i < size(n.a); ++i) ga[i] += g0;
                break;
            }
            case Op::Reshape: {
                double* ga = grad_ptr(n.a);
                for (int i = 0; i < sz; ++i) ga[i] += g[i];
                break;
            }
        }
    }
}

uint64_t fnv1a(const void* bytes, size_t n, uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t checksum(const Tensor& t, uint64_t h) {
    h = fnv1a(t.shape.data(), t.shape.size() * sizeof(int), h);
    return fnv1a(t.data.data(), t.data.size() * sizeof(double), h);
}

}  // namespace diffmn
