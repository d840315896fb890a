#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "diffmn/errors.hpp"

namespace diffmn {

// Dense row-major tensor of doubles. Everything in this pipeline is at most
// 2-D: vectors are [1, n] rows, matrices are [rows, cols].
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, double fill = 0.0);
    Tensor(int r, int c, std::vector<double> d);

    static Tensor row(std::vector<double> v);
    static Tensor scalar(double v);

    int size() const { return static_cast<int>(data.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }

    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }

    bool all_finite() const;
};

using NodeId = int;

// Reverse-mode autodiff tape. Nodes are recorded in creation order, which is
// a topological order; backward() walks it once in reverse. Values, gradients
// and constant payloads live in flat arenas that survive reset() so repeated
// forward/backward passes do not reallocate.
class Tape {
public:
    enum class Op : uint8_t {
        Leaf,
        MatMul,      // a [m,k] * b [k,n] -> [m,n]
        Add,         // elementwise, same size
        Sub,
        Mul,         // elementwise (Hadamard)
        AddBias,     // a [B,n] + b [1,n] broadcast over rows
        ScaleConst,  // a * caux
        AddConst,    // a + caux
        MulConst,    // a (*) constant array (no gradient to the constant)
        MulScalar,   // a (any shape) * b (scalar node)
        Tanh,
        Relu,
        Sigmoid,
        SoftmaxRow,  // softmax over each row
        Exp,
        Log,
        Concat,      // [1, na+nb] from two flat nodes
        Slice,       // flat range [aux0, aux0+len)
        ReduceSum,   // -> [1,1]
        Reshape,     // same data, new (r,c)
    };

    NodeId leaf(std::span<const double> data, int r, int c);
    NodeId leaf(const Tensor& t);
    NodeId scalar_leaf(double v) { return leaf(std::span<const double>(&v, 1), 1, 1); }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId add_bias(NodeId a, NodeId bias);
    NodeId scale(NodeId a, double c);
    NodeId add_const(NodeId a, double c);
    NodeId mul_const(NodeId a, std::span<const double> constant);
    NodeId mul_scalar(NodeId a, NodeId scalar_node);
    NodeId tanh_(NodeId a);
    NodeId relu_(NodeId a);
    NodeId sigmoid_(NodeId a);
    NodeId softmax_row(NodeId a);
    NodeId exp_(NodeId a);
    NodeId log_(NodeId a);
    NodeId concat(NodeId a, NodeId b);
    NodeId slice(NodeId a, int offset, int len);
    NodeId reduce_sum(NodeId a);
    NodeId reshape(NodeId a, int r, int c);

    // Runs reverse-mode accumulation from a scalar loss node. Gradients of all
    // nodes (leaves included) are available through grad() afterwards.
    void backward(NodeId loss);

    std::span<const double> value(NodeId id) const;
    std::span<const double> grad(NodeId id) const;
    Tensor value_tensor(NodeId id) const;
    Tensor grad_tensor(NodeId id) const;
    int rows(NodeId id) const { return nodes_[id].r; }
    int cols(NodeId id) const { return nodes_[id].c; }
    int size(NodeId id) const { return nodes_[id].r * nodes_[id].c; }
    size_t node_count() const { return nodes_.size(); }

    // Drops all nodes but keeps arena capacity.
    void reset();

private:
    struct Node {
        Op op;
        int r, c;
        NodeId a = -1, b = -1;
        size_t val = 0;   // offset into values_ / grads_
        int aux0 = 0;     // slice offset
        double caux = 0;  // scalar constant
        size_t aux = 0;   // offset into aux_ (MulConst payload)
    };

    NodeId push(Op op, int r, int c, NodeId a, NodeId b);
    double* val_ptr(NodeId id) { return values_.data() + nodes_[id].val; }
    const double* val_ptr(NodeId id) const { return values_.data() + nodes_[id].val; }
    double* grad_ptr(NodeId id) { return grads_.data() + nodes_[id].val; }

    std::vector<Node> nodes_;
    std::vector<double> values_;
    std::vector<double> grads_;
    std::vector<double> aux_;
};

uint64_t fnv1a(const void* bytes, size_t n, uint64_t h = 1469598103934665603ULL);
uint64_t checksum(const Tensor& t, uint64_t h = 1469598103934665603ULL);

}  // namespace diffmn
