#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctrkit/array.hpp"

namespace ctrkit {

// Named parameter arrays. Graphs reference entries by id without copying.
class ParamStore {
public:
    int add(std::string name, Array value);
    int id(const std::string& name) const;  // -1 if absent
    Array& array(int id) { return arrays_[static_cast<std::size_t>(id)]; }
    const Array& array(int id) const { return arrays_[static_cast<std::size_t>(id)]; }
    Array& array(const std::string& name);
    const std::string& name(int id) const { return names_[static_cast<std::size_t>(id)]; }
    int count() const { return static_cast<int>(arrays_.size()); }
    std::size_t total_size() const;

private:
    std::vector<Array> arrays_;
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
};

// Gradient accumulators shaped like a ParamStore. Zeroed explicitly; graphs
// add into them so contributions from successive samples sum.
class GradStore {
public:
    GradStore() = default;
    explicit GradStore(const ParamStore& ps);
    void zero();
    Array& array(int id) { return arrays_[static_cast<std::size_t>(id)]; }
    const Array& array(int id) const { return arrays_[static_cast<std::size_t>(id)]; }
    void add(const GradStore& other);  // this += other
    int count() const { return static_cast<int>(arrays_.size()); }

private:
    std::vector<Array> arrays_;
};

struct Var {
    int i = -1;
    bool valid() const { return i >= 0; }
};

// Define-by-run computation graph over Arrays with reverse-mode gradients.
// Values are computed eagerly; backward() walks nodes in reverse creation
// order, which is a topological order by construction. Single-threaded.
class Graph {
public:
    Graph() = default;
    Graph(const ParamStore* params, GradStore* grads);

    Var input(Array v);
    Var constant(double v) { return input(Array::scalar(v)); }
    Var param(int id);                                    // dense parameter leaf
    Var embed_row(int table_id, std::uint32_t row);       // [1 x d] table row, sparse grad

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_scalar(Var a, double c);
    Var scale(Var a, double c);
    Var neg(Var a);
    Var sigmoid(Var a);
    Var swish(Var a);
    Var cos(Var a);
    Var log(Var a);
    Var relu(Var a);
    Var clamp(Var a, double lo, double hi);
    Var softmax_rows(Var a);
    Var group_norm(Var a, std::size_t groups, double eps);
    Var sum(Var a);
    Var mean(Var a);
    Var sum_axis(Var a, int axis);
    Var mean_axis(Var a, int axis);
    Var concat(std::span<const Var> xs, int axis);
    Var slice(Var a, int axis, std::size_t lo, std::size_t hi);
    Var reshape(Var a, Shape s);

    // Propagates d(root)/d(node) into every reachable leaf. root must be a
    // single-element node. Repeated paths accumulate additively.
    void backward(Var root);

    const Array& value(Var v) const;
    // Gradient buffer of a node. For param() leaves bound to a GradStore this
    // is the shared accumulator; embed_row gradients live only in the store.
    const Array& grad(Var v) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    // neg/mean_axis lower to Scale/SumAxis+Scale and need no own kind
    enum class Op : std::uint8_t {
        Input, Param, EmbedRow,
        MatMul, Transpose,
        Add, Sub, Mul, AddScalar, Scale,
        Sigmoid, Swish, Cos, Log, Relu, Clamp,
        SoftmaxRows, GroupNorm,
        Sum, Mean, SumAxis,
        ConcatRows, ConcatCols, SliceRows, SliceCols, Reshape,
    };

    struct Node {
        Op op;
        int a = -1, b = -1;          // parents
        std::vector<int> extra;      // additional parents (concat)
        std::size_t i0 = 0, i1 = 0;  // axis / bounds / groups / row index
        double s0 = 0.0, s1 = 0.0;   // scalar operand / eps / clamp bounds
        int param_id = -1;
        const Array* ext_val = nullptr;  // set for Param leaves only
        Array own_val;
        Array grad;                  // lazily sized; unused for bound params
        bool has_grad = false;
    };

    int push(Node n);
    Node& node(Var v);
    const Node& node(Var v) const;
    const Array& val_of(int i) const;
    Array* grad_target(int i);       // where this node's gradient accumulates
    void ensure_grad(int i);
    void backprop(int i);

    static void check_same_or_scalar(const Array& a, const Array& b, const char* what);

    std::vector<Node> nodes_;
    const ParamStore* params_ = nullptr;
    GradStore* grads_ = nullptr;
};

}  // namespace ctrkit
