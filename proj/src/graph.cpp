#include "ctrkit/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace ctrkit {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const EMat>;
using MapM = Eigen::Map<EMat>;

MapC emap(const Array& a) {
    return MapC(a.data.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

MapM emap(Array& a) {
    return MapM(a.data.data(), static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
}

void axpy(Array& dst, const Array& src) {
    const std::size_t n = dst.size();
    for (std::size_t i = 0; i < n; ++i) dst.data[i] += src.data[i];
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

int ParamStore::add(std::string name, Array value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    const int id = static_cast<int>(arrays_.size());
    index_.emplace(name, id);
    names_.push_back(std::move(name));
    arrays_.push_back(std::move(value));
    return id;
}

int ParamStore::id(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

Array& ParamStore::array(const std::string& name) {
    const int i = id(name);
    if (i < 0) throw ConfigError("unknown parameter: " + name);
    return arrays_[static_cast<std::size_t>(i)];
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& a : arrays_) n += a.size();
    return n;
}

GradStore::GradStore(const ParamStore& ps) {
    arrays_.reserve(static_cast<std::size_t>(ps.count()));
    for (int i = 0; i < ps.count(); ++i) arrays_.emplace_back(ps.array(i).shape, 0.0);
}

void GradStore::zero() {
    for (auto& a : arrays_) std::fill(a.data.begin(), a.data.end(), 0.0);
}

void GradStore::add(const GradStore& other) {
    for (std::size_t i = 0; i < arrays_.size(); ++i) axpy(arrays_[i], other.arrays_[i]);
}

Graph::Graph(const ParamStore* params, GradStore* grads) : params_(params), grads_(grads) {}

int Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Graph::Node& Graph::node(Var v) {
    if (!v.valid() || v.i >= static_cast<int>(nodes_.size())) throw DimensionError("invalid graph handle");
    return nodes_[static_cast<std::size_t>(v.i)];
}

const Graph::Node& Graph::node(Var v) const {
    if (!v.valid() || v.i >= static_cast<int>(nodes_.size())) throw DimensionError("invalid graph handle");
    return nodes_[static_cast<std::size_t>(v.i)];
}

const Array& Graph::value(Var v) const { return val_of(v.i); }

const Array& Graph::val_of(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    return n.ext_val != nullptr ? *n.ext_val : n.own_val;
}

const Array& Graph::grad(Var v) const {
    const Node& n = node(v);
    if (n.op == Op::Param && grads_ != nullptr) return grads_->array(n.param_id);
    return n.grad;
}

void Graph::check_same_or_scalar(const Array& a, const Array& b, const char* what) {
    if (a.same_shape(b)) return;
    if (a.size() == 1 || b.size() == 1) return;
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

Var Graph::input(Array v) {
    Node n;
    n.op = Op::Input;
    n.own_val = std::move(v);
    return {push(std::move(n))};
}

Var Graph::param(int id) {
    if (params_ == nullptr) throw ConfigError("graph has no bound ParamStore");
    if (id < 0 || id >= params_->count()) throw ConfigError("parameter id out of range");
    Node n;
    n.op = Op::Param;
    n.param_id = id;
    n.ext_val = &params_->array(id);
    return {push(std::move(n))};
}

Var Graph::embed_row(int table_id, std::uint32_t row) {
    if (params_ == nullptr) throw ConfigError("graph has no bound ParamStore");
    const Array& t = params_->array(table_id);
    if (t.rank() != 2) throw DimensionError("embed_row: table must be rank 2");
    if (row >= t.rows()) throw DimensionError("embed_row: index " + std::to_string(row) + " out of range for table with " + std::to_string(t.rows()) + " rows");
    Node n;
    n.op = Op::EmbedRow;
    n.param_id = table_id;
    n.i0 = row;
    n.own_val = Array({1, t.cols()});
    const std::size_t d = t.cols();
    for (std::size_t j = 0; j < d; ++j) n.own_val.data[j] = t.data[row * d + j];
    return {push(std::move(n))};
}

Var Graph::matmul(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    if (A.rank() != 2 || B.rank() != 2) throw DimensionError("matmul: operands must be rank 2");
    if (A.cols() != B.rows())
        throw DimensionError("matmul: inner dimensions disagree " + shape_str(A.shape) + " vs " + shape_str(B.shape));
    Node n;
    n.op = Op::MatMul;
    n.a = a.i;
    n.b = b.i;
    n.own_val = Array({A.rows(), B.cols()});
    emap(n.own_val).noalias() = emap(A) * emap(B);
    return {push(std::move(n))};
}

Var Graph::transpose(Var a) {
    const Array& A = value(a);
    if (A.rank() != 2) throw DimensionError("transpose: operand must be rank 2");
    Node n;
    n.op = Op::Transpose;
    n.a = a.i;
    n.own_val = Array({A.cols(), A.rows()});
    emap(n.own_val) = emap(A).transpose();
    return {push(std::move(n))};
}

Var Graph::add(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    check_same_or_scalar(A, B, "add");
    Node n;
    n.op = Op::Add;
    n.a = a.i;
    n.b = b.i;
    const Array& big = A.size() >= B.size() ? A : B;
    n.own_val = Array(big.shape);
    if (A.same_shape(B)) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] + B.data[i];
    } else if (B.size() == 1) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] + B.data[0];
    } else {
        for (std::size_t i = 0; i < B.size(); ++i) n.own_val.data[i] = A.data[0] + B.data[i];
    }
    return {push(std::move(n))};
}

Var Graph::sub(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    check_same_or_scalar(A, B, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a.i;
    n.b = b.i;
    const Array& big = A.size() >= B.size() ? A : B;
    n.own_val = Array(big.shape);
    if (A.same_shape(B)) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] - B.data[i];
    } else if (B.size() == 1) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] - B.data[0];
    } else {
        for (std::size_t i = 0; i < B.size(); ++i) n.own_val.data[i] = A.data[0] - B.data[i];
    }
    return {push(std::move(n))};
}

Var Graph::mul(Var a, Var b) {
    const Array& A = value(a);
    const Array& B = value(b);
    check_same_or_scalar(A, B, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a.i;
    n.b = b.i;
    const Array& big = A.size() >= B.size() ? A : B;
    n.own_val = Array(big.shape);
    if (A.same_shape(B)) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] * B.data[i];
    } else if (B.size() == 1) {
        for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] * B.data[0];
    } else {
        for (std::size_t i = 0; i < B.size(); ++i) n.own_val.data[i] = A.data[0] * B.data[i];
    }
    return {push(std::move(n))};
}

Var Graph::add_scalar(Var a, double c) {
    const Array& A = value(a);
    Node n;
    n.op = Op::AddScalar;
    n.a = a.i;
    n.s0 = c;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] + c;
    return {push(std::move(n))};
}

Var Graph::scale(Var a, double c) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Scale;
    n.a = a.i;
    n.s0 = c;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] * c;
    return {push(std::move(n))};
}

Var Graph::neg(Var a) { return scale(a, -1.0); }

Var Graph::sigmoid(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Sigmoid;
    n.a = a.i;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = stable_sigmoid(A.data[i]);
    return {push(std::move(n))};
}

Var Graph::swish(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Swish;
    n.a = a.i;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] * stable_sigmoid(A.data[i]);
    return {push(std::move(n))};
}

Var Graph::cos(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Cos;
    n.a = a.i;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = std::cos(A.data[i]);
    return {push(std::move(n))};
}

Var Graph::log(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Log;
    n.a = a.i;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) {
        if (A.data[i] <= 0.0) throw DomainError("log: non-positive operand " + std::to_string(A.data[i]));
        n.own_val.data[i] = std::log(A.data[i]);
    }
    return {push(std::move(n))};
}

Var Graph::relu(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Relu;
    n.a = a.i;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = A.data[i] > 0.0 ? A.data[i] : 0.0;
    return {push(std::move(n))};
}

Var Graph::clamp(Var a, double lo, double hi) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Clamp;
    n.a = a.i;
    n.s0 = lo;
    n.s1 = hi;
    n.own_val = Array(A.shape);
    for (std::size_t i = 0; i < A.size(); ++i) n.own_val.data[i] = std::min(hi, std::max(lo, A.data[i]));
    return {push(std::move(n))};
}

Var Graph::softmax_rows(Var a) {
    const Array& A = value(a);
    if (A.rank() != 2) throw DimensionError("softmax_rows: operand must be rank 2");
    Node n;
    n.op = Op::SoftmaxRows;
    n.a = a.i;
    n.own_val = Array(A.shape);
    const std::size_t r = A.rows(), c = A.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double mx = A.data[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, A.data[i * c + j]);
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double e = std::exp(A.data[i * c + j] - mx);
            n.own_val.data[i * c + j] = e;
            s += e;
        }
        for (std::size_t j = 0; j < c; ++j) n.own_val.data[i * c + j] /= s;
    }
    return {push(std::move(n))};
}

Var Graph::group_norm(Var a, std::size_t groups, double eps) {
    const Array& A = value(a);
    if (A.rank() != 2) throw DimensionError("group_norm: operand must be rank 2");
    if (groups == 0 || A.cols() % groups != 0)
        throw DimensionError("group_norm: width " + std::to_string(A.cols()) + " not divisible by " + std::to_string(groups) + " groups");
    Node n;
    n.op = Op::GroupNorm;
    n.a = a.i;
    n.i0 = groups;
    n.s0 = eps;
    n.own_val = Array(A.shape);
    const std::size_t r = A.rows(), c = A.cols(), w = c / groups;
    const double cnt = static_cast<double>(r * w);
    for (std::size_t g = 0; g < groups; ++g) {
        double mean = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = g * w; j < (g + 1) * w; ++j) mean += A.data[i * c + j];
        mean /= cnt;
        double var = 0.0;
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = g * w; j < (g + 1) * w; ++j) {
                const double d = A.data[i * c + j] - mean;
                var += d * d;
            }
        var /= cnt;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = g * w; j < (g + 1) * w; ++j)
                n.own_val.data[i * c + j] = (A.data[i * c + j] - mean) * inv;
    }
    return {push(std::move(n))};
}

Var Graph::sum(Var a) {
    const Array& A = value(a);
    Node n;
    n.op = Op::Sum;
    n.a = a.i;
    double s = 0.0;
    for (double v : A.data) s += v;
    n.own_val = Array::scalar(s);
    return {push(std::move(n))};
}

Var Graph::mean(Var a) {
    const Array& A = value(a);
    if (A.size() == 0) throw DimensionError("mean: empty operand");
    Node n;
    n.op = Op::Mean;
    n.a = a.i;
    double s = 0.0;
    for (double v : A.data) s += v;
    n.own_val = Array::scalar(s / static_cast<double>(A.size()));
    return {push(std::move(n))};
}

Var Graph::sum_axis(Var a, int axis) {
    const Array& A = value(a);
    if (A.rank() != 2) throw DimensionError("sum_axis: operand must be rank 2");
    if (axis != 0 && axis != 1) throw DimensionError("sum_axis: axis out of range");
    Node n;
    n.op = Op::SumAxis;
    n.a = a.i;
    n.i0 = static_cast<std::size_t>(axis);
    const std::size_t r = A.rows(), c = A.cols();
    n.own_val = axis == 0 ? Array({1, c}) : Array({r, 1});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            n.own_val.data[axis == 0 ? j : i] += A.data[i * c + j];
    return {push(std::move(n))};
}

Var Graph::mean_axis(Var a, int axis) {
    Var s = sum_axis(a, axis);
    const Array& A = value(a);
    const double cnt = static_cast<double>(axis == 0 ? A.rows() : A.cols());
    return scale(s, 1.0 / cnt);
}

Var Graph::concat(std::span<const Var> xs, int axis) {
    if (xs.empty()) throw DimensionError("concat: no operands");
    if (axis != 0 && axis != 1) throw DimensionError("concat: axis out of range");
    const Array& first = value(xs[0]);
    const bool vec = first.rank() == 1;
    if (vec && axis != 0) throw DimensionError("concat: rank-1 operands concatenate on axis 0");
    const std::size_t fixed = axis == 0 ? first.cols() : first.rows();
    std::size_t total = 0;
    for (const Var& v : xs) {
        const Array& X = value(v);
        const std::size_t fx = axis == 0 ? X.cols() : X.rows();
        if (fx != fixed) throw DimensionError("concat: incompatible shapes");
        total += axis == 0 ? X.rows() : X.cols();
    }
    Node n;
    n.op = axis == 0 ? Op::ConcatRows : Op::ConcatCols;
    n.a = xs[0].i;
    for (std::size_t i = 1; i < xs.size(); ++i) n.extra.push_back(xs[i].i);
    if (axis == 0) {
        n.own_val = vec ? Array({total}) : Array({total, fixed});
        std::size_t off = 0;
        for (const Var& v : xs) {
            const Array& X = value(v);
            std::copy(X.data.begin(), X.data.end(), n.own_val.data.begin() + static_cast<std::ptrdiff_t>(off));
            off += X.size();
        }
    } else {
        n.own_val = Array({fixed, total});
        std::size_t coff = 0;
        for (const Var& v : xs) {
            const Array& X = value(v);
            for (std::size_t i = 0; i < fixed; ++i)
                for (std::size_t j = 0; j < X.cols(); ++j)
                    n.own_val.data[i * total + coff + j] = X.data[i * X.cols() + j];
            coff += X.cols();
        }
    }
    return {push(std::move(n))};
}

Var Graph::slice(Var a, int axis, std::size_t lo, std::size_t hi) {
    const Array& A = value(a);
    if (axis != 0 && axis != 1) throw DimensionError("slice: axis out of range");
    const bool vec = A.rank() == 1;
    if (vec && axis != 0) throw DimensionError("slice: rank-1 operand slices on axis 0");
    const std::size_t extent = axis == 0 ? A.rows() : A.cols();
    if (lo >= hi || hi > extent)
        throw DimensionError("slice: range [" + std::to_string(lo) + "," + std::to_string(hi) + ") out of bounds for extent " + std::to_string(extent));
    Node n;
    n.op = axis == 0 ? Op::SliceRows : Op::SliceCols;
    n.a = a.i;
    n.i0 = lo;
    n.i1 = hi;
    const std::size_t r = A.rows(), c = A.cols();
    if (axis == 0) {
        n.own_val = vec ? Array({hi - lo}) : Array({hi - lo, c});
        std::copy(A.data.begin() + static_cast<std::ptrdiff_t>(lo * c),
                  A.data.begin() + static_cast<std::ptrdiff_t>(hi * c), n.own_val.data.begin());
    } else {
        n.own_val = Array({r, hi - lo});
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = lo; j < hi; ++j)
                n.own_val.data[i * (hi - lo) + (j - lo)] = A.data[i * c + j];
    }
    return {push(std::move(n))};
}

Var Graph::reshape(Var a, Shape s) {
    const Array& A = value(a);
    if (shape_size(s) != A.size())
        throw DimensionError("reshape: size mismatch " + shape_str(A.shape) + " -> " + shape_str(s));
    Node n;
    n.op = Op::Reshape;
    n.a = a.i;
    n.own_val.shape = std::move(s);
    n.own_val.data = A.data;
    return {push(std::move(n))};
}

Array* Graph::grad_target(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.op == Op::Param && grads_ != nullptr) return &grads_->array(n.param_id);
    ensure_grad(i);
    return &n.grad;
}

void Graph::ensure_grad(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad) {
        n.grad = Array(val_of(i).shape, 0.0);
        n.has_grad = true;
    }
}

void Graph::backward(Var root) {
    Node& r = node(root);
    if (val_of(root.i).size() != 1) throw DimensionError("backward: root must be a single value");
    if (r.op == Op::Param && grads_ != nullptr) throw ConfigError("backward: root cannot be a bound parameter");
    ensure_grad(root.i);
    r.grad.data[0] = 1.0;
    for (int i = root.i; i >= 0; --i) {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.has_grad && !(n.op == Op::Param && grads_ != nullptr)) continue;
        backprop(i);
    }
}

void Graph::backprop(int i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    const Array& G = n.grad;
    switch (n.op) {
        case Op::Input:
            break;
        case Op::Param:
            if (grads_ != nullptr) break;  // consumers accumulated into the store directly
            break;
        case Op::EmbedRow: {
            if (grads_ == nullptr) break;
            Array& T = grads_->array(n.param_id);
            const std::size_t d = T.cols();
            for (std::size_t j = 0; j < d; ++j) T.data[n.i0 * d + j] += G.data[j];
            break;
        }
        case Op::MatMul: {
            const Array& A = val_of(n.a);
            const Array& B = val_of(n.b);
            Array* dA = grad_target(n.a);
            Array* dB = grad_target(n.b);
            emap(*dA).noalias() += emap(G) * emap(B).transpose();
            emap(*dB).noalias() += emap(A).transpose() * emap(G);
            break;
        }
        case Op::Transpose: {
            Array* dA = grad_target(n.a);
            emap(*dA).noalias() += emap(G).transpose();
            break;
        }
        case Op::Add:
        case Op::Sub: {
            const double sgn = n.op == Op::Sub ? -1.0 : 1.0;
            const Array& A = val_of(n.a);
            const Array& B = val_of(n.b);
            Array* dA = grad_target(n.a);
            Array* dB = grad_target(n.b);
            if (A.same_shape(B)) {
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dA->data[k] += G.data[k];
                    dB->data[k] += sgn * G.data[k];
                }
            } else if (B.size() == 1) {
                double s = 0.0;
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dA->data[k] += G.data[k];
                    s += G.data[k];
                }
                dB->data[0] += sgn * s;
            } else {
                double s = 0.0;
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dB->data[k] += sgn * G.data[k];
                    s += G.data[k];
                }
                dA->data[0] += s;
            }
            break;
        }
        case Op::Mul: {
            const Array& A = val_of(n.a);
            const Array& B = val_of(n.b);
            Array* dA = grad_target(n.a);
            Array* dB = grad_target(n.b);
            if (A.same_shape(B)) {
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dA->data[k] += G.data[k] * B.data[k];
                    dB->data[k] += G.data[k] * A.data[k];
                }
            } else if (B.size() == 1) {
                double s = 0.0;
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dA->data[k] += G.data[k] * B.data[0];
                    s += G.data[k] * A.data[k];
                }
                dB->data[0] += s;
            } else {
                double s = 0.0;
                for (std::size_t k = 0; k < G.size(); ++k) {
                    dB->data[k] += G.data[k] * A.data[0];
                    s += G.data[k] * B.data[k];
                }
                dA->data[0] += s;
            }
            break;
        }
        case Op::AddScalar: {
            Array* dA = grad_target(n.a);
            axpy(*dA, G);
            break;
        }
        case Op::Scale: {
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k) dA->data[k] += n.s0 * G.data[k];
            break;
        }
        case Op::Sigmoid: {
            Array* dA = grad_target(n.a);
            const Array& Y = n.own_val;
            for (std::size_t k = 0; k < G.size(); ++k) dA->data[k] += G.data[k] * Y.data[k] * (1.0 - Y.data[k]);
            break;
        }
        case Op::Swish: {
            const Array& X = val_of(n.a);
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k) {
                const double s = stable_sigmoid(X.data[k]);
                dA->data[k] += G.data[k] * (s + X.data[k] * s * (1.0 - s));
            }
            break;
        }
        case Op::Cos: {
            const Array& X = val_of(n.a);
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k) dA->data[k] -= G.data[k] * std::sin(X.data[k]);
            break;
        }
        case Op::Log: {
            const Array& X = val_of(n.a);
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k) dA->data[k] += G.data[k] / X.data[k];
            break;
        }
        case Op::Relu: {
            const Array& X = val_of(n.a);
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k)
                if (X.data[k] > 0.0) dA->data[k] += G.data[k];
            break;
        }
        case Op::Clamp: {
            const Array& X = val_of(n.a);
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < G.size(); ++k)
                if (X.data[k] >= n.s0 && X.data[k] <= n.s1) dA->data[k] += G.data[k];
            break;
        }
        case Op::SoftmaxRows: {
            const Array& Y = n.own_val;
            Array* dA = grad_target(n.a);
            const std::size_t r = Y.rows(), c = Y.cols();
            for (std::size_t i2 = 0; i2 < r; ++i2) {
                double dot = 0.0;
                for (std::size_t j = 0; j < c; ++j) dot += G.data[i2 * c + j] * Y.data[i2 * c + j];
                for (std::size_t j = 0; j < c; ++j)
                    dA->data[i2 * c + j] += Y.data[i2 * c + j] * (G.data[i2 * c + j] - dot);
            }
            break;
        }
        case Op::GroupNorm: {
            const Array& X = val_of(n.a);
            const Array& Y = n.own_val;
            Array* dA = grad_target(n.a);
            const std::size_t r = X.rows(), c = X.cols(), groups = n.i0, w = c / n.i0;
            const double cnt = static_cast<double>(r * w);
            for (std::size_t g = 0; g < groups; ++g) {
                double mean = 0.0, var = 0.0, gm = 0.0, gym = 0.0;
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = g * w; j < (g + 1) * w; ++j) mean += X.data[i2 * c + j];
                mean /= cnt;
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = g * w; j < (g + 1) * w; ++j) {
                        const double d = X.data[i2 * c + j] - mean;
                        var += d * d;
                    }
                var /= cnt;
                const double inv = 1.0 / std::sqrt(var + n.s0);
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = g * w; j < (g + 1) * w; ++j) {
                        gm += G.data[i2 * c + j];
                        gym += G.data[i2 * c + j] * Y.data[i2 * c + j];
                    }
                gm /= cnt;
                gym /= cnt;
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = g * w; j < (g + 1) * w; ++j)
                        dA->data[i2 * c + j] += inv * (G.data[i2 * c + j] - gm - Y.data[i2 * c + j] * gym);
            }
            break;
        }
        case Op::Sum: {
            Array* dA = grad_target(n.a);
            for (std::size_t k = 0; k < dA->size(); ++k) dA->data[k] += G.data[0];
            break;
        }
        case Op::Mean: {
            Array* dA = grad_target(n.a);
            const double inv = 1.0 / static_cast<double>(dA->size());
            for (std::size_t k = 0; k < dA->size(); ++k) dA->data[k] += G.data[0] * inv;
            break;
        }
        case Op::SumAxis: {
            Array* dA = grad_target(n.a);
            const std::size_t r = dA->rows(), c = dA->cols();
            for (std::size_t i2 = 0; i2 < r; ++i2)
                for (std::size_t j = 0; j < c; ++j)
                    dA->data[i2 * c + j] += G.data[n.i0 == 0 ? j : i2];
            break;
        }
        case Op::ConcatRows: {
            std::size_t off = 0;
            Array* dA = grad_target(n.a);
            const std::size_t na = dA->size();
            for (std::size_t k = 0; k < na; ++k) dA->data[k] += G.data[k];
            off = na;
            for (int p : n.extra) {
                Array* dP = grad_target(p);
                for (std::size_t k = 0; k < dP->size(); ++k) dP->data[k] += G.data[off + k];
                off += dP->size();
            }
            break;
        }
        case Op::ConcatCols: {
            const std::size_t total = n.own_val.cols(), r = n.own_val.rows();
            std::size_t coff = 0;
            auto scatter = [&](int p) {
                Array* dP = grad_target(p);
                const std::size_t pc = dP->cols();
                for (std::size_t i2 = 0; i2 < r; ++i2)
                    for (std::size_t j = 0; j < pc; ++j)
                        dP->data[i2 * pc + j] += G.data[i2 * total + coff + j];
                coff += pc;
            };
            scatter(n.a);
            for (int p : n.extra) scatter(p);
            break;
        }
        case Op::SliceRows: {
            Array* dA = grad_target(n.a);
            const std::size_t c = dA->cols();
            for (std::size_t k = 0; k < G.size(); ++k) dA->data[n.i0 * c + k] += G.data[k];
            break;
        }
        case Op::SliceCols: {
            Array* dA = grad_target(n.a);
            const std::size_t c = dA->cols(), w = n.i1 - n.i0;
            const std::size_t r = dA->rows();
            for (std::size_t i2 = 0; i2 < r; ++i2)
                for (std::size_t j = 0; j < w; ++j)
                    dA->data[i2 * c + n.i0 + j] += G.data[i2 * w + j];
            break;
        }
        case Op::Reshape: {
            Array* dA = grad_target(n.a);
            axpy(*dA, G);
            break;
        }
    }
}

}  // namespace ctrkit
