#include "ctrkit/array.hpp"

#include <sstream>

namespace ctrkit {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Array::Array(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Array Array::scalar(double v) {
    Array a(Shape{1, 1});
    a.data[0] = v;
    return a;
}

Array Array::row(std::vector<double> v) {
    Array a;
    a.shape = {1, v.size()};
    a.data = std::move(v);
    return a;
}

Array Array::col(std::vector<double> v) {
    Array a;
    a.shape = {v.size(), 1};
    a.data = std::move(v);
    return a;
}

Array Array::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    if (v.size() != r * c) throw DimensionError("matrix: data size does not match " + shape_str({r, c}));
    Array a;
    a.shape = {r, c};
    a.data = std::move(v);
    return a;
}

std::size_t Array::rows() const {
    if (shape.empty()) return 0;
    return shape[0];
}

std::size_t Array::cols() const {
    if (shape.size() < 2) return shape.empty() ? 0 : 1;
    return shape[1];
}

bool Array::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace ctrkit
