#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "ctrkit/errors.hpp"

namespace ctrkit {

using Shape = std::vector<std::size_t>;

// Dense row-major array of doubles. Rank 1 or 2 in practice.
struct Array {
    Shape shape;
    std::vector<double> data;

    Array() = default;
    explicit Array(Shape s, double fill = 0.0);

    static Array scalar(double v);
    static Array row(std::vector<double> v);                               // [1 x n]
    static Array col(std::vector<double> v);                               // [n x 1]
    static Array matrix(std::size_t r, std::size_t c, std::vector<double> v);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }
    bool all_finite() const;
};

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

}  // namespace ctrkit
