#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vulndet/errors.hpp"

namespace vulndet {

// Dense row-major 2-D tensor, 64-bit throughout. Vectors are 1xN rows,
// scalars 1x1.
struct Tensor {
    std::vector<std::int64_t> shape; // {rows, cols}
    std::vector<double> data;

    Tensor() : shape{0, 0} {}
    Tensor(std::int64_t r, std::int64_t c)
        : shape{r, c}, data(std::size_t(r * c), 0.0) {}

    static Tensor zeros(std::int64_t r, std::int64_t c) { return Tensor(r, c); }

    static Tensor full(std::int64_t r, std::int64_t c, double v) {
        Tensor t(r, c);
        for (double& x : t.data) x = v;
        return t;
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data[0] = v;
        return t;
    }

    static Tensor row(std::vector<double> xs) {
        Tensor t;
        t.shape = {1, std::int64_t(xs.size())};
        t.data = std::move(xs);
        return t;
    }

    std::int64_t rows() const { return shape[0]; }
    std::int64_t cols() const { return shape[1]; }
    std::size_t numel() const { return data.size(); }

    double& at(std::int64_t r, std::int64_t c) {
        return data[std::size_t(r * cols() + c)];
    }
    double at(std::int64_t r, std::int64_t c) const {
        return data[std::size_t(r * cols() + c)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline std::string shape_str(const Tensor& t) {
    return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch(std::string(op) + ": " + shape_str(a) + " vs " +
                            shape_str(b));
}

} // namespace vulndet
