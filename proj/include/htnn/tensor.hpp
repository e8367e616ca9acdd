#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace htnn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

inline Index shape_numel(const Shape& shape) {
    Index n = 1;
    for (Index d : shape) n *= d;
    return n;
}

/// Dense real-valued tensor, flat row-major storage (last index fastest).
/// An empty shape denotes a scalar with one element.
struct DenseTensor {
    Shape shape;
    std::vector<double> data;

    DenseTensor() : data(1, 0.0) {}

    explicit DenseTensor(Shape s) : shape(std::move(s)) {
        validate_shape();
        data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    }

    DenseTensor(Shape s, std::vector<double> values)
        : shape(std::move(s)), data(std::move(values)) {
        validate_shape();
        if (static_cast<Index>(data.size()) != shape_numel(shape))
            throw std::invalid_argument("DenseTensor: data length " +
                                        std::to_string(data.size()) +
                                        " does not match shape product " +
                                        std::to_string(shape_numel(shape)));
    }

    Index numel() const { return static_cast<Index>(data.size()); }
    int order() const { return static_cast<int>(shape.size()); }

    double& operator[](Index flat) { return data[static_cast<std::size_t>(flat)]; }
    double operator[](Index flat) const { return data[static_cast<std::size_t>(flat)]; }

    /// Flat offset of a multi-index (row-major).
    Index offset(const std::vector<Index>& idx) const {
        Index off = 0;
        for (std::size_t a = 0; a < shape.size(); ++a) off = off * shape[a] + idx[a];
        return off;
    }

private:
    void validate_shape() const {
        for (Index d : shape)
            if (d < 1) throw std::invalid_argument("DenseTensor: dimension sizes must be >= 1");
    }
};

/// Owning row-major 2-D matrix. rows * cols == data length.
struct Matrix {
    Index rows = 0;
    Index cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(Index r, Index c) : rows(r), cols(c) {
        if (r < 1 || c < 1) throw std::invalid_argument("Matrix: dimensions must be >= 1");
        data.assign(static_cast<std::size_t>(r * c), 0.0);
    }
    Matrix(Index r, Index c, std::vector<double> values)
        : rows(r), cols(c), data(std::move(values)) {
        if (r < 1 || c < 1) throw std::invalid_argument("Matrix: dimensions must be >= 1");
        if (static_cast<Index>(data.size()) != r * c)
            throw std::invalid_argument("Matrix: data length does not match rows*cols");
    }

    double& at(Index r, Index c) { return data[static_cast<std::size_t>(r * cols + c)]; }
    double at(Index r, Index c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
};

/// Reshape a flat vector into a tensor, zero-padding the row-major tail.
inline DenseTensor tensorize(const std::vector<double>& v, const Shape& shape) {
    const Index n = shape_numel(shape);
    for (Index d : shape)
        if (d < 1) throw std::invalid_argument("tensorize: dimension sizes must be >= 1");
    if (static_cast<Index>(v.size()) > n)
        throw std::invalid_argument("tensorize: input length " + std::to_string(v.size()) +
                                    " exceeds shape capacity " + std::to_string(n));
    DenseTensor t(shape);
    std::copy(v.begin(), v.end(), t.data.begin());
    return t;
}

/// Permute tensor axes; order[k] names the input axis that becomes output axis k.
inline DenseTensor permute(const DenseTensor& t, const std::vector<int>& order) {
    const int d = t.order();
    if (static_cast<int>(order.size()) != d)
        throw std::invalid_argument("permute: order length must equal tensor order");
    std::vector<bool> seen(static_cast<std::size_t>(d), false);
    Shape out_shape(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (order[k] < 0 || order[k] >= d || seen[static_cast<std::size_t>(order[k])])
            throw std::invalid_argument("permute: order must be a permutation of the axes");
        seen[static_cast<std::size_t>(order[k])] = true;
        out_shape[k] = t.shape[static_cast<std::size_t>(order[k])];
    }
    DenseTensor out(out_shape);
    if (d == 0) {
        out.data = t.data;
        return out;
    }
    // in_strides[a]: stride of input axis a; walk output row-major.
    std::vector<Index> in_strides(static_cast<std::size_t>(d), 1);
    for (int a = d - 2; a >= 0; --a)
        in_strides[static_cast<std::size_t>(a)] =
            in_strides[static_cast<std::size_t>(a + 1)] * t.shape[static_cast<std::size_t>(a + 1)];
    std::vector<Index> step(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        step[k] = in_strides[static_cast<std::size_t>(order[k])];
    std::vector<Index> idx(order.size(), 0);
    Index src = 0;
    for (Index flat = 0; flat < out.numel(); ++flat) {
        out.data[static_cast<std::size_t>(flat)] = t.data[static_cast<std::size_t>(src)];
        for (int k = d - 1; k >= 0; --k) {
            idx[static_cast<std::size_t>(k)]++;
            src += step[static_cast<std::size_t>(k)];
            if (idx[static_cast<std::size_t>(k)] < out_shape[static_cast<std::size_t>(k)]) break;
            src -= step[static_cast<std::size_t>(k)] * out_shape[static_cast<std::size_t>(k)];
            idx[static_cast<std::size_t>(k)] = 0;
        }
    }
    return out;
}

/// Flatten into a matrix whose rows run over row_axes (in the given order) and
/// whose columns run over the remaining axes in their original order.
inline Matrix matricize(const DenseTensor& t, const std::vector<int>& row_axes) {
    const int d = t.order();
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    for (int a : row_axes) {
        if (a < 0 || a >= d) throw std::invalid_argument("matricize: axis index out of range");
        if (used[static_cast<std::size_t>(a)])
            throw std::invalid_argument("matricize: repeated axis index");
        used[static_cast<std::size_t>(a)] = true;
    }
    std::vector<int> order(row_axes);
    for (int a = 0; a < d; ++a)
        if (!used[static_cast<std::size_t>(a)]) order.push_back(a);
    DenseTensor p = permute(t, order);
    Index r = 1;
    for (int a : row_axes) r *= t.shape[static_cast<std::size_t>(a)];
    Index c = p.numel() / r;
    return Matrix(r, c, std::move(p.data));
}

/// Inverse of matricize: rebuild the tensor of `shape` from a matrix produced
/// with the same row_axes.
inline DenseTensor dematricize(const Matrix& m, const Shape& shape,
                               const std::vector<int>& row_axes) {
    const int d = static_cast<int>(shape.size());
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    std::vector<int> order(row_axes);
    for (int a : row_axes) used[static_cast<std::size_t>(a)] = true;
    for (int a = 0; a < d; ++a)
        if (!used[static_cast<std::size_t>(a)]) order.push_back(a);
    Shape perm_shape(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        perm_shape[k] = shape[static_cast<std::size_t>(order[k])];
    if (shape_numel(perm_shape) != static_cast<Index>(m.data.size()))
        throw std::invalid_argument("dematricize: matrix size does not match shape");
    DenseTensor p(perm_shape, m.data);
    std::vector<int> inverse(order.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        inverse[static_cast<std::size_t>(order[k])] = static_cast<int>(k);
    return permute(p, inverse);
}

/// Plain matrix product with a fixed left-to-right accumulation over the inner
/// index, so results are bit-reproducible.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw std::invalid_argument("matmul: inner dimensions " + std::to_string(a.cols) +
                                    " and " + std::to_string(b.rows) + " do not match");
    Matrix c(a.rows, b.cols);
    for (Index i = 0; i < a.rows; ++i) {
        double* ci = c.data.data() + i * c.cols;
        for (Index k = 0; k < a.cols; ++k) {
            const double aik = a.data[static_cast<std::size_t>(i * a.cols + k)];
            const double* bk = b.data.data() + k * b.cols;
            for (Index j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// General tensor contraction: pair axes_a[k] of `a` with axes_b[k] of `b` and
/// sum over them. Output axes are a's free axes followed by b's free axes.
inline DenseTensor contract(const DenseTensor& a, const DenseTensor& b,
                            const std::vector<int>& axes_a, const std::vector<int>& axes_b) {
    if (axes_a.size() != axes_b.size())
        throw std::invalid_argument("contract: axis lists must have equal length");
    auto check = [](const DenseTensor& t, const std::vector<int>& axes, const char* side) {
        std::vector<bool> seen(t.shape.size(), false);
        for (int ax : axes) {
            if (ax < 0 || ax >= t.order())
                throw std::invalid_argument(std::string("contract: axis out of range for ") + side);
            if (seen[static_cast<std::size_t>(ax)])
                throw std::invalid_argument(std::string("contract: repeated axis for ") + side);
            seen[static_cast<std::size_t>(ax)] = true;
        }
    };
    check(a, axes_a, "A");
    check(b, axes_b, "B");
    for (std::size_t k = 0; k < axes_a.size(); ++k)
        if (a.shape[static_cast<std::size_t>(axes_a[k])] !=
            b.shape[static_cast<std::size_t>(axes_b[k])])
            throw std::invalid_argument("contract: paired axes " + std::to_string(axes_a[k]) +
                                        " and " + std::to_string(axes_b[k]) +
                                        " have different sizes");

    // Realize as (a free x matched) * (matched x b free); the inner index runs
    // row-major over axes_a order so the accumulation order is fixed.
    std::vector<int> a_free, b_free;
    {
        std::vector<bool> used(a.shape.size(), false);
        for (int ax : axes_a) used[static_cast<std::size_t>(ax)] = true;
        for (int ax = 0; ax < a.order(); ++ax)
            if (!used[static_cast<std::size_t>(ax)]) a_free.push_back(ax);
    }
    {
        std::vector<bool> used(b.shape.size(), false);
        for (int ax : axes_b) used[static_cast<std::size_t>(ax)] = true;
        for (int ax = 0; ax < b.order(); ++ax)
            if (!used[static_cast<std::size_t>(ax)]) b_free.push_back(ax);
    }
    std::vector<int> a_order(a_free);
    a_order.insert(a_order.end(), axes_a.begin(), axes_a.end());
    DenseTensor pa = permute(a, a_order);                   // free then matched
    Index free_a = 1, matched = 1;
    for (int ax : a_free) free_a *= a.shape[static_cast<std::size_t>(ax)];
    for (int ax : axes_a) matched *= a.shape[static_cast<std::size_t>(ax)];
    Matrix ma(free_a, matched, std::move(pa.data));
    Matrix mb = matricize(b, axes_b);                       // matched x free
    Matrix mc = matmul(ma, mb);

    Shape out_shape;
    for (int ax : a_free) out_shape.push_back(a.shape[static_cast<std::size_t>(ax)]);
    for (int ax : b_free) out_shape.push_back(b.shape[static_cast<std::size_t>(ax)]);
    return DenseTensor(out_shape, std::move(mc.data));
}

}  // namespace htnn
