#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "htnn/tensor.hpp"

namespace htnn {

enum class TransformKind { TypeI, TypeII, TypeIII };

inline std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::TypeI: return "I";
        case TransformKind::TypeII: return "II";
        case TransformKind::TypeIII: return "III";
    }
    return "?";
}

/// One of the three matrix transformations between consecutive contraction
/// steps. Indices in this module are 1-based, mirroring the index maps:
///
///   Type-I    A x (B1*B2)            -> (A*B1) x B2
///             p = (a-1)*B1 + b1,                      q = b2
///   Type-II   (A1*A2*A3) x (B1*B2)   -> (A1*A3*B1) x (A2*B2)
///             p = (a1-1)*A3*B1 + (a3-1)*B1 + b1,      q = (a2-1)*B2 + b2
///   Type-III  (A1*A2*A3) x B         -> (A1*A3*B) x A2
///             p = (a1-1)*A3*B + (a3-1)*B + b,         q = a2
///
/// The published Type-II column map reads q = (a2-1)*b2, which collides for
/// a2 = 1; index_map_literal_type2 keeps that variant for the negative test.
/// The published Type-III row map uses an index "a" that is only consistent
/// as a1.
struct TransformSpec {
    TransformKind kind = TransformKind::TypeI;
    std::vector<Index> dims;  // TypeI: A,B1,B2; TypeII: A1,A2,A3,B1,B2; TypeIII: A1,A2,A3,B

    static TransformSpec type1(Index A, Index B1, Index B2) {
        return make(TransformKind::TypeI, {A, B1, B2});
    }
    static TransformSpec type2(Index A1, Index A2, Index A3, Index B1, Index B2) {
        return make(TransformKind::TypeII, {A1, A2, A3, B1, B2});
    }
    static TransformSpec type3(Index A1, Index A2, Index A3, Index B) {
        return make(TransformKind::TypeIII, {A1, A2, A3, B});
    }

    static TransformSpec make(TransformKind kind, std::vector<Index> dims) {
        TransformSpec s;
        s.kind = kind;
        s.dims = std::move(dims);
        s.validate();
        return s;
    }

    void validate() const {
        const std::size_t want = kind == TransformKind::TypeI   ? 3
                                 : kind == TransformKind::TypeII ? 5
                                                                 : 4;
        if (dims.size() != want)
            throw std::invalid_argument("TransformSpec: wrong dim count for type " +
                                        to_string(kind));
        for (Index v : dims)
            if (v < 1) throw std::invalid_argument("TransformSpec: dims must be >= 1");
    }

    Index in_rows() const {
        switch (kind) {
            case TransformKind::TypeI: return dims[0];
            case TransformKind::TypeII:
            case TransformKind::TypeIII: return dims[0] * dims[1] * dims[2];
        }
        return 0;
    }
    Index in_cols() const {
        switch (kind) {
            case TransformKind::TypeI: return dims[1] * dims[2];
            case TransformKind::TypeII: return dims[3] * dims[4];
            case TransformKind::TypeIII: return dims[3];
        }
        return 0;
    }
    Index out_rows() const {
        switch (kind) {
            case TransformKind::TypeI: return dims[0] * dims[1];
            case TransformKind::TypeII: return dims[0] * dims[2] * dims[3];
            case TransformKind::TypeIII: return dims[0] * dims[2] * dims[3];
        }
        return 0;
    }
    Index out_cols() const {
        switch (kind) {
            case TransformKind::TypeI: return dims[2];
            case TransformKind::TypeII: return dims[1] * dims[4];
            case TransformKind::TypeIII: return dims[1];
        }
        return 0;
    }
    Index total() const { return in_rows() * in_cols(); }
};

/// Source position (1-based row m, col n) and destination (p, q).
struct IndexPair {
    Index m, n, p, q;
};

namespace detail {

template <typename Fn>
inline void for_each_type1(const TransformSpec& s, Fn&& fn) {
    const Index A = s.dims[0], B1 = s.dims[1], B2 = s.dims[2];
    for (Index a = 1; a <= A; ++a)
        for (Index b1 = 1; b1 <= B1; ++b1)
            for (Index b2 = 1; b2 <= B2; ++b2)
                fn(IndexPair{a, (b1 - 1) * B2 + b2, (a - 1) * B1 + b1, b2});
}

template <typename Fn>
inline void for_each_type2(const TransformSpec& s, bool literal_q, Fn&& fn) {
    const Index A1 = s.dims[0], A2 = s.dims[1], A3 = s.dims[2];
    const Index B1 = s.dims[3], B2 = s.dims[4];
    for (Index a1 = 1; a1 <= A1; ++a1)
        for (Index a2 = 1; a2 <= A2; ++a2)
            for (Index a3 = 1; a3 <= A3; ++a3)
                for (Index b1 = 1; b1 <= B1; ++b1)
                    for (Index b2 = 1; b2 <= B2; ++b2) {
                        const Index m = (a1 - 1) * A2 * A3 + (a2 - 1) * A3 + a3;
                        const Index n = (b1 - 1) * B2 + b2;
                        const Index p = (a1 - 1) * A3 * B1 + (a3 - 1) * B1 + b1;
                        const Index q = literal_q ? (a2 - 1) * b2 : (a2 - 1) * B2 + b2;
                        fn(IndexPair{m, n, p, q});
                    }
}

template <typename Fn>
inline void for_each_type3(const TransformSpec& s, Fn&& fn) {
    const Index A1 = s.dims[0], A2 = s.dims[1], A3 = s.dims[2], B = s.dims[3];
    for (Index a1 = 1; a1 <= A1; ++a1)
        for (Index a2 = 1; a2 <= A2; ++a2)
            for (Index a3 = 1; a3 <= A3; ++a3)
                for (Index b = 1; b <= B; ++b)
                    fn(IndexPair{(a1 - 1) * A2 * A3 + (a2 - 1) * A3 + a3, b,
                                 (a1 - 1) * A3 * B + (a3 - 1) * B + b, a2});
}

template <typename Fn>
inline void for_each_pair(const TransformSpec& s, Fn&& fn) {
    switch (s.kind) {
        case TransformKind::TypeI: for_each_type1(s, fn); break;
        case TransformKind::TypeII: for_each_type2(s, false, fn); break;
        case TransformKind::TypeIII: for_each_type3(s, fn); break;
    }
}

}  // namespace detail

/// Apply the index map directly: T'(p, q) = T(m, n).
inline Matrix apply_transform(const TransformSpec& spec, const Matrix& t) {
    spec.validate();
    if (t.rows != spec.in_rows() || t.cols != spec.in_cols())
        throw std::invalid_argument("apply_transform: matrix is " + std::to_string(t.rows) +
                                    "x" + std::to_string(t.cols) + ", spec expects " +
                                    std::to_string(spec.in_rows()) + "x" +
                                    std::to_string(spec.in_cols()));
    Matrix out(spec.out_rows(), spec.out_cols());
    detail::for_each_pair(spec, [&](const IndexPair& x) {
        out.at(x.p - 1, x.q - 1) = t.at(x.m - 1, x.n - 1);
    });
    return out;
}

/// Independent oracle: reinterpret T as a high-order tensor, permute axes,
/// and re-matricize.
inline Matrix oracle_transform(const TransformSpec& spec, const Matrix& t) {
    spec.validate();
    if (t.rows != spec.in_rows() || t.cols != spec.in_cols())
        throw std::invalid_argument("oracle_transform: input dims do not match spec");
    switch (spec.kind) {
        case TransformKind::TypeI: {
            // (A, B1, B2) -> rows (A, B1): a pure reshape.
            return Matrix(spec.out_rows(), spec.out_cols(), t.data);
        }
        case TransformKind::TypeII: {
            DenseTensor x(Shape{spec.dims[0], spec.dims[1], spec.dims[2], spec.dims[3],
                                spec.dims[4]},
                          t.data);
            return matricize(permute(x, {0, 2, 3, 1, 4}), {0, 1, 2});
        }
        case TransformKind::TypeIII: {
            DenseTensor x(Shape{spec.dims[0], spec.dims[1], spec.dims[2], spec.dims[3]},
                          t.data);
            return matricize(permute(x, {0, 2, 3, 1}), {0, 1, 2});
        }
    }
    throw std::invalid_argument("oracle_transform: unknown kind");
}

/// Explicit (m, n) -> (p, q) table in input row-major order.
inline std::vector<IndexPair> index_map(const TransformSpec& spec) {
    spec.validate();
    std::vector<IndexPair> table;
    table.reserve(static_cast<std::size_t>(spec.total()));
    detail::for_each_pair(spec, [&](const IndexPair& x) { table.push_back(x); });
    return table;
}

/// Type-II table with the uncorrected column map q = (a2-1)*b2.
inline std::vector<IndexPair> index_map_literal_type2(const TransformSpec& spec) {
    spec.validate();
    if (spec.kind != TransformKind::TypeII)
        throw std::invalid_argument("index_map_literal_type2: spec must be Type-II");
    std::vector<IndexPair> table;
    table.reserve(static_cast<std::size_t>(spec.total()));
    detail::for_each_type2(spec, true, [&](const IndexPair& x) { table.push_back(x); });
    return table;
}

struct BijectionReport {
    bool bijective = true;
    IndexPair first_collision_a{0, 0, 0, 0};
    IndexPair first_collision_b{0, 0, 0, 0};
    bool out_of_range = false;
};

/// Check that a table is a bijection onto the full output index set. A
/// collision (two sources landing on one destination cell) is reported even
/// when destinations fall outside the output range.
inline BijectionReport check_bijection(const std::vector<IndexPair>& table, Index out_rows,
                                       Index out_cols) {
    BijectionReport rep;
    std::map<std::pair<Index, Index>, std::size_t> owner;
    bool collided = false;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const IndexPair& x = table[k];
        if (x.p < 1 || x.p > out_rows || x.q < 1 || x.q > out_cols) {
            rep.bijective = false;
            rep.out_of_range = true;
        }
        auto [it, inserted] = owner.emplace(std::make_pair(x.p, x.q), k);
        if (!inserted && !collided) {
            rep.bijective = false;
            rep.first_collision_a = table[it->second];
            rep.first_collision_b = x;
            collided = true;
        }
    }
    if (static_cast<Index>(table.size()) != out_rows * out_cols) rep.bijective = false;
    return rep;
}

}  // namespace htnn
