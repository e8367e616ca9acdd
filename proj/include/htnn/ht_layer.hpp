#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "htnn/ht_weight.hpp"
#include "htnn/transform.hpp"

namespace htnn {

// ----------------------------------------------------------------------------
// Layer schedule: the forward pass as a chain of 2-D matmuls and Type-I/II/III
// transformations. For d=4 the multiply order is U'1, U'2, B'12, U'3, U'4,
// B'34, B'1234 (7 multiplies, 6 transforms); the general pattern recurses over
// the dimension tree: absorb the left child, bring the right child's first
// input mode into the columns (Type-III), absorb the right child, gather the
// two child ranks into the columns (Type-II), multiply the transfer tensor.
// The batch factor rides as the slowest row factor throughout.
// ----------------------------------------------------------------------------

struct MulStep {
    int node = -1;          // tree node whose matrix multiplies from the right
    Matrix matrix;          // materialized operand
    Index in_cols = 0;      // expected column count before the step
    Index out_cols = 0;
};

struct ScheduleStep {
    bool is_multiply = false;
    MulStep mul;
    TransformSpec transform;
};

struct LayerSchedule {
    Index batch = 1;
    Shape in_dims;
    Shape out_dims;
    Index root_rank = 1;
    std::vector<ScheduleStep> steps;

    int multiply_count() const {
        int n = 0;
        for (const auto& s : steps) n += s.is_multiply ? 1 : 0;
        return n;
    }
    int transform_count() const { return static_cast<int>(steps.size()) - multiply_count(); }
};

namespace detail {

enum class FactorTag { Batch, In, Out, Rank };

struct Factor {
    FactorTag tag;
    int id;      // mode for In/Out, node index for Rank
    Index size;
};

inline Index factor_product(const std::vector<Factor>& fs, std::size_t lo, std::size_t hi) {
    Index p = 1;
    for (std::size_t k = lo; k < hi; ++k) p *= fs[k].size;
    return p;
}

inline Index factor_product(const std::vector<Factor>& fs) {
    return factor_product(fs, 0, fs.size());
}

/// Leaf operand: [I_j x (O_j * R_j)] with entry (i, o*R + r) = frame(r, o*I + i).
inline Matrix leaf_in_matrix(const HTWeight& w, Index mode) {
    const Matrix& f = w.leaf_frames[static_cast<std::size_t>(mode - 1)];
    const Index R = f.rows;
    const Index O = w.out_dims[static_cast<std::size_t>(mode - 1)];
    const Index I = w.in_dims[static_cast<std::size_t>(mode - 1)];
    Matrix m(I, O * R);
    for (Index r = 0; r < R; ++r)
        for (Index o = 0; o < O; ++o)
            for (Index i = 0; i < I; ++i) m.at(i, o * R + r) = f.at(r, o * I + i);
    return m;
}

/// Transfer operand: [(R1 * R2) x R_s] with entry (p*R2 + q, k) = B(k, p, q).
inline Matrix transfer_up_matrix(const HTWeight& w, int node) {
    const DenseTensor& b = w.transfer(node);
    const Index R = b.shape[0], R1 = b.shape[1], R2 = b.shape[2];
    Matrix m(R1 * R2, R);
    for (Index k = 0; k < R; ++k)
        for (Index p = 0; p < R1; ++p)
            for (Index q = 0; q < R2; ++q) m.at(p * R2 + q, k) = b[(k * R1 + p) * R2 + q];
    return m;
}

struct ScheduleBuilder {
    const HTWeight& w;
    LayerSchedule& out;
    std::vector<Factor> rows;
    std::vector<Factor> cols;

    Index first_leaf(int node) const { return w.tree.at(node).lo; }

    void emit_multiply(int node, Matrix m) {
        if (factor_product(cols) != m.rows)
            throw std::runtime_error("build_schedule: step does not chain at node multiply");
        ScheduleStep s;
        s.is_multiply = true;
        s.mul.node = node;
        s.mul.in_cols = m.rows;
        s.mul.out_cols = m.cols;
        s.mul.matrix = std::move(m);
        out.steps.push_back(std::move(s));
    }

    void emit_transform(const TransformSpec& spec, std::vector<Factor> new_rows,
                        std::vector<Factor> new_cols) {
        if (spec.in_rows() != factor_product(rows) || spec.in_cols() != factor_product(cols))
            throw std::runtime_error("build_schedule: transform input shape does not chain");
        if (spec.out_rows() != factor_product(new_rows) ||
            spec.out_cols() != factor_product(new_cols))
            throw std::runtime_error("build_schedule: transform output shape does not chain");
        ScheduleStep s;
        s.transform = spec;
        out.steps.push_back(std::move(s));
        rows = std::move(new_rows);
        cols = std::move(new_cols);
    }

    std::size_t find_row_factor(FactorTag tag, int id) const {
        for (std::size_t k = 0; k < rows.size(); ++k)
            if (rows[k].tag == tag && rows[k].id == id) return k;
        throw std::runtime_error("build_schedule: expected row factor not present");
    }

    /// Type-III: extract the single row factor at position k into the columns,
    /// appending the old column factors to the rows.
    void glue_extract(std::size_t k) {
        const Index a1 = factor_product(rows, 0, k);
        const Index a2 = rows[k].size;
        const Index a3 = factor_product(rows, k + 1, rows.size());
        const Index b = factor_product(cols);
        std::vector<Factor> new_rows;
        for (std::size_t t = 0; t < rows.size(); ++t)
            if (t != k) new_rows.push_back(rows[t]);
        std::vector<Factor> new_cols{rows[k]};
        for (const Factor& f : cols) new_rows.push_back(f);
        emit_transform(TransformSpec::type3(a1, a2, a3, b), std::move(new_rows),
                       std::move(new_cols));
    }

    /// Type-II: extract the row factor at position k as the slow column factor,
    /// keep the last column factor as the fast one, and push the remaining
    /// column factors onto the rows.
    void pair_extract(std::size_t k) {
        const Index a1 = factor_product(rows, 0, k);
        const Index a2 = rows[k].size;
        const Index a3 = factor_product(rows, k + 1, rows.size());
        const Index b1 = factor_product(cols, 0, cols.size() - 1);
        const Index b2 = cols.back().size;
        std::vector<Factor> new_rows;
        for (std::size_t t = 0; t < rows.size(); ++t)
            if (t != k) new_rows.push_back(rows[t]);
        for (std::size_t t = 0; t + 1 < cols.size(); ++t) new_rows.push_back(cols[t]);
        std::vector<Factor> new_cols{rows[k], cols.back()};
        emit_transform(TransformSpec::type2(a1, a2, a3, b1, b2), std::move(new_rows),
                       std::move(new_cols));
    }

    /// Post-condition: columns are [Out(j), Rank(j)] for a leaf, [Rank(s)] for
    /// an internal node.
    void absorb(int node) {
        const DimTreeNode& n = w.tree.at(node);
        if (n.is_leaf()) {
            const Index mode = n.lo;
            Matrix m = leaf_in_matrix(w, mode);
            const Index O = w.out_dims[static_cast<std::size_t>(mode - 1)];
            emit_multiply(node, std::move(m));
            cols = {Factor{FactorTag::Out, static_cast<int>(mode), O},
                    Factor{FactorTag::Rank, node, n.rank}};
            return;
        }
        absorb(n.left);
        glue_extract(find_row_factor(FactorTag::In, static_cast<int>(first_leaf(n.right))));
        absorb(n.right);
        pair_extract(find_row_factor(FactorTag::Rank, n.left));
        Matrix m = transfer_up_matrix(w, node);
        emit_multiply(node, std::move(m));
        cols = {Factor{FactorTag::Rank, node, n.rank}};
    }
};

}  // namespace detail

inline LayerSchedule build_schedule(const HTWeight& w, Index batch) {
    if (batch < 1) throw std::invalid_argument("build_schedule: batch must be >= 1");
    w.validate();
    LayerSchedule sched;
    sched.batch = batch;
    sched.in_dims = w.in_dims;
    sched.out_dims = w.out_dims;
    sched.root_rank = w.root_rank();

    detail::ScheduleBuilder b{w, sched, {}, {}};
    b.rows.push_back({detail::FactorTag::Batch, 0, batch});
    for (Index j = 2; j <= w.tree.d; ++j)
        b.rows.push_back({detail::FactorTag::In, static_cast<int>(j),
                          w.in_dims[static_cast<std::size_t>(j - 1)]});
    b.cols.push_back({detail::FactorTag::In, 1, w.in_dims[0]});
    b.absorb(w.tree.root);

    // Final layout: rows (batch, O_1..O_d), cols (root rank).
    if (b.rows.size() != static_cast<std::size_t>(w.tree.d) + 1 ||
        b.rows[0].tag != detail::FactorTag::Batch)
        throw std::runtime_error("build_schedule: unexpected final row factors");
    for (int j = 1; j <= w.tree.d; ++j)
        if (b.rows[static_cast<std::size_t>(j)].tag != detail::FactorTag::Out ||
            b.rows[static_cast<std::size_t>(j)].id != j)
            throw std::runtime_error("build_schedule: unexpected final output order");
    return sched;
}

/// Run the schedule on a batch of flat inputs (each row length <= prod(I));
/// returns one row per sample of length root_rank * prod(O), the root-rank
/// slices concatenated.
inline Matrix run_schedule(const LayerSchedule& sched, const Matrix& x) {
    const Index in_total = shape_numel(sched.in_dims);
    const Index out_total = shape_numel(sched.out_dims);
    if (x.rows != sched.batch)
        throw std::invalid_argument("run_schedule: batch size mismatch");
    if (x.cols > in_total)
        throw std::invalid_argument("run_schedule: input length " + std::to_string(x.cols) +
                                    " exceeds " + std::to_string(in_total));

    // T0: rows (batch, I_2..I_d), cols I_1, zero-padded input.
    const Index i1 = sched.in_dims[0];
    const Index rest = in_total / i1;
    Matrix t(sched.batch * rest, i1);
    for (Index s = 0; s < sched.batch; ++s)
        for (Index c = 0; c < x.cols; ++c) {
            const Index a = c / rest, r = c % rest;
            t.at(s * rest + r, a) = x.at(s, c);
        }

    for (const ScheduleStep& step : sched.steps) {
        if (step.is_multiply)
            t = matmul(t, step.mul.matrix);
        else
            t = apply_transform(step.transform, t);
    }

    // Final rows (batch, O_1..O_d), cols root_rank.
    Matrix y(sched.batch, sched.root_rank * out_total);
    for (Index s = 0; s < sched.batch; ++s)
        for (Index o = 0; o < out_total; ++o)
            for (Index k = 0; k < sched.root_rank; ++k)
                y.at(s, k * out_total + o) = t.at(s * out_total + o, k);
    return y;
}

/// Single-vector forward pass through the schedule.
inline std::vector<double> forward(const HTWeight& w, const std::vector<double>& x) {
    LayerSchedule sched = build_schedule(w, 1);
    Matrix xm(1, std::max<Index>(1, static_cast<Index>(x.size())));
    if (!x.empty()) xm.data = x;
    Matrix y = run_schedule(sched, xm);
    return y.data;
}

// ----------------------------------------------------------------------------
// Analytic gradients, computed by the recursive parent-to-child rule: the
// loss gradient of a child frame contracts the parent's gradient with the
// sibling frame and the transfer tensor; the transfer gradient contracts the
// parent's gradient with both child frames. The recursion starts at the root
// with grad(U_D) = outer(dL/dY, X) and terminates at the leaves.
// ----------------------------------------------------------------------------

struct HTGradients {
    std::vector<Matrix> leaf_frames;     // same shapes as the weight's frames
    std::vector<DenseTensor> transfers;  // indexed by node id
};

namespace detail {

inline void backward_node(const HTWeight& w, const std::vector<DenseTensor>& frames,
                          int node_idx, const DenseTensor& g, HTGradients& out) {
    const DimTreeNode& n = w.tree.at(node_idx);
    if (n.is_leaf()) {
        const Index R = n.rank;
        const Index O = w.out_dims[static_cast<std::size_t>(n.lo - 1)];
        const Index I = w.in_dims[static_cast<std::size_t>(n.lo - 1)];
        out.leaf_frames[static_cast<std::size_t>(n.lo - 1)] = Matrix(R, O * I, g.data);
        return;
    }
    const DenseTensor& u1 = frames[static_cast<std::size_t>(n.left)];
    const DenseTensor& u2 = frames[static_cast<std::size_t>(n.right)];
    const DenseTensor& b = w.transfer(node_idx);
    const int n1 = static_cast<int>(w.tree.at(n.left).mode_count());
    const int n2 = static_cast<int>(w.tree.at(n.right).mode_count());

    // g axes: [R_s | O_a(n1) | O_b(n2) | I_a(n1) | I_b(n2)]
    std::vector<int> a_axes, b_axes, u_axes1, u_axes2;
    for (int k = 0; k < n1; ++k) a_axes.push_back(1 + k);
    for (int k = 0; k < n1; ++k) a_axes.push_back(1 + n1 + n2 + k);
    for (int k = 0; k < n2; ++k) b_axes.push_back(1 + n1 + k);
    for (int k = 0; k < n2; ++k) b_axes.push_back(1 + 2 * n1 + n2 + k);
    for (int k = 0; k < 2 * n1; ++k) u_axes1.push_back(1 + k);
    for (int k = 0; k < 2 * n2; ++k) u_axes2.push_back(1 + k);

    DenseTensor t1 = contract(g, u1, a_axes, u_axes1);  // [R_s, O_b.., I_b.., R1]
    DenseTensor t2 = contract(g, u2, b_axes, u_axes2);  // [R_s, O_a.., I_a.., R2]

    std::vector<int> inner2;
    for (int k = 0; k < 2 * n2; ++k) inner2.push_back(1 + k);
    out.transfers[static_cast<std::size_t>(node_idx)] =
        contract(t1, u2, inner2, u_axes2);  // [R_s, R1, R2]

    // Child gradients: contract the spare parent rank and sibling rank with B.
    const int last1 = 2 * n2 + 1;  // position of R1 in t1
    const int last2 = 2 * n1 + 1;  // position of R2 in t2
    DenseTensor gl = contract(t2, b, {0, last2}, {0, 2});  // [O_a.., I_a.., R1]
    DenseTensor gr = contract(t1, b, {0, last1}, {0, 1});  // [O_b.., I_b.., R2]
    std::vector<int> rot1{2 * n1};
    for (int k = 0; k < 2 * n1; ++k) rot1.push_back(k);
    std::vector<int> rot2{2 * n2};
    for (int k = 0; k < 2 * n2; ++k) rot2.push_back(k);
    backward_node(w, frames, n.left, permute(gl, rot1), out);
    backward_node(w, frames, n.right, permute(gr, rot2), out);
}

inline DenseTensor upstream_tensor(const HTWeight& w, const std::vector<double>& upstream) {
    const Index rd = w.root_rank();
    const Index out_total = w.out_numel();
    if (static_cast<Index>(upstream.size()) != rd * out_total)
        throw std::invalid_argument("backward: upstream length " +
                                    std::to_string(upstream.size()) + " but expected " +
                                    std::to_string(rd * out_total));
    Shape g_shape{rd};
    for (Index v : w.out_dims) g_shape.push_back(v);
    return DenseTensor(g_shape, upstream);
}

}  // namespace detail

/// Gradients of every leaf frame and transfer tensor for the linear loss
/// surrogate L = <upstream, forward(w, x)>.
inline HTGradients backward_frames(const HTWeight& w, const std::vector<double>& x,
                                   const std::vector<double>& upstream) {
    if (static_cast<Index>(x.size()) > w.in_numel())
        throw std::invalid_argument("backward_frames: input too long");
    std::vector<DenseTensor> frames = synthesize_frames(w);
    DenseTensor g = detail::upstream_tensor(w, upstream);
    DenseTensor xt = tensorize(x, w.in_dims);
    DenseTensor g_root = contract(g, xt, {}, {});  // [R_D, O.., I..]

    HTGradients out;
    out.leaf_frames.resize(static_cast<std::size_t>(w.tree.d));
    out.transfers.assign(w.tree.nodes.size(), DenseTensor{});
    detail::backward_node(w, frames, w.tree.root, g_root, out);
    return out;
}

/// Gradient with respect to the input vector: the transpose action of the
/// layer applied to the upstream gradient, truncated to x_len (the zero
/// padding region is discarded).
inline std::vector<double> backward_input(const HTWeight& w, const std::vector<double>& upstream,
                                          Index x_len) {
    if (x_len < 0 || x_len > w.in_numel())
        throw std::invalid_argument("backward_input: bad input length");
    std::vector<DenseTensor> frames = synthesize_frames(w);
    DenseTensor g = detail::upstream_tensor(w, upstream);
    const DimTreeNode& root = w.tree.at(w.tree.root);
    const DenseTensor& u1 = frames[static_cast<std::size_t>(root.left)];
    const DenseTensor& u2 = frames[static_cast<std::size_t>(root.right)];
    const int n1 = static_cast<int>(w.tree.at(root.left).mode_count());
    const int n2 = static_cast<int>(w.tree.at(root.right).mode_count());

    DenseTensor h = contract(w.transfer(w.tree.root), g, {0}, {0});  // [R1, R2, O_a.., O_b..]
    std::vector<int> ha{0}, ua{0};
    for (int k = 0; k < n1; ++k) ha.push_back(2 + k);
    for (int k = 0; k < n1; ++k) ua.push_back(1 + k);
    DenseTensor c = contract(h, u1, ha, ua);  // [R2, O_b.., I_a..]
    std::vector<int> ca{0}, ub{0};
    for (int k = 0; k < n2; ++k) ca.push_back(1 + k);
    for (int k = 0; k < n2; ++k) ub.push_back(1 + k);
    DenseTensor full = contract(c, u2, ca, ub);  // [I_a.., I_b..]
    std::vector<double> dx(full.data.begin(), full.data.begin() + x_len);
    return dx;
}

}  // namespace htnn
