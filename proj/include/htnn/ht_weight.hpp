#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "htnn/dim_tree.hpp"
#include "htnn/tensor.hpp"

namespace htnn {

/// Configuration of one HT-decomposed weight.
struct HTConfig {
    int d = 0;
    Shape in_dims;   // I_1..I_d
    Shape out_dims;  // O_1..O_d
    std::vector<Index> leaf_ranks;
    Index non_leaf_rank = 1;
    Index root_rank = 1;

    void validate() const {
        if (d < 2) throw std::invalid_argument("HTConfig: d must be >= 2");
        if (static_cast<int>(in_dims.size()) != d || static_cast<int>(out_dims.size()) != d)
            throw std::invalid_argument("HTConfig: need d input and output dims");
        for (Index v : in_dims)
            if (v < 1) throw std::invalid_argument("HTConfig: input dims must be >= 1");
        for (Index v : out_dims)
            if (v < 1) throw std::invalid_argument("HTConfig: output dims must be >= 1");
    }
};

inline HTConfig make_config(int d, Shape in_dims, Shape out_dims, Index leaf_rank,
                            Index non_leaf_rank, Index root_rank) {
    HTConfig cfg;
    cfg.d = d;
    cfg.in_dims = std::move(in_dims);
    cfg.out_dims = std::move(out_dims);
    cfg.leaf_ranks.assign(static_cast<std::size_t>(d), leaf_rank);
    cfg.non_leaf_rank = non_leaf_rank;
    cfg.root_rank = root_rank;
    cfg.validate();
    return cfg;
}

/// Hierarchical Tucker weight: one leaf frame per mode, one transfer tensor
/// per internal node. Leaf frame j is stored as an R_j x (O_j * I_j) matrix
/// with the output index varying slower than the input index inside a column.
/// Transfer tensors have shape [R_s, R_s1, R_s2].
struct HTWeight {
    DimTree tree;
    Shape in_dims;
    Shape out_dims;
    std::vector<Matrix> leaf_frames;        // indexed by mode-1
    std::vector<DenseTensor> transfers;     // indexed by node id; leaves unused

    int order() const { return tree.d; }
    Index root_rank() const { return tree.at(tree.root).rank; }
    Index in_numel() const { return shape_numel(in_dims); }
    Index out_numel() const { return shape_numel(out_dims); }

    Index leaf_rank(Index mode) const { return tree.at(tree.node_of_leaf(mode)).rank; }

    const DenseTensor& transfer(int node) const { return transfers[static_cast<std::size_t>(node)]; }
    DenseTensor& transfer(int node) { return transfers[static_cast<std::size_t>(node)]; }

    void validate() const {
        const int d = tree.d;
        if (static_cast<int>(in_dims.size()) != d || static_cast<int>(out_dims.size()) != d)
            throw std::invalid_argument("HTWeight: dim lists must match tree order");
        for (Index j = 1; j <= d; ++j) {
            const Matrix& f = leaf_frames[static_cast<std::size_t>(j - 1)];
            const Index r = leaf_rank(j);
            const Index oi = out_dims[static_cast<std::size_t>(j - 1)] *
                             in_dims[static_cast<std::size_t>(j - 1)];
            if (f.rows != r || f.cols != oi)
                throw std::invalid_argument("HTWeight: leaf frame " + std::to_string(j) +
                                            " has shape " + std::to_string(f.rows) + "x" +
                                            std::to_string(f.cols) + ", expected " +
                                            std::to_string(r) + "x" + std::to_string(oi));
        }
        for (int idx : tree.internal_postorder) {
            const DimTreeNode& n = tree.at(idx);
            const DenseTensor& b = transfer(idx);
            const Shape want{n.rank, tree.at(n.left).rank, tree.at(n.right).rank};
            if (b.shape != want)
                throw std::invalid_argument("HTWeight: transfer tensor shape mismatch at node {" +
                                            std::to_string(n.lo) + ".." + std::to_string(n.hi) +
                                            "}");
        }
    }
};

inline HTWeight make_weight(const HTConfig& cfg) {
    cfg.validate();
    HTWeight w;
    w.tree = build_tree(cfg.d, cfg.leaf_ranks, cfg.non_leaf_rank, cfg.root_rank);
    w.in_dims = cfg.in_dims;
    w.out_dims = cfg.out_dims;
    w.leaf_frames.reserve(static_cast<std::size_t>(cfg.d));
    for (Index j = 1; j <= cfg.d; ++j)
        w.leaf_frames.emplace_back(w.tree.at(w.tree.node_of_leaf(j)).rank,
                                   cfg.out_dims[static_cast<std::size_t>(j - 1)] *
                                       cfg.in_dims[static_cast<std::size_t>(j - 1)]);
    w.transfers.assign(w.tree.nodes.size(), DenseTensor{});
    for (int idx : w.tree.internal_postorder) {
        const DimTreeNode& n = w.tree.at(idx);
        w.transfer(idx) = DenseTensor(
            Shape{n.rank, w.tree.at(n.left).rank, w.tree.at(n.right).rank});
    }
    return w;
}

/// Number of stored real values: leaf frames plus transfer tensors. Biases
/// are not part of the HT weight and are counted separately by callers.
inline Index count_params(const HTConfig& cfg) {
    cfg.validate();
    DimTree tree = build_tree(cfg.d, cfg.leaf_ranks, cfg.non_leaf_rank, cfg.root_rank);
    Index total = 0;
    for (Index j = 1; j <= cfg.d; ++j)
        total += tree.at(tree.node_of_leaf(j)).rank *
                 cfg.out_dims[static_cast<std::size_t>(j - 1)] *
                 cfg.in_dims[static_cast<std::size_t>(j - 1)];
    for (int idx : tree.internal_postorder) {
        const DimTreeNode& n = tree.at(idx);
        total += n.rank * tree.at(n.left).rank * tree.at(n.right).rank;
    }
    return total;
}

inline Index stored_value_count(const HTWeight& w) {
    Index total = 0;
    for (const Matrix& f : w.leaf_frames) total += static_cast<Index>(f.data.size());
    for (int idx : w.tree.internal_postorder) total += w.transfer(idx).numel();
    return total;
}

/// Frame of node s as a tensor [R_s, O_lo..O_hi, I_lo..I_hi]. Internal frames
/// are synthesized bottom-up by contracting the transfer tensor with both
/// child frames and regrouping output modes before input modes.
inline DenseTensor node_frame(const HTWeight& w, int node_idx,
                              std::vector<DenseTensor>* cache = nullptr);

namespace detail {

inline DenseTensor leaf_frame_tensor(const HTWeight& w, Index mode) {
    const Matrix& f = w.leaf_frames[static_cast<std::size_t>(mode - 1)];
    const Index o = w.out_dims[static_cast<std::size_t>(mode - 1)];
    const Index i = w.in_dims[static_cast<std::size_t>(mode - 1)];
    return DenseTensor(Shape{f.rows, o, i}, f.data);
}

inline DenseTensor merge_frames(const DenseTensor& transfer, const DenseTensor& left,
                                const DenseTensor& right) {
    // transfer [R, R1, R2], left [R1, O_a.., I_a..], right [R2, O_b.., I_b..]
    const int n1 = (left.order() - 1) / 2;
    const int n2 = (right.order() - 1) / 2;
    DenseTensor c = contract(transfer, left, {1}, {0});   // [R, R2, O_a.., I_a..]
    c = contract(c, right, {1}, {0});                     // [R, O_a.., I_a.., O_b.., I_b..]
    std::vector<int> order;
    order.push_back(0);
    for (int k = 0; k < n1; ++k) order.push_back(1 + k);                 // O_a
    for (int k = 0; k < n2; ++k) order.push_back(1 + 2 * n1 + k);        // O_b
    for (int k = 0; k < n1; ++k) order.push_back(1 + n1 + k);            // I_a
    for (int k = 0; k < n2; ++k) order.push_back(1 + 2 * n1 + n2 + k);   // I_b
    return permute(c, order);
}

}  // namespace detail

inline DenseTensor node_frame(const HTWeight& w, int node_idx, std::vector<DenseTensor>* cache) {
    const DimTreeNode& n = w.tree.at(node_idx);
    DenseTensor result;
    if (n.is_leaf()) {
        result = detail::leaf_frame_tensor(w, n.lo);
    } else {
        DenseTensor left = node_frame(w, n.left, cache);
        DenseTensor right = node_frame(w, n.right, cache);
        result = detail::merge_frames(w.transfer(node_idx), left, right);
    }
    if (cache) (*cache)[static_cast<std::size_t>(node_idx)] = result;
    return result;
}

/// Synthesize every node frame; returned vector is indexed by node id.
inline std::vector<DenseTensor> synthesize_frames(const HTWeight& w) {
    std::vector<DenseTensor> frames(w.tree.nodes.size());
    node_frame(w, w.tree.root, &frames);
    return frames;
}

/// Full weight tensor of shape [R_D, O_1..O_d, I_1..I_d].
inline DenseTensor reconstruct(const HTWeight& w) {
    w.validate();
    return node_frame(w, w.tree.root);
}

inline std::pair<Index, Index> gate_matrix_dims(const HTConfig& cfg) {
    return {shape_numel(cfg.out_dims), shape_numel(cfg.in_dims)};
}

/// One (prod O) x (prod I) matrix per root-rank slice of the reconstruction.
inline std::vector<Matrix> to_gate_matrices(const HTWeight& w) {
    DenseTensor full = reconstruct(w);
    const Index rd = w.root_rank();
    const Index rows = w.out_numel();
    const Index cols = w.in_numel();
    const Index slice = rows * cols;
    std::vector<Matrix> gates;
    gates.reserve(static_cast<std::size_t>(rd));
    for (Index k = 0; k < rd; ++k) {
        std::vector<double> data(full.data.begin() + k * slice,
                                 full.data.begin() + (k + 1) * slice);
        gates.emplace_back(rows, cols, std::move(data));
    }
    return gates;
}

// ----------------------------------------------------------------------------
// Cross-format space-complexity expressions (leading-term counts used for
// curve comparison, not exact parameter counts).
// ----------------------------------------------------------------------------

enum class LayerFormat { TT, TR, BT, HT, Dense };

inline LayerFormat parse_format(const std::string& s) {
    if (s == "tt" || s == "TT") return LayerFormat::TT;
    if (s == "tr" || s == "TR") return LayerFormat::TR;
    if (s == "bt" || s == "BT") return LayerFormat::BT;
    if (s == "ht" || s == "HT") return LayerFormat::HT;
    if (s == "dense") return LayerFormat::Dense;
    throw std::invalid_argument("unknown layer format: " + s);
}

inline Index format_complexity(LayerFormat fmt, Index d, Index in_dim, Index out_dim, Index rank) {
    if (d < 1 || in_dim < 1 || out_dim < 1 || rank < 1)
        throw std::invalid_argument("format_complexity: all arguments must be positive");
    auto ipow = [](Index base, Index exp) {
        Index v = 1;
        for (Index k = 0; k < exp; ++k) v *= base;
        return v;
    };
    switch (fmt) {
        case LayerFormat::TT:
        case LayerFormat::TR:
            return d * in_dim * out_dim * rank * rank;
        case LayerFormat::BT:
            return d * in_dim * out_dim * rank + ipow(rank, d);
        case LayerFormat::HT:
            return d * in_dim * out_dim * rank + d * rank * rank * rank;
        case LayerFormat::Dense:
            return ipow(in_dim * out_dim, d);
    }
    throw std::invalid_argument("format_complexity: unknown format");
}

// ----------------------------------------------------------------------------
// Deterministic random initialization.
// ----------------------------------------------------------------------------

/// Deterministic standard-normal stream (mt19937_64 + Box-Muller). Avoids
/// std::normal_distribution so sequences are identical across stdlibs.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = unit_open();
        const double u2 = unit_open();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * 3.14159265358979323846 * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

private:
    double unit_open() {
        // (0,1]: never feeds log() a zero.
        return (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
    }
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Gaussian init with per-node scales chosen so the reconstructed matrix has
/// entry variance ~= 1 / prod(I_j): leaf frames get variance 1/I_j and
/// transfer tensors variance 1/(R_s1*R_s2), which is variance-neutral across
/// every merge. Fill order: leaves 1..d, then internal nodes in post-order.
inline HTWeight random_init(const HTConfig& cfg, std::uint64_t seed) {
    HTWeight w = make_weight(cfg);
    GaussianRng rng(seed);
    for (Index j = 1; j <= cfg.d; ++j) {
        Matrix& f = w.leaf_frames[static_cast<std::size_t>(j - 1)];
        const double scale = 1.0 / std::sqrt(static_cast<double>(
                                  cfg.in_dims[static_cast<std::size_t>(j - 1)]));
        for (double& v : f.data) v = scale * rng.next();
    }
    for (int idx : w.tree.internal_postorder) {
        DenseTensor& b = w.transfer(idx);
        const DimTreeNode& n = w.tree.at(idx);
        const double scale = 1.0 / std::sqrt(static_cast<double>(w.tree.at(n.left).rank) *
                                             static_cast<double>(w.tree.at(n.right).rank));
        for (double& v : b.data) v = scale * rng.next();
    }
    return w;
}

}  // namespace htnn
