#pragma once

#include <stdexcept>
#include <vector>

#include "htnn/tensor.hpp"

namespace htnn {

/// Node of the binary dimension tree. Modes are 1-based; a node covers the
/// contiguous mode set {lo..hi} and carries one hierarchical rank.
struct DimTreeNode {
    Index lo = 0;
    Index hi = 0;
    Index rank = 1;
    int left = -1;
    int right = -1;
    int parent = -1;

    bool is_leaf() const { return left < 0; }
    Index mode_count() const { return hi - lo + 1; }
};

/// Balanced binary dimension tree over modes {1..d}. An internal node
/// {lo..hi} splits at m = lo + floor((hi-lo+1)/2) - 1 into {lo..m} and
/// {m+1..hi}; for d=4 this yields internal nodes {1,2} and {3,4}.
struct DimTree {
    int d = 0;
    std::vector<DimTreeNode> nodes;
    int root = -1;
    std::vector<int> leaf_node;           // mode j (1-based) -> node index
    std::vector<int> internal_postorder;  // internal node indices, post-order

    int node_of_leaf(Index mode) const { return leaf_node[static_cast<std::size_t>(mode - 1)]; }
    const DimTreeNode& at(int idx) const { return nodes[static_cast<std::size_t>(idx)]; }
    DimTreeNode& at(int idx) { return nodes[static_cast<std::size_t>(idx)]; }
    int internal_count() const { return static_cast<int>(internal_postorder.size()); }
};

inline DimTree build_tree(int d, const std::vector<Index>& leaf_ranks, Index non_leaf_rank,
                          Index root_rank) {
    if (d < 2) throw std::invalid_argument("build_tree: order d must be >= 2");
    if (static_cast<int>(leaf_ranks.size()) != d)
        throw std::invalid_argument("build_tree: need one leaf rank per mode");
    for (Index r : leaf_ranks)
        if (r < 1) throw std::invalid_argument("build_tree: leaf ranks must be >= 1");
    if (non_leaf_rank < 1 || root_rank < 1)
        throw std::invalid_argument("build_tree: ranks must be >= 1");

    DimTree tree;
    tree.d = d;
    tree.leaf_node.assign(static_cast<std::size_t>(d), -1);

    // Build recursively; children are created before their parent so a plain
    // traversal of children-first also works as post-order within subtrees.
    struct Builder {
        DimTree& t;
        const std::vector<Index>& leaf_ranks;
        Index non_leaf_rank;
        int build(Index lo, Index hi) {
            if (lo == hi) {
                DimTreeNode n;
                n.lo = lo;
                n.hi = hi;
                n.rank = leaf_ranks[static_cast<std::size_t>(lo - 1)];
                t.nodes.push_back(n);
                int idx = static_cast<int>(t.nodes.size()) - 1;
                t.leaf_node[static_cast<std::size_t>(lo - 1)] = idx;
                return idx;
            }
            const Index m = lo + (hi - lo + 1) / 2 - 1;
            const int left = build(lo, m);
            const int right = build(m + 1, hi);
            DimTreeNode n;
            n.lo = lo;
            n.hi = hi;
            n.rank = non_leaf_rank;
            n.left = left;
            n.right = right;
            t.nodes.push_back(n);
            int idx = static_cast<int>(t.nodes.size()) - 1;
            t.nodes[static_cast<std::size_t>(left)].parent = idx;
            t.nodes[static_cast<std::size_t>(right)].parent = idx;
            t.internal_postorder.push_back(idx);
            return idx;
        }
    } builder{tree, leaf_ranks, non_leaf_rank};

    tree.root = builder.build(1, d);
    tree.at(tree.root).rank = root_rank;
    return tree;
}

inline DimTree build_tree(int d, Index leaf_rank, Index non_leaf_rank, Index root_rank) {
    return build_tree(d, std::vector<Index>(static_cast<std::size_t>(d), leaf_rank),
                      non_leaf_rank, root_rank);
}

}  // namespace htnn
