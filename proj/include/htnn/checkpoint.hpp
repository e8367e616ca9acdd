#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "htnn/ht_weight.hpp"

namespace htnn {

/// Binary HT-weight checkpoint.
///
/// Layout (all integers little-endian):
///   bytes 0..3   magic "HTWT"
///   u32          format version (1)
///   u32          tensor order d
///   u64          seed provenance (0 when not seeded)
///   d x u64      input dims I_1..I_d
///   d x u64      output dims O_1..O_d
///   d x u64      leaf ranks, modes 1..d
///   (d-1) x u64  internal-node ranks in post-order (root last)
///   values       IEEE-754 doubles as raw little-endian u64 bit patterns:
///                leaf frames for modes 1..d, then transfer tensors for the
///                internal nodes in post-order, each row-major.
namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char buf[4];
    for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 4);
}

inline std::uint64_t get_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char buf[4];
    is.read(reinterpret_cast<char*>(buf), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[i];
    return v;
}

inline void put_f64(std::ostream& os, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(os, bits);
}

inline double get_f64(std::istream& is) {
    std::uint64_t bits = get_u64(is);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace detail

inline void save_checkpoint(const HTWeight& w, const std::string& path,
                            std::uint64_t seed = 0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write("HTWT", 4);
    detail::put_u32(os, 1u);
    detail::put_u32(os, static_cast<std::uint32_t>(w.tree.d));
    detail::put_u64(os, seed);
    for (Index v : w.in_dims) detail::put_u64(os, static_cast<std::uint64_t>(v));
    for (Index v : w.out_dims) detail::put_u64(os, static_cast<std::uint64_t>(v));
    for (Index j = 1; j <= w.tree.d; ++j)
        detail::put_u64(os, static_cast<std::uint64_t>(w.leaf_rank(j)));
    for (int idx : w.tree.internal_postorder)
        detail::put_u64(os, static_cast<std::uint64_t>(w.tree.at(idx).rank));
    for (const Matrix& f : w.leaf_frames)
        for (double v : f.data) detail::put_f64(os, v);
    for (int idx : w.tree.internal_postorder)
        for (double v : w.transfer(idx).data) detail::put_f64(os, v);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
    HTWeight weight;
    std::uint64_t seed = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "HTWT")
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1u)
        throw std::runtime_error("load_checkpoint: unsupported version " +
                                 std::to_string(version));
    const int d = static_cast<int>(detail::get_u32(is));
    Checkpoint cp;
    cp.seed = detail::get_u64(is);
    HTConfig cfg;
    cfg.d = d;
    cfg.in_dims.resize(static_cast<std::size_t>(d));
    cfg.out_dims.resize(static_cast<std::size_t>(d));
    cfg.leaf_ranks.resize(static_cast<std::size_t>(d));
    for (Index& v : cfg.in_dims) v = static_cast<Index>(detail::get_u64(is));
    for (Index& v : cfg.out_dims) v = static_cast<Index>(detail::get_u64(is));
    for (Index& v : cfg.leaf_ranks) v = static_cast<Index>(detail::get_u64(is));
    std::vector<Index> internal_ranks(static_cast<std::size_t>(d - 1));
    for (Index& v : internal_ranks) v = static_cast<Index>(detail::get_u64(is));
    if (!is) throw std::runtime_error("load_checkpoint: truncated header in " + path);
    cfg.non_leaf_rank = 1;
    cfg.root_rank = 1;
    HTWeight w = make_weight(cfg);
    // Per-node ranks may differ from the uniform config; restore them and
    // resize the stored tensors accordingly.
    for (std::size_t k = 0; k < internal_ranks.size(); ++k)
        w.tree.at(w.tree.internal_postorder[k]).rank = internal_ranks[k];
    for (Index j = 1; j <= d; ++j) {
        const Index r = cfg.leaf_ranks[static_cast<std::size_t>(j - 1)];
        w.leaf_frames[static_cast<std::size_t>(j - 1)] =
            Matrix(r, cfg.out_dims[static_cast<std::size_t>(j - 1)] *
                          cfg.in_dims[static_cast<std::size_t>(j - 1)]);
    }
    for (int idx : w.tree.internal_postorder) {
        const DimTreeNode& n = w.tree.at(idx);
        w.transfer(idx) =
            DenseTensor(Shape{n.rank, w.tree.at(n.left).rank, w.tree.at(n.right).rank});
    }
    for (Matrix& f : w.leaf_frames)
        for (double& v : f.data) v = detail::get_f64(is);
    for (int idx : w.tree.internal_postorder)
        for (double& v : w.transfer(idx).data) v = detail::get_f64(is);
    if (!is) throw std::runtime_error("load_checkpoint: truncated values in " + path);
    w.validate();
    cp.weight = std::move(w);
    return cp;
}

}  // namespace htnn
