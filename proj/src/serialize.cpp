#include "hmx/serialize.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hmx {

namespace {

constexpr char magic[4]          = {'H', 'M', 'X', 'B'};
constexpr std::uint32_t version  = 1;

class Writer {
  public:
    explicit Writer(std::ostream &os) : os_(os) {}
    template <class T> void put(T v) { os_.write(reinterpret_cast<const char *>(&v), sizeof(T)); }
    void put_matrix(const DenseBlock &m) {
        os_.write(reinterpret_cast<const char *>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    }

  private:
    std::ostream &os_;
};

class Reader {
  public:
    explicit Reader(std::istream &is) : is_(is) {}
    template <class T> T get() {
        T v{};
        is_.read(reinterpret_cast<char *>(&v), sizeof(T));
        if (!is_)
            throw InputError("load_hmatrix: truncated stream");
        return v;
    }
    DenseBlock get_matrix(std::size_t rows, std::size_t cols) {
        DenseBlock m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        is_.read(reinterpret_cast<char *>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!is_)
            throw InputError("load_hmatrix: truncated stream");
        return m;
    }

  private:
    std::istream &is_;
};

void write_cluster(Writer &w, const Cluster &c) {
    w.put<std::uint64_t>(c.offset);
    w.put<std::uint64_t>(c.size);
    w.put<std::uint64_t>(c.sons.size());
    for (double x : c.bbox_min)
        w.put(x);
    for (double x : c.bbox_max)
        w.put(x);
    for (const auto &s : c.sons)
        write_cluster(w, *s);
}

void write_cluster_tree(Writer &w, const ClusterTree &t) {
    w.put<std::uint64_t>(t.dim());
    w.put<std::uint64_t>(t.leafsize());
    w.put<std::uint64_t>(t.size());
    for (auto i : t.tree_order())
        w.put<std::uint64_t>(i);
    write_cluster(w, t.root());
}

std::unique_ptr<Cluster> read_cluster(Reader &r, std::size_t dim, std::size_t depth) {
    auto c    = std::make_unique<Cluster>();
    c->offset = r.get<std::uint64_t>();
    c->size   = r.get<std::uint64_t>();
    c->depth  = depth;
    auto nsons = r.get<std::uint64_t>();
    if (nsons > 64)
        throw InputError("load_hmatrix: corrupt cluster tree");
    c->bbox_min.resize(dim);
    c->bbox_max.resize(dim);
    for (auto &x : c->bbox_min)
        x = r.get<double>();
    for (auto &x : c->bbox_max)
        x = r.get<double>();
    for (std::uint64_t i = 0; i < nsons; ++i)
        c->sons.push_back(read_cluster(r, dim, depth + 1));
    return c;
}

std::shared_ptr<const ClusterTree> read_cluster_tree(Reader &r) {
    auto dim      = r.get<std::uint64_t>();
    auto leafsize = r.get<std::uint64_t>();
    auto n        = r.get<std::uint64_t>();
    if (dim < 1 || dim > 3 || n > (std::uint64_t{1} << 40))
        throw InputError("load_hmatrix: corrupt cluster tree header");
    std::vector<std::size_t> order(n);
    for (auto &i : order)
        i = r.get<std::uint64_t>();
    auto root = read_cluster(r, dim, 0);
    return std::make_shared<const ClusterTree>(std::move(root), std::move(order), leafsize);
}

void write_kinds(Writer &w, const BlockNode &b, std::uint64_t &count, bool emit) {
    ++count;
    if (emit)
        w.put<std::uint8_t>(static_cast<std::uint8_t>(b.kind));
    for (const auto &s : b.sons)
        write_kinds(w, *s, count, emit);
}

} // namespace

void save_hmatrix(std::ostream &os, const HMatrix &h) {
    if (!h.tree())
        throw InputError("save_hmatrix: only a root H-matrix can be saved");
    Writer w(os);
    os.write(magic, 4);
    w.put(version);
    const BlockTree &bt = *h.tree();
    write_cluster_tree(w, bt.row_tree());
    const bool same = bt.row_tree_ptr() == bt.col_tree_ptr();
    w.put<std::uint8_t>(same ? 1 : 0);
    if (!same)
        write_cluster_tree(w, bt.col_tree());

    std::uint64_t count = 0;
    write_kinds(w, bt.root(), count, false);
    w.put(count);
    count = 0;
    write_kinds(w, bt.root(), count, true);

    for_each_leaf(h, [&](const HMatrix &l) {
        if (l.is_dense()) {
            w.put_matrix(l.dense());
        } else {
            w.put<std::uint64_t>(l.rk().rank());
            w.put_matrix(l.rk().A);
            w.put_matrix(l.rk().B);
        }
    });
    if (!os)
        throw std::runtime_error("save_hmatrix: write failed");
}

std::unique_ptr<HMatrix> load_hmatrix(std::istream &is) {
    char m[4];
    is.read(m, 4);
    if (!is || std::string_view(m, 4) != std::string_view(magic, 4))
        throw InputError("load_hmatrix: bad magic");
    Reader r(is);
    if (r.get<std::uint32_t>() != version)
        throw InputError("load_hmatrix: unsupported version");
    auto rows = read_cluster_tree(r);
    auto cols = r.get<std::uint8_t>() ? rows : read_cluster_tree(r);

    const auto count = r.get<std::uint64_t>();
    std::vector<BlockKind> kinds;
    kinds.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        auto k = r.get<std::uint8_t>();
        if (k > 2)
            throw InputError("load_hmatrix: corrupt block kind");
        kinds.push_back(static_cast<BlockKind>(k));
    }
    std::size_t next = 0;
    auto tree = std::make_shared<const BlockTree>(build_block_tree_with(rows, cols, [&](const Cluster &, const Cluster &) {
        if (next >= kinds.size())
            throw InputError("load_hmatrix: block kind list too short");
        return kinds[next++];
    }));
    if (next != kinds.size())
        throw InputError("load_hmatrix: block kind list too long");

    ContentPolicy payload{[&](const BlockNode &b) { return r.get_matrix(b.rows(), b.cols()); },
                          [&](const BlockNode &b) {
                              auto k = r.get<std::uint64_t>();
                              if (k > std::max(b.rows(), b.cols()))
                                  throw InputError("load_hmatrix: corrupt rank");
                              DenseBlock A = r.get_matrix(b.rows(), k);
                              DenseBlock B = r.get_matrix(b.cols(), k);
                              return RkBlock(std::move(A), std::move(B));
                          }};
    return build_hmatrix(std::move(tree), payload);
}

bool bitwise_equal(const HMatrix &a, const HMatrix &b) {
    std::ostringstream sa, sb;
    save_hmatrix(sa, a);
    save_hmatrix(sb, b);
    return sa.str() == sb.str();
}

} // namespace hmx
