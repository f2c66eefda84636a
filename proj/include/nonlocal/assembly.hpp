#pragma once

// Discrete nonlocal operator on tensor grids.
//
// Rows are interior nodes. A row is stored as a stencil of flat-index offsets,
// so rows with identical local geometry (constant A, matching spacing around
// the node) share one stencil. This keeps the finest grids in memory where a
// plain CSR matrix with ~10^9 nonzeros would not fit.

#include "nonlocal/grid.hpp"
#include "nonlocal/kernel.hpp"
#include "nonlocal/linsolve.hpp"
#include "nonlocal/parallel.hpp"
#include "nonlocal/quadrature.hpp"
#include "nonlocal/sparse.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace nonlocal {

enum class Scheme { collocation, fd_quadrature };

inline const char* to_string(Scheme s) {
    return s == Scheme::collocation ? "collocation" : "fd-quadrature";
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "collocation")
        return Scheme::collocation;
    if (s == "fd-quadrature" || s == "fd_quadrature" || s == "fd")
        return Scheme::fd_quadrature;
    throw InvalidArgument("unknown scheme '" + s + "'");
}

/// Off-diagonal entries of one row, as offsets from the row's flat index.
struct Stencil {
    std::vector<std::int32_t> offsets;
    std::vector<double> values;
    double diagonal = 0.0;
};

class LatticeOperator {
public:
    LatticeOperator() = default;

    LatticeOperator(const TensorGrid& grid, std::vector<Stencil> stencils,
                    std::vector<std::uint32_t> stencil_of_row)
        : node_count_(grid.node_count()), interior_(grid.interior_nodes()),
          collar_(grid.collar_nodes()), stencils_(std::move(stencils)),
          stencil_of_row_(std::move(stencil_of_row)) {
        require_same_size(stencil_of_row_.size(), interior_.size(), "row stencil map vs rows");
        slot_.assign(node_count_, 0);
        for (std::size_t r = 0; r < interior_.size(); ++r)
            slot_[interior_[r]] = static_cast<std::int64_t>(r);
        for (std::size_t c = 0; c < collar_.size(); ++c)
            slot_[collar_[c]] = -static_cast<std::int64_t>(c) - 1;
        for (std::size_t r = 0; r < interior_.size(); ++r) {
            if (stencil_of_row_[r] >= stencils_.size())
                throw InvalidArgument("row references a missing stencil");
            const Stencil& s = stencils_[stencil_of_row_[r]];
            for (auto o : s.offsets) {
                const auto f = static_cast<std::int64_t>(interior_[r]) + o;
                if (f < 0 || f >= static_cast<std::int64_t>(node_count_))
                    throw InvalidArgument("stencil leaves the grid at row " + std::to_string(r));
            }
        }
    }

    std::size_t size() const noexcept { return interior_.size(); }
    std::size_t node_count() const noexcept { return node_count_; }
    std::size_t collar_count() const noexcept { return collar_.size(); }
    std::size_t stencil_count() const noexcept { return stencils_.size(); }
    const Stencil& row_stencil(std::size_t r) const { return stencils_[stencil_of_row_.at(r)]; }
    std::size_t row_node(std::size_t r) const { return interior_.at(r); }
    std::size_t stencil_index(std::size_t r) const { return stencil_of_row_.at(r); }

    /// Entries stored across all rows, diagonal included.
    std::size_t nonzeros() const {
        std::size_t n = 0;
        for (auto s : stencil_of_row_)
            n += stencils_[s].offsets.size() + 1;
        return n;
    }

    /// Calls visit(flat_column, value) for every entry of row r in column order.
    template <class Visit>
    void for_each_entry(std::size_t r, Visit&& visit) const {
        const Stencil& s = row_stencil(r);
        const auto base = static_cast<std::int64_t>(interior_[r]);
        bool diag_done = false;
        for (std::size_t k = 0; k < s.offsets.size(); ++k) {
            if (!diag_done && s.offsets[k] > 0) {
                visit(static_cast<std::size_t>(base), s.diagonal);
                diag_done = true;
            }
            visit(static_cast<std::size_t>(base + s.offsets[k]), s.values[k]);
        }
        if (!diag_done)
            visit(static_cast<std::size_t>(base), s.diagonal);
    }

    /// Rows applied to a vector over all grid nodes.
    void apply_full(std::span<const double> u_nodes, std::span<double> y) const {
        require_same_size(u_nodes.size(), node_count_, "nodal vector vs grid nodes");
        require_same_size(y.size(), size(), "output vs operator rows");
        parallel_for_chunks(size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t r = begin; r < end; ++r) {
                const Stencil& s = stencils_[stencil_of_row_[r]];
                const double* u = u_nodes.data() + interior_[r];
                double acc = s.diagonal * u[0];
                const std::size_t m = s.offsets.size();
                const std::int32_t* off = s.offsets.data();
                const double* val = s.values.data();
                for (std::size_t k = 0; k < m; ++k)
                    acc += val[k] * u[off[k]];
                y[r] = acc;
            }
        });
    }

    /// Interior block times x (collar values taken as zero).
    void apply(std::span<const double> x, std::span<double> y) const {
        require_same_size(x.size(), size(), "vector vs operator rows");
        std::vector<double>& full = scratch();
        full.assign(node_count_, 0.0);
        for (std::size_t r = 0; r < interior_.size(); ++r)
            full[interior_[r]] = x[r];
        apply_full(full, y);
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(size());
        for (std::size_t r = 0; r < size(); ++r)
            d[r] = row_stencil(r).diagonal;
        return d;
    }

    /// Max row sum of |entries| over the interior block.
    double norm_inf() const {
        double best = 0.0;
        for (std::size_t r = 0; r < size(); ++r) {
            double s = 0.0;
            for_each_entry(r, [&](std::size_t col, double v) {
                if (slot_[col] >= 0)
                    s += std::abs(v);
            });
            best = std::max(best, s);
        }
        return best;
    }

    /// Nodal vector with interior values x and collar values g.
    std::vector<double> scatter(std::span<const double> x, std::span<const double> g) const {
        require_same_size(x.size(), size(), "interior vector vs operator rows");
        require_same_size(g.size(), collar_.size(), "collar vector vs collar nodes");
        std::vector<double> full(node_count_);
        for (std::size_t r = 0; r < interior_.size(); ++r)
            full[interior_[r]] = x[r];
        for (std::size_t c = 0; c < collar_.size(); ++c)
            full[collar_[c]] = g[c];
        return full;
    }

    /// Row index (>= 0) or -(collar index) - 1 of a flat node.
    std::int64_t slot(std::size_t flat) const { return slot_.at(flat); }

    SparseMatrix interior_block() const { return block(true); }
    SparseMatrix collar_block() const { return block(false); }

private:
    SparseMatrix block(bool interior) const {
        const std::size_t cols = interior ? interior_.size() : collar_.size();
        std::vector<std::size_t> offsets{0};
        std::vector<SparseMatrix::Index> columns;
        std::vector<double> values;
        offsets.reserve(size() + 1);
        for (std::size_t r = 0; r < size(); ++r) {
            std::vector<std::pair<SparseMatrix::Index, double>> row;
            for_each_entry(r, [&](std::size_t col, double v) {
                const std::int64_t s = slot_[col];
                if (interior && s >= 0)
                    row.emplace_back(static_cast<SparseMatrix::Index>(s), v);
                else if (!interior && s < 0)
                    row.emplace_back(static_cast<SparseMatrix::Index>(-s - 1), v);
            });
            // Collar indices follow flat order, so rows are already sorted.
            for (const auto& [c, v] : row) {
                columns.push_back(c);
                values.push_back(v);
            }
            offsets.push_back(columns.size());
        }
        return SparseMatrix(size(), cols, std::move(offsets), std::move(columns), std::move(values));
    }

    static std::vector<double>& scratch() {
        thread_local std::vector<double> buf;
        return buf;
    }

    std::size_t node_count_ = 0;
    std::vector<std::size_t> interior_;
    std::vector<std::size_t> collar_;
    std::vector<std::int64_t> slot_;
    std::vector<Stencil> stencils_;
    std::vector<std::uint32_t> stencil_of_row_;
};

struct AssemblyOptions {
    /// Reuse one stencil for rows with identical local geometry (constant A only).
    bool share_rows = true;
    /// Gauss-Legendre points per axis and cell for the quadrature-based scheme.
    std::size_t fd_points = 4;
};

/// FD weight |z|_2^2 / |z|_1.
inline double fd_weight(const Vec& z, int dim) {
    double l2 = 0.0, l1 = 0.0;
    for (int k = 0; k < dim; ++k) {
        l2 += z[k] * z[k];
        l1 += std::abs(z[k]);
    }
    return l1 > 0.0 ? l2 / l1 : 0.0;
}

namespace detail {

inline std::int32_t flat_offset(std::size_t from, std::size_t to) {
    const auto d = static_cast<std::int64_t>(to) - static_cast<std::int64_t>(from);
    if (d > INT32_MAX || d < INT32_MIN)
        throw InvalidArgument("grid too large for 32-bit stencil offsets");
    return static_cast<std::int32_t>(d);
}

inline void finish_row(Stencil& s, std::size_t node) {
    if (s.offsets.empty())
        throw NoNeighbors("node " + std::to_string(node) +
                          " has no neighbors; delta is too small for the grid");
    double sum = 0.0;
    for (double v : s.values)
        sum += v;
    s.diagonal = -sum;
    if (!(s.diagonal > 0.0))
        throw SingularRow("row of node " + std::to_string(node) + " has zero diagonal");
}

inline Stencil collocation_row(const TensorGrid& grid, const FrozenKernel& kernel,
                               const NodeIndex& i) {
    const Vec xi = grid.coord(i);
    Lattice first{}, last{};
    for (int k = 0; k < grid.dim(); ++k)
        std::tie(first[k], last[k]) = grid.axis_window(k, xi[k], kernel.extents()[k] * (1.0 + 1e-9));
    Stencil s;
    for_each_in_box(grid, first, last, [&](const Lattice& l) {
        const std::size_t f = grid.flat_of(l);
        if (f == i.flat)
            return;
        const Vec z = offset(xi, grid.coord(l));
        if (!kernel.contains(z))
            return;
        s.offsets.push_back(flat_offset(i.flat, f));
        s.values.push_back(-kernel(z) * hat_support_integral(grid, {f, l}));
    });
    finish_row(s, i.flat);
    return s;
}

/// Per-cell tensor Gauss-Legendre of phi_j W gamma over every cell meeting
/// the bounding box of the ellipsoid; b_ij = -c_j / W(x_j - x_i).
inline Stencil fd_quadrature_row(const TensorGrid& grid, const FrozenKernel& kernel,
                                 const NodeIndex& i, const QuadratureRule& gl) {
    const int d = grid.dim();
    const Vec xi = grid.coord(i);
    Lattice cfirst{}, clast{}, nfirst{}, nlast{}, extent{};
    for (int k = 0; k < d; ++k) {
        const auto& a = grid.axis(k);
        const double e = kernel.extents()[k];
        // Cells [a_c, a_{c+1}] with a_c < x + e and a_{c+1} > x - e.
        const auto lo = std::upper_bound(a.begin(), a.end(), xi[k] - e);
        const auto hi = std::lower_bound(a.begin(), a.end(), xi[k] + e);
        std::size_t c0 = lo == a.begin() ? 0 : static_cast<std::size_t>(lo - a.begin()) - 1;
        std::size_t c1 = static_cast<std::size_t>(hi - a.begin());
        c1 = c1 == 0 ? 0 : c1 - 1;
        c1 = std::min(c1, a.size() - 2);
        cfirst[k] = c0;
        clast[k] = c1;
        nfirst[k] = c0;
        nlast[k] = c1 + 1;
        extent[k] = nlast[k] - nfirst[k] + 1;
    }
    Lattice local_stride{};
    local_stride[d - 1] = 1;
    for (int k = d - 2; k >= 0; --k)
        local_stride[k] = local_stride[k + 1] * extent[k + 1];
    std::vector<double> acc(local_stride[0] * extent[0], 0.0);

    const std::size_t q = gl.size();
    std::vector<double> t(q), w(q);
    for (std::size_t p = 0; p < q; ++p) {
        t[p] = 0.5 * (gl.nodes[p] + 1.0);
        w[p] = 0.5 * gl.weights[p];
    }
    const std::size_t corners = std::size_t{1} << d;
    std::size_t total_points = 1;
    for (int k = 0; k < d; ++k)
        total_points *= q;

    for_each_in_box(grid, cfirst, clast, [&](const Lattice& cell) {
        Vec lo{}, h{};
        for (int k = 0; k < d; ++k) {
            lo[k] = grid.axis(k)[cell[k]];
            h[k] = grid.axis(k)[cell[k] + 1] - lo[k];
        }
        for (std::size_t pt = 0; pt < total_points; ++pt) {
            std::size_t rem = pt;
            Vec tk{}, z{};
            double weight = 1.0;
            for (int k = d - 1; k >= 0; --k) {
                const std::size_t p = rem % q;
                rem /= q;
                tk[k] = t[p];
                z[k] = lo[k] + t[p] * h[k] - xi[k];
                weight *= w[p] * h[k];
            }
            const double g = kernel(z);
            if (g == 0.0)
                continue;
            const double base = weight * g * fd_weight(z, d);
            for (std::size_t c = 0; c < corners; ++c) {
                double phi = 1.0;
                std::size_t idx = 0;
                for (int k = 0; k < d; ++k) {
                    const bool up = (c >> k) & 1u;
                    phi *= up ? tk[k] : 1.0 - tk[k];
                    idx += (cell[k] - nfirst[k] + (up ? 1 : 0)) * local_stride[k];
                }
                acc[idx] += base * phi;
            }
        }
    });

    Stencil s;
    for_each_in_box(grid, nfirst, nlast, [&](const Lattice& l) {
        std::size_t idx = 0;
        for (int k = 0; k < d; ++k)
            idx += (l[k] - nfirst[k]) * local_stride[k];
        const double c = acc[idx];
        const std::size_t f = grid.flat_of(l);
        if (f == i.flat || c == 0.0)
            return;
        s.offsets.push_back(flat_offset(i.flat, f));
        s.values.push_back(-c / fd_weight(offset(xi, grid.coord(l)), d));
    });
    finish_row(s, i.flat);
    return s;
}

/// Classes of nodes along one axis with the same relative node positions
/// inside the stencil window (plus one node of margin on each side).
inline std::vector<std::uint32_t> axis_classes(const TensorGrid& grid, int k, double extent) {
    const auto& a = grid.axis(k);
    struct Signature {
        std::int64_t lo, hi;
        std::vector<double> offsets;
    };
    std::vector<Signature> classes;
    std::vector<std::uint32_t> class_of(a.size(), 0);
    const double tol = 1e-12 * std::max(extent, a[1] - a[0]);
    for (std::size_t i = grid.solution_first(k) + 1; i < grid.solution_last(k); ++i) {
        auto [first, last] = grid.axis_window(k, a[i], extent * (1.0 + 1e-9));
        first = first > 0 ? first - 1 : 0;
        last = std::min(last + 1, a.size() - 1);
        Signature sig{static_cast<std::int64_t>(first) - static_cast<std::int64_t>(i),
                      static_cast<std::int64_t>(last) - static_cast<std::int64_t>(i),
                      {}};
        for (std::size_t j = first; j <= last; ++j)
            sig.offsets.push_back(a[j] - a[i]);
        std::uint32_t id = 0;
        for (; id < classes.size(); ++id) {
            const auto& c = classes[id];
            if (c.lo != sig.lo || c.hi != sig.hi)
                continue;
            bool same = true;
            for (std::size_t m = 0; m < sig.offsets.size() && same; ++m)
                same = std::abs(c.offsets[m] - sig.offsets[m]) <= tol;
            if (same)
                break;
        }
        if (id == classes.size())
            classes.push_back(std::move(sig));
        class_of[i] = id;
    }
    return class_of;
}

} // namespace detail

/// Assembles every interior row of the chosen scheme.
inline LatticeOperator build_operator(const TensorGrid& grid, const CoefficientField& field,
                                      const KernelParams& params, Scheme scheme,
                                      const AssemblyOptions& options = {}) {
    params.validate();
    if (field.dim() != grid.dim() || params.dim != grid.dim())
        throw DimensionMismatch("grid, kernel and coefficient dimensions must agree");
    const std::size_t rows = grid.interior_count();
    const QuadratureRule gl = gauss_legendre(options.fd_points);

    auto make_row = [&](std::size_t r) {
        const NodeIndex i = grid.node(grid.interior_nodes()[r]);
        const FrozenKernel kernel(params, field(grid.coord(i)));
        return scheme == Scheme::collocation ? detail::collocation_row(grid, kernel, i)
                                             : detail::fd_quadrature_row(grid, kernel, i, gl);
    };

    std::vector<std::uint32_t> stencil_of_row(rows);
    std::vector<std::size_t> representative;
    if (field.is_constant() && options.share_rows) {
        const Vec ext =
            ellipsoid_axis_extents(field.constant_value(), params.delta, params.chi2);
        std::array<std::vector<std::uint32_t>, kMaxDim> cls;
        for (int k = 0; k < grid.dim(); ++k)
            cls[k] = detail::axis_classes(grid, k, ext[k]);
        std::map<std::array<std::uint32_t, kMaxDim>, std::uint32_t> ids;
        for (std::size_t r = 0; r < rows; ++r) {
            const Lattice l = grid.lattice_of(grid.interior_nodes()[r]);
            std::array<std::uint32_t, kMaxDim> key{};
            for (int k = 0; k < grid.dim(); ++k)
                key[k] = cls[k][l[k]];
            auto [it, fresh] = ids.try_emplace(key, static_cast<std::uint32_t>(representative.size()));
            if (fresh)
                representative.push_back(r);
            stencil_of_row[r] = it->second;
        }
    } else {
        representative.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            representative[r] = r;
            stencil_of_row[r] = static_cast<std::uint32_t>(r);
        }
    }
    std::vector<Stencil> stencils(representative.size());
    parallel_for(representative.size(), [&](std::size_t s) { stencils[s] = make_row(representative[s]); });
    return LatticeOperator(grid, std::move(stencils), std::move(stencil_of_row));
}

struct CollocationSystem {
    LatticeOperator matrix;
    std::vector<double> rhs;
    std::vector<double> collar_values;
    Scheme scheme = Scheme::collocation;

    SparseMatrix interior_block() const { return matrix.interior_block(); }
    SparseMatrix boundary_coupling() const { return matrix.collar_block(); }
};

/// rhs_i = f_i - sum over collar j of b_ij g_j.
inline std::vector<double> boundary_adjusted_rhs(const LatticeOperator& op,
                                                 std::span<const double> f_interior,
                                                 std::span<const double> g_collar) {
    require_same_size(f_interior.size(), op.size(), "source vector vs interior nodes");
    const std::vector<double> zeros(op.size(), 0.0);
    const std::vector<double> full = op.scatter(zeros, g_collar);
    std::vector<double> rhs(op.size());
    op.apply_full(full, rhs);
    for (std::size_t r = 0; r < rhs.size(); ++r)
        rhs[r] = f_interior[r] - rhs[r];
    return rhs;
}

inline CollocationSystem assemble(const TensorGrid& grid, const CoefficientField& field,
                                  const KernelParams& params, Scheme scheme,
                                  std::span<const double> f_interior,
                                  std::span<const double> g_collar,
                                  const AssemblyOptions& options = {}) {
    require_same_size(f_interior.size(), grid.interior_count(), "source vector vs interior nodes");
    require_same_size(g_collar.size(), grid.collar_count(), "boundary vector vs collar nodes");
    CollocationSystem sys;
    sys.scheme = scheme;
    sys.matrix = build_operator(grid, field, params, scheme, options);
    sys.rhs = boundary_adjusted_rhs(sys.matrix, f_interior, g_collar);
    sys.collar_values.assign(g_collar.begin(), g_collar.end());
    return sys;
}

inline CollocationSystem assemble_collocation(const TensorGrid& grid, const CoefficientField& field,
                                              const KernelParams& params,
                                              std::span<const double> f_interior,
                                              std::span<const double> g_collar,
                                              const AssemblyOptions& options = {}) {
    return assemble(grid, field, params, Scheme::collocation, f_interior, g_collar, options);
}

inline CollocationSystem assemble_fd_quadrature(const TensorGrid& grid,
                                                const CoefficientField& field,
                                                const KernelParams& params,
                                                std::span<const double> f_interior,
                                                std::span<const double> g_collar,
                                                const AssemblyOptions& options = {}) {
    return assemble(grid, field, params, Scheme::fd_quadrature, f_interior, g_collar, options);
}

/// Interior block times u_interior plus collar block times u_collar.
inline std::vector<double> apply_operator(const CollocationSystem& system,
                                          std::span<const double> u_interior,
                                          std::span<const double> u_collar) {
    const std::vector<double> full = system.matrix.scatter(u_interior, u_collar);
    std::vector<double> y(system.matrix.size());
    system.matrix.apply_full(full, y);
    return y;
}

/// Interior block in triplet form, rows and columns in interior numbering.
inline void write_triplets(std::ostream& out, const LatticeOperator& op) {
    write_triplets(out, op.interior_block());
}

} // namespace nonlocal
